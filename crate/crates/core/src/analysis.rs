//! Worst-case degree, height and space quantities for B-slack trees.
//!
//! Integer quantities are exact (`BigInt`), ratios are exact rationals, and
//! the closed form for `d` is evaluated in `f64` as a cross-check.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{Config, Shape, Tree};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("degree bound b must exceed 4 (got {0})")]
    DegreeBound(usize),
    #[error("root degree k must lie in 2..={b} (got {k})")]
    RootDegree { k: usize, b: usize },
    #[error("at least two keys are needed (got {0})")]
    TooFewKeys(u64),
    #[error("family trees need an even degree bound (got {0})")]
    OddDegreeBound(usize),
    #[error("family tree with at least {0} keys does not fit in 64 bits")]
    FamilyTooLarge(u64),
}

fn check(k: usize, b: usize) -> Result<(), AnalysisError> {
    if b <= 4 {
        return Err(AnalysisError::DegreeBound(b));
    }
    if !(2..=b).contains(&k) {
        return Err(AnalysisError::RootDegree { k, b });
    }
    Ok(())
}

/// `d(0..=max_delta, k)`: total degree of the nodes at each depth of a
/// `(b,k)`-overslack tree.
pub fn d_table(max_delta: usize, k: usize, b: usize) -> Result<Vec<BigInt>, AnalysisError> {
    check(k, b)?;
    let bb = BigInt::from(b);
    let mut d = Vec::with_capacity(max_delta + 1);
    d.push(BigInt::from(k));
    if max_delta >= 1 {
        d.push(BigInt::from(k * b - b));
    }
    for i in 2..=max_delta {
        let next = &bb * (&d[i - 1] - &d[i - 2]);
        d.push(next);
    }
    Ok(d)
}

pub fn d_recurrence(delta: usize, k: usize, b: usize) -> Result<BigInt, AnalysisError> {
    Ok(d_table(delta, k, b)?.pop().unwrap())
}

/// Closed form `2^-δ (k₁ α^δ + k₂ γ^δ)` with `α, γ = b ± √(b² − 4b)`.
pub fn d_closed(delta: usize, k: usize, b: usize) -> Result<f64, AnalysisError> {
    check(k, b)?;
    let (b, k) = (b as f64, k as f64);
    let root = (b * b - 4.0 * b).sqrt();
    let alpha = b + root;
    let gamma = b - root;
    let k1 = (b * k - 2.0 * b) / (2.0 * root) + k / 2.0;
    let k2 = k - k1;
    let e = delta as i32;
    Ok(k1 * (alpha / 2.0).powi(e) + k2 * (gamma / 2.0).powi(e))
}

/// `D(h,k)`: total degree of all nodes of a `(b,k)`-overslack tree of
/// height `h`.
pub fn total_degree(h: usize, k: usize, b: usize) -> Result<BigInt, AnalysisError> {
    check(k, b)?;
    if h == 0 {
        return Ok(BigInt::from(k));
    }
    let d = d_recurrence(h - 1, k, b)?;
    Ok(BigInt::from(k) + BigInt::from(b) * (d - 1))
}

/// `d̄(δ,k)`: average degree of the nodes at depth `δ`.
pub fn dbar(delta: usize, k: usize, b: usize) -> Result<BigRational, AnalysisError> {
    if delta == 0 {
        check(k, b)?;
        return Ok(BigRational::from_integer(BigInt::from(k)));
    }
    let d = d_table(delta, k, b)?;
    Ok(BigRational::new(d[delta].clone(), d[delta - 1].clone()))
}

/// `D̄(h,k)`: average degree of all nodes of an overslack tree of height `h`.
pub fn dbar_total(h: usize, k: usize, b: usize) -> Result<BigRational, AnalysisError> {
    if h == 0 {
        check(k, b)?;
        return Ok(BigRational::from_integer(BigInt::from(k)));
    }
    let nodes = total_degree(h - 1, k, b)? + 1;
    Ok(BigRational::new(total_degree(h, k, b)?, nodes))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverslackParams {
    pub b: usize,
    pub k: usize,
    pub h: usize,
}

impl OverslackParams {
    pub fn new(b: usize, k: usize, h: usize) -> Result<Self, AnalysisError> {
        check(k, b)?;
        Ok(OverslackParams { b, k, h })
    }
}

/// Builds a `(b,k)`-overslack tree of height `h`: every internal node's
/// children share exactly `b` slack. Child degrees under a node differ by at
/// most one, larger first. Keys are `0..d(h,k)` with data equal to the key.
pub fn build_overslack(params: OverslackParams) -> Result<Tree<u64, u64>, AnalysisError> {
    let OverslackParams { b, k, h } = params;
    check(k, b)?;
    let mut next_key = 0u64;
    let shape = overslack_shape(b, k, h, &mut next_key);
    Ok(Tree::from_shape(Config::new(b), shape).expect("b > 4 is a valid configuration"))
}

fn overslack_shape(b: usize, degree: usize, height: usize, next_key: &mut u64) -> Shape<u64, u64> {
    if height == 0 {
        let start = *next_key;
        *next_key += degree as u64;
        return Shape::Leaf((start..*next_key).map(|k| (k, k)).collect());
    }
    let total = degree * b - b;
    let children: Vec<Shape<u64, u64>> = crate::steps::even_split(total, degree)
        .into_iter()
        .map(|c| overslack_shape(b, c, height - 1, next_key))
        .collect();
    let keys = children[1..].iter().map(first_key).collect();
    Shape::Internal {
        weight: 1,
        keys,
        children,
    }
}

fn first_key(shape: &Shape<u64, u64>) -> u64 {
    match shape {
        Shape::Leaf(entries) => entries[0].0,
        Shape::Internal { children, .. } => first_key(&children[0]),
    }
}

/// Exact quantities of a `(b,k)`-overslack tree. Big integers are rendered
/// in decimal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub params: OverslackParams,
    /// `d(δ,k)` for `δ = 0..=h`.
    pub d: Vec<String>,
    /// `D(h,k)`.
    pub total_degree: String,
    /// `d̄(δ,k)` for `δ = 0..=h`.
    pub dbar: Vec<f64>,
    /// `D̄(h,k)` as `numerator/denominator`.
    pub dbar_total_exact: String,
    pub dbar_total: f64,
    /// Keys stored, `d(h,k)`.
    pub keys: String,
    /// Node count `F = D(h−1,k) + 1`.
    pub nodes: String,
    /// Height lower and upper bounds for a strict tree holding `keys` keys.
    pub height_lower: f64,
    pub height_upper: f64,
    /// `S = 2b·F` words.
    pub space_words: String,
    pub words_per_key: f64,
}

pub fn bound_report(params: OverslackParams) -> Result<BoundReport, AnalysisError> {
    let OverslackParams { b, k, h } = params;
    let d = d_table(h, k, b)?;
    let nodes = if h == 0 {
        BigInt::one()
    } else {
        total_degree(h - 1, k, b)? + 1
    };
    let keys = d[h].clone();
    let space = BigInt::from(2 * b) * &nodes;
    let dbar_exact = dbar_total(h, k, b)?;
    let n = keys.to_f64().unwrap_or(f64::INFINITY);
    Ok(BoundReport {
        params,
        d: d.iter().map(ToString::to_string).collect(),
        total_degree: total_degree(h, k, b)?.to_string(),
        dbar: (0..=h)
            .map(|i| dbar(i, k, b).map(|r| to_f64(&r)))
            .collect::<Result<_, _>>()?,
        dbar_total_exact: dbar_exact.to_string(),
        dbar_total: to_f64(&dbar_exact),
        keys: keys.to_string(),
        nodes: nodes.to_string(),
        height_lower: n.ln() / (b as f64).ln(),
        height_upper: n.ln() / (b as f64 / 2.0).ln(),
        space_words: space.to_string(),
        words_per_key: to_f64(&BigRational::new(space, keys)),
    })
}

/// Worst-case space of a strict B-slack tree holding `n` keys.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceBounds {
    pub n: u64,
    pub b: usize,
    /// Height used for the average-degree bound, `⌈log_b n⌉ − 1`.
    pub height: usize,
    /// `D̄(height, 2)`.
    pub s: f64,
    pub lower_words: f64,
    pub upper_words: f64,
    pub lower_ratio: f64,
    pub upper_ratio: f64,
    /// `2b(n−1)/(b−3)`, given when `n > b³`.
    pub simple_upper_words: Option<f64>,
}

/// Smallest `e` with `b^e ≥ n`.
pub fn ceil_log(n: u64, b: usize) -> usize {
    let mut e = 0;
    let mut p: u128 = 1;
    while p < n as u128 {
        p *= b as u128;
        e += 1;
    }
    e
}

pub fn space_bounds(n: u64, b: usize) -> Result<SpaceBounds, AnalysisError> {
    check(2, b)?;
    if n < 2 {
        return Err(AnalysisError::TooFewKeys(n));
    }
    let height = ceil_log(n, b) - 1;
    let s = to_f64(&dbar_total(height, 2, b)?);
    let base = 2.0 * b as f64 * (n - 1) as f64;
    let lower = base / (b as f64 - 1.0);
    let upper = base / (s - 1.0);
    let cube = (b as u128).pow(3);
    Ok(SpaceBounds {
        n,
        b,
        height,
        s,
        lower_words: lower,
        upper_words: upper,
        lower_ratio: lower / n as f64,
        upper_ratio: upper / n as f64,
        simple_upper_words: ((n as u128) > cube).then(|| base / (b as f64 - 3.0)),
    })
}

/// Words per key bound `2b / (D̄(h,2) − 1)` for trees of height `h`.
pub fn bslack_ratio_at_height(b: usize, h: usize) -> Result<f64, AnalysisError> {
    let dbar = dbar_total(h, 2, b)?;
    let ratio = BigRational::from_integer(BigInt::from(2 * b)) / (dbar - BigRational::from_integer(BigInt::one()));
    Ok(to_f64(&ratio))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Root of degree two, every other node of degree `b/2`.
    BTree,
    /// B-tree shape with leaves of degree `b−3`, plus one empty overflow
    /// node for every parent of leaves.
    OverflowTree,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::BTree => "b-tree",
            Family::OverflowTree => "overflow-tree",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpace {
    pub family: Family,
    pub b: usize,
    pub height: usize,
    pub n: u64,
    pub nodes: u64,
    pub ratio: f64,
}

/// Space of the smallest tree of `family` holding at least `min_keys` keys,
/// with `2b` words per node.
pub fn family_space(family: Family, b: usize, min_keys: u64) -> Result<FamilySpace, AnalysisError> {
    check(2, b)?;
    if !b.is_multiple_of(2) {
        return Err(AnalysisError::OddDegreeBound(b));
    }
    let half = (b / 2) as u64;
    let leaf_degree = match family {
        Family::BTree => half,
        Family::OverflowTree => b as u64 - 3,
    };
    let too_large = || AnalysisError::FamilyTooLarge(min_keys);
    // Height 1: a root of degree two over two leaves.
    let (mut height, mut leaves, mut internal): (usize, u64, u64) = (1, 2, 1);
    loop {
        let n = leaves.checked_mul(leaf_degree).ok_or_else(too_large)?;
        if n >= min_keys.max(1) {
            let leaf_parents = if height == 1 { 1 } else { leaves / half };
            let nodes = internal
                + leaves
                + match family {
                    Family::BTree => 0,
                    Family::OverflowTree => leaf_parents,
                };
            let ratio = to_f64(&BigRational::new(
                BigInt::from(2 * b as u64) * BigInt::from(nodes),
                BigInt::from(n),
            ));
            return Ok(FamilySpace {
                family,
                b,
                height,
                n,
                nodes,
                ratio,
            });
        }
        internal = internal.checked_add(leaves).ok_or_else(too_large)?;
        leaves = leaves.checked_mul(half).ok_or_else(too_large)?;
        height += 1;
    }
}

/// One row of the space table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceRow {
    pub family: String,
    pub b: usize,
    pub ratio: f64,
    pub height: usize,
    pub n: String,
}

/// Space table over `bs`: the two pathological families at `min_keys`, and
/// the B-slack bound at each height of [`default_bslack_heights`].
pub fn space_table(bs: &[usize], min_keys: u64) -> Result<Vec<SpaceRow>, AnalysisError> {
    let mut rows = Vec::new();
    for family in [Family::BTree, Family::OverflowTree] {
        for &b in bs {
            let f = family_space(family, b, min_keys)?;
            rows.push(SpaceRow {
                family: family.name().to_string(),
                b,
                ratio: f.ratio,
                height: f.height,
                n: f.n.to_string(),
            });
        }
    }
    for &b in bs {
        for h in default_bslack_heights(b, min_keys) {
            rows.push(SpaceRow {
                family: "b-slack-bound".to_string(),
                b,
                ratio: bslack_ratio_at_height(b, h)?,
                height: h,
                n: d_recurrence(h, 2, b)?.to_string(),
            });
        }
    }
    Ok(rows)
}

/// Heights at which the B-slack bound is reported: `⌈log_b n⌉ − 1` for `n`
/// keys, as in [`space_bounds`], and for `b = 8` also height four.
pub fn default_bslack_heights(b: usize, n: u64) -> Vec<usize> {
    let mut hs = vec![ceil_log(n.max(2), b) - 1];
    if b == 8 {
        hs.push(4);
    }
    hs.sort_unstable();
    hs.dedup();
    hs
}
