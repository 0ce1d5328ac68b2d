//! Structural validation of relaxed and strict B-slack trees.
//!
//! The checker only reads a tree through its public node view and
//! recomputes every quantity from scratch, so it can be used to audit the
//! incremental counters kept by [`Tree`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::node::NodeId;
use crate::tree::{Policy, SlackRule, Tree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Relaxed properties only; violations are listed but allowed.
    Relaxed,
    /// No violations allowed; children share at most `b - 1` slack.
    Strict,
    /// No violations allowed; Compress threshold of the constant-rebalancing
    /// variant.
    StrictConstRebalance,
}

impl Mode {
    pub fn strict_for(policy: Policy) -> Mode {
        match policy {
            Policy::ConstRebalance => Mode::StrictConstRebalance,
            Policy::Standard | Policy::Batch => Mode::Strict,
        }
    }

    pub fn slack_rule(self) -> SlackRule {
        match self {
            Mode::StrictConstRebalance => SlackRule::ConstRebalance,
            Mode::Relaxed | Mode::Strict => SlackRule::Standard,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    Weight,
    Slack,
    Degree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub node: NodeId,
    pub parent: Option<NodeId>,
}

/// Defects that no relaxed B-slack tree may have. These indicate bugs, not
/// pending rebalancing work.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StructuralFault {
    KeysNotIncreasing { node: NodeId },
    ChildCountMismatch { node: NodeId, keys: usize, children: usize },
    ValueCountMismatch { node: NodeId },
    DegreeOutOfRange { node: NodeId, degree: usize },
    InvalidWeight { node: NodeId, weight: u8 },
    LeafWeightZero { node: NodeId },
    WeightZeroShape { node: NodeId, degree: usize },
    SearchOrder { node: NodeId },
    ParentLink { node: NodeId },
    UnequalRelaxedDepth { depths: Vec<usize> },
    DepthMismatch,
    LenMismatch { stored: usize, counted: usize },
    NodeCountMismatch { live: usize, reachable: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSlack {
    pub node: NodeId,
    pub slack: usize,
    /// Total slack of the children, for internal nodes.
    pub children_slack: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub mode: Mode,
    pub b: usize,
    pub violations: Vec<Violation>,
    pub structural: Vec<StructuralFault>,
    pub slack: Vec<NodeSlack>,
    /// Distinct relaxed depths of the leaves (a single value when P1' holds).
    pub leaf_relaxed_depths: Vec<usize>,
    pub height: usize,
    pub node_count: usize,
    pub internal_count: usize,
    pub key_count: usize,
    pub weight_zero_count: usize,
    pub total_degree: u64,
    /// Total degree of the nodes at each depth.
    pub depth_degree_totals: Vec<u64>,
    pub total_weight1_slack: i64,
    pub potential: i64,
}

impl ViolationReport {
    pub fn is_well_formed(&self) -> bool {
        self.structural.is_empty()
    }

    /// No structural faults and no violations.
    pub fn is_strict(&self) -> bool {
        self.structural.is_empty() && self.violations.is_empty()
    }

    /// Whether the tree meets the requirements of the mode it was checked in.
    pub fn passes(&self) -> bool {
        match self.mode {
            Mode::Relaxed => self.is_well_formed(),
            Mode::Strict | Mode::StrictConstRebalance => self.is_strict(),
        }
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn average_degree(&self) -> f64 {
        self.total_degree as f64 / self.node_count as f64
    }
}

/// Slack of a node of the given degree.
pub fn slack(degree: usize, b: usize) -> usize {
    b - degree
}

/// Per-node potential: `b - deg` for a non-full weight-one node, `b`
/// otherwise.
pub fn node_potential(degree: usize, weight: u8, b: usize) -> i64 {
    if weight == 1 && degree < b {
        (b - degree) as i64
    } else {
        b as i64
    }
}

/// Potential of the whole tree, recomputed by traversal.
pub fn potential<K: Ord + Clone, V>(tree: &Tree<K, V>) -> i64 {
    let b = tree.b();
    tree.node_ids()
        .into_iter()
        .map(|id| {
            let n = tree.node(id).unwrap();
            node_potential(n.degree(), n.weight(), b)
        })
        .sum()
}

/// Total slack of weight-one nodes, recomputed by traversal.
pub fn weight1_slack<K: Ord + Clone, V>(tree: &Tree<K, V>) -> i64 {
    let b = tree.b();
    tree.node_ids()
        .into_iter()
        .filter_map(|id| {
            let n = tree.node(id).unwrap();
            (n.weight() == 1).then(|| slack(n.degree(), b) as i64)
        })
        .sum()
}

struct Frame<'a, K> {
    id: NodeId,
    parent: Option<NodeId>,
    depth: usize,
    weight_sum: usize,
    lo: Option<&'a K>,
    hi: Option<&'a K>,
}

pub fn validate<K: Ord + Clone, V>(tree: &Tree<K, V>, mode: Mode) -> ViolationReport {
    let b = tree.b();
    let rule = mode.slack_rule();
    let mut report = ViolationReport {
        mode,
        b,
        violations: Vec::new(),
        structural: Vec::new(),
        slack: Vec::new(),
        leaf_relaxed_depths: Vec::new(),
        height: 0,
        node_count: 0,
        internal_count: 0,
        key_count: 0,
        weight_zero_count: 0,
        total_degree: 0,
        depth_degree_totals: Vec::new(),
        total_weight1_slack: 0,
        potential: 0,
    };
    let mut relaxed_depths = BTreeSet::new();
    let mut leaf_depths = BTreeSet::new();
    let faults = &mut report.structural;

    let mut stack = vec![Frame {
        id: tree.root(),
        parent: None,
        depth: 0,
        weight_sum: 0,
        lo: None,
        hi: None,
    }];
    while let Some(f) = stack.pop() {
        let Some(node) = tree.node(f.id) else {
            faults.push(StructuralFault::ParentLink { node: f.id });
            continue;
        };
        let id = f.id;
        let deg = node.degree();
        let weight = node.weight();
        let keys = node.keys();
        report.node_count += 1;
        report.total_degree += deg as u64;
        if report.depth_degree_totals.len() <= f.depth {
            report.depth_degree_totals.resize(f.depth + 1, 0);
        }
        report.depth_degree_totals[f.depth] += deg as u64;
        report.potential += node_potential(deg.min(b), weight, b);
        if weight == 1 {
            report.total_weight1_slack += b.saturating_sub(deg) as i64;
        }

        if node.parent() != f.parent {
            faults.push(StructuralFault::ParentLink { node: id });
        }
        if weight > 1 {
            faults.push(StructuralFault::InvalidWeight { node: id, weight });
        }
        if keys.windows(2).any(|w| w[0] >= w[1]) {
            faults.push(StructuralFault::KeysNotIncreasing { node: id });
        }
        if weight == 0 {
            report.weight_zero_count += 1;
            report.violations.push(Violation {
                kind: ViolationKind::Weight,
                node: id,
                parent: f.parent,
            });
        }
        let weight_sum = f.weight_sum + weight as usize;

        if node.is_leaf() {
            if weight == 0 {
                faults.push(StructuralFault::LeafWeightZero { node: id });
            }
            if deg > b {
                faults.push(StructuralFault::DegreeOutOfRange { node: id, degree: deg });
            }
            if node.values().len() != keys.len() {
                faults.push(StructuralFault::ValueCountMismatch { node: id });
            }
            let in_range = |k: &K| f.lo.is_none_or(|lo| k >= lo) && f.hi.is_none_or(|hi| k < hi);
            if !keys.iter().all(in_range) {
                faults.push(StructuralFault::SearchOrder { node: id });
            }
            report.key_count += keys.len();
            report.height = report.height.max(f.depth);
            leaf_depths.insert(f.depth);
            relaxed_depths.insert(weight_sum.wrapping_sub(1));
            report.slack.push(NodeSlack {
                node: id,
                slack: b.saturating_sub(deg),
                children_slack: None,
            });
            continue;
        }

        report.internal_count += 1;
        let children = node.children();
        if children.len() != keys.len() + 1 {
            faults.push(StructuralFault::ChildCountMismatch {
                node: id,
                keys: keys.len(),
                children: children.len(),
            });
        }
        if deg == 0 || deg > b {
            faults.push(StructuralFault::DegreeOutOfRange { node: id, degree: deg });
        }
        if weight == 0 && deg != 2 {
            faults.push(StructuralFault::WeightZeroShape { node: id, degree: deg });
        }
        if deg == 1 {
            report.violations.push(Violation {
                kind: ViolationKind::Degree,
                node: id,
                parent: f.parent,
            });
        }
        let child_total: usize = children
            .iter()
            .filter_map(|&c| tree.node(c))
            .map(|c| c.degree().min(b))
            .sum();
        let k = children.len();
        if k > 0 && rule.is_violation(b, k, child_total) {
            report.violations.push(Violation {
                kind: ViolationKind::Slack,
                node: id,
                parent: f.parent,
            });
        }
        report.slack.push(NodeSlack {
            node: id,
            slack: b.saturating_sub(deg),
            children_slack: Some(k * b - child_total),
        });

        for (i, &c) in children.iter().enumerate().rev() {
            let lo = if i == 0 { f.lo } else { max_bound(f.lo, keys.get(i - 1)) };
            let hi = if i + 1 == children.len() {
                f.hi
            } else {
                min_bound(f.hi, keys.get(i))
            };
            stack.push(Frame {
                id: c,
                parent: Some(id),
                depth: f.depth + 1,
                weight_sum,
                lo,
                hi,
            });
        }
    }

    if relaxed_depths.len() > 1 {
        faults.push(StructuralFault::UnequalRelaxedDepth {
            depths: relaxed_depths.iter().copied().collect(),
        });
    }
    // With every weight equal to one, relaxed depth is plain depth.
    if mode != Mode::Relaxed && report.weight_zero_count == 0 && relaxed_depths != leaf_depths {
        faults.push(StructuralFault::DepthMismatch);
    }
    if report.key_count != tree.len() {
        faults.push(StructuralFault::LenMismatch {
            stored: tree.len(),
            counted: report.key_count,
        });
    }
    if report.node_count != tree.node_count() {
        faults.push(StructuralFault::NodeCountMismatch {
            live: tree.node_count(),
            reachable: report.node_count,
        });
    }
    report.leaf_relaxed_depths = relaxed_depths.into_iter().collect();
    report
}

fn max_bound<'a, K: Ord>(a: Option<&'a K>, b: Option<&'a K>) -> Option<&'a K> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) | (None, x) => x,
    }
}

fn min_bound<'a, K: Ord>(a: Option<&'a K>, b: Option<&'a K>) -> Option<&'a K> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) | (None, x) => x,
    }
}

/// Internal nodes whose children share less than `b` slack but have no
/// child of degree three or more. Always empty for a strict tree.
pub fn degree_three_counterexamples<K: Ord + Clone, V>(tree: &Tree<K, V>) -> Vec<NodeId> {
    let b = tree.b();
    tree.node_ids()
        .into_iter()
        .filter(|&id| {
            let node = tree.node(id).unwrap();
            if node.is_leaf() {
                return false;
            }
            let degrees: Vec<usize> = node
                .children()
                .iter()
                .map(|&c| tree.node(c).unwrap().degree())
                .collect();
            let shared_slack = degrees.len() * b - degrees.iter().sum::<usize>();
            shared_slack < b && degrees.iter().all(|&d| d < 3)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op<K, V> {
    Insert(K, V),
    Delete(K),
}

/// Replays `ops` on a sorted reference map.
pub fn oracle_model<K: Ord, V>(ops: impl IntoIterator<Item = Op<K, V>>) -> BTreeMap<K, V> {
    let mut map = BTreeMap::new();
    for op in ops {
        match op {
            Op::Insert(k, v) => {
                map.insert(k, v);
            }
            Op::Delete(k) => {
                map.remove(&k);
            }
        }
    }
    map
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("exhaustive search supports 4 < b <= 10 (got {0})")]
pub struct EnumerationRange(pub usize);

/// Smallest number of keys in any B-slack tree of height two, by exhaustive
/// search over root degrees, child degrees and leaf degrees.
///
/// Shapes are enumerated as multisets (sibling order does not change key
/// counts), and each child's leaf assignment is minimized on its own since
/// the slack constraint of a node only involves its own children.
pub fn enumerate_min_keys_height2(b: usize) -> Result<u64, EnumerationRange> {
    if !(5..=10).contains(&b) {
        return Err(EnumerationRange(b));
    }
    // Fewest keys under a height-one subtree whose root has degree c.
    let min_under: Vec<Option<u64>> = (0..=b)
        .map(|c| {
            if c < 2 {
                return None;
            }
            let mut best = None;
            for_each_multiset(c, 0, b, &mut |leaves| {
                let total: usize = leaves.iter().sum();
                if c * b - total < b {
                    best = Some(best.map_or(total, |m: usize| m.min(total)));
                }
            });
            best.map(|m| m as u64)
        })
        .collect();

    let mut best: Option<u64> = None;
    for k in 2..=b {
        for_each_multiset(k, 2, b, &mut |children| {
            let total: usize = children.iter().sum();
            if k * b - total > b - 1 {
                return;
            }
            let keys: Option<u64> = children.iter().map(|&c| min_under[c]).sum();
            if let Some(keys) = keys {
                best = Some(best.map_or(keys, |m| m.min(keys)));
            }
        });
    }
    Ok(best.expect("some height-two tree exists"))
}

/// Calls `f` with every non-decreasing sequence of `len` values in `lo..=hi`.
fn for_each_multiset(len: usize, lo: usize, hi: usize, f: &mut dyn FnMut(&[usize])) {
    fn go(buf: &mut Vec<usize>, len: usize, lo: usize, hi: usize, f: &mut dyn FnMut(&[usize])) {
        if buf.len() == len {
            f(buf);
            return;
        }
        for v in lo..=hi {
            buf.push(v);
            go(buf, len, v, hi, f);
            buf.pop();
        }
    }
    go(&mut Vec::with_capacity(len), len, lo, hi, f);
}
