//! Randomized trials: a prefill phase followed by a measured phase of
//! uniform random updates, with per-update rebalancing histograms and checks
//! of the amortized step bounds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis;
use crate::checker::{self, Mode, ViolationReport};
use crate::rng::{Update, UpdateStream};
use crate::tree::{Config, ConfigError, Policy, Schedule, StepCounts, Tree, TreeStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub b: usize,
    /// Keys are drawn uniformly from `[0, size)`.
    pub size: u64,
    pub insert_pct: u8,
    pub delete_pct: u8,
    /// Number of measured updates.
    pub ops: u64,
    pub seed: u64,
    pub policy: Policy,
    pub queue_capacity: usize,
    pub schedule: Schedule,
    /// Validate the tree after every `validate_every` updates; 0 disables.
    pub validate_every: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Workload {
    /// 50% insertions, 50% deletions.
    Balanced,
    /// 90% insertions, 10% deletions.
    InsertHeavy,
    /// 10% insertions, 90% deletions.
    DeleteHeavy,
}

impl Workload {
    pub fn insert_pct(self) -> u8 {
        match self {
            Workload::Balanced => 50,
            Workload::InsertHeavy => 90,
            Workload::DeleteHeavy => 10,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Workload::Balanced => "50i-50d",
            Workload::InsertHeavy => "90i-10d",
            Workload::DeleteHeavy => "10i-90d",
        }
    }
}

impl TrialConfig {
    pub fn new(b: usize) -> Self {
        TrialConfig {
            b,
            size: 1 << 20,
            insert_pct: 50,
            delete_pct: 50,
            ops: 1_000_000,
            seed: 42,
            policy: Policy::Standard,
            queue_capacity: crate::tree::DEFAULT_QUEUE_CAPACITY,
            schedule: Schedule::default(),
            validate_every: 0,
        }
    }

    pub fn workload(mut self, w: Workload) -> Self {
        self.insert_pct = w.insert_pct();
        self.delete_pct = 100 - w.insert_pct();
        self
    }

    pub fn size(mut self, size: u64) -> Self {
        self.size = size;
        self
    }

    pub fn ops(mut self, ops: u64) -> Self {
        self.ops = ops;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn validate_every(mut self, every: u64) -> Self {
        self.validate_every = every;
        self
    }

    pub fn tree_config(&self) -> Config {
        Config::new(self.b)
            .policy(self.policy)
            .queue_capacity(self.queue_capacity)
            .schedule(self.schedule)
    }

    pub fn validate(&self) -> Result<(), TrialError> {
        self.tree_config().validate()?;
        if self.insert_pct as u16 + self.delete_pct as u16 != 100 {
            return Err(TrialError::Percentages(self.insert_pct, self.delete_pct));
        }
        if self.size < 2 {
            return Err(TrialError::KeySpace(self.size));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Prefill,
    Measured,
    Cleanup,
}

#[derive(Debug, Error)]
pub enum TrialError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("insert and delete percentages must sum to 100 (got {0} and {1})")]
    Percentages(u8, u8),
    #[error("key space must hold at least two keys (got {0})")]
    KeySpace(u64),
    #[error("invariant failure in {phase:?} phase after update {index} (seed {seed})")]
    Invariant {
        phase: Phase,
        index: u64,
        seed: u64,
        report: Box<ViolationReport>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub steps: u64,
    pub count: u64,
}

/// Result of one bound inequality `lhs ≤ rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// `rhs - lhs`.
    pub margin: f64,
}

impl Inequality {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        Inequality {
            lhs,
            rhs,
            holds: lhs <= rhs,
            margin: rhs - lhs,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub policy: Policy,
    /// Step bound over the measured phase, starting from the prefilled tree.
    pub window: Option<Inequality>,
    /// Step bound over the whole lifetime, starting from the empty tree.
    pub lifetime: Option<Inequality>,
    /// Weighted step counts against `(b−1)i + d`.
    pub weighted: Option<Inequality>,
    pub one_child_vs_compress: Option<Inequality>,
    pub absorb_root_zero_vs_inserts: Option<Inequality>,
    pub root_replace_vs_compress: Option<Inequality>,
    /// Largest `Φ − ((b−1)i + d)` seen after any event; at most 0 when the
    /// potential bound held throughout.
    pub max_potential_excess: Option<i64>,
    pub pass: bool,
}

impl BoundCheck {
    fn empty(policy: Policy) -> Self {
        BoundCheck {
            policy,
            window: None,
            lifetime: None,
            weighted: None,
            one_child_vs_compress: None,
            absorb_root_zero_vs_inserts: None,
            root_replace_vs_compress: None,
            max_potential_excess: None,
            pass: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub config: TrialConfig,
    /// Keys after the prefill phase.
    pub initial_keys: u64,
    pub final_keys: u64,
    pub prefill_updates: u64,
    /// Successful insertions in the measured phase.
    pub inserts: u64,
    /// Successful deletions in the measured phase.
    pub deletes: u64,
    pub replacements: u64,
    pub failed_deletes: u64,
    pub steps: StepCounts,
    pub overflows: u64,
    /// Steps run by the closing cleanup of a batch trial.
    pub final_cleanup_steps: u64,
    pub steps_per_update: f64,
    pub histogram: Vec<HistogramBin>,
    pub height: usize,
    pub nodes: u64,
    pub total_degree: u64,
    pub average_degree: f64,
    pub words_per_key: f64,
    /// Worst-case words per key for a strict tree with `final_keys` keys.
    pub space_upper_ratio: Option<f64>,
    pub lifetime: TreeStats,
    pub max_potential_excess: Option<i64>,
    pub validations: u64,
    pub bounds: BoundCheck,
    pub wall_time_ms: f64,
}

impl TrialReport {
    /// The report with the wall time zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> TrialReport {
        TrialReport {
            wall_time_ms: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramStats {
    pub updates: u64,
    pub zero: f64,
    pub at_most_six: f64,
    pub under_ten: f64,
    pub max: u64,
}

pub fn histogram_stats(report: &TrialReport) -> HistogramStats {
    let total: u64 = report.histogram.iter().map(|b| b.count).sum();
    let share = |f: &dyn Fn(u64) -> bool| {
        if total == 0 {
            return 1.0;
        }
        let n: u64 = report.histogram.iter().filter(|b| f(b.steps)).map(|b| b.count).sum();
        n as f64 / total as f64
    };
    HistogramStats {
        updates: total,
        zero: share(&|s| s == 0),
        at_most_six: share(&|s| s <= 6),
        under_ten: share(&|s| s < 10),
        max: report.histogram.iter().map(|b| b.steps).max().unwrap_or(0),
    }
}

/// Largest `e` with `2·base^e ≤ m`, i.e. `⌊log_base(m/2)⌋`; −1 when `m < 2`.
fn floor_log_half(m: u64, base: u64) -> i64 {
    if m < 2 {
        return -1;
    }
    let mut e = 0;
    let mut p: u128 = 2 * base as u128;
    while p <= m as u128 {
        p *= base as u128;
        e += 1;
    }
    e
}

/// Step budget for `i` insertions and `d` deletions starting from a strict
/// tree with `n0` keys:
/// `2i(4 + 1.5⌊log_{⌊b/2⌋}((n0+i)/2)⌋) + 2d/(b−1)`.
pub fn standard_step_budget(b: usize, n0: u64, i: u64, d: u64) -> f64 {
    let ins = if i == 0 {
        0.0
    } else {
        let e = floor_log_half(n0 + i, (b / 2) as u64);
        2.0 * i as f64 * (4.0 + 1.5 * e as f64)
    };
    ins + 2.0 * d as f64 / (b as f64 - 1.0)
}

pub fn check_amortized_bound(report: &TrialReport, policy: Policy) -> BoundCheck {
    let b = report.config.b;
    let mut check = BoundCheck::empty(policy);
    let life = &report.lifetime;
    match policy {
        Policy::Standard | Policy::Batch => {
            let measured = report.steps.total() + report.final_cleanup_steps;
            let w = Inequality::new(
                measured as f64,
                standard_step_budget(b, report.initial_keys, report.inserts, report.deletes),
            );
            let l = Inequality::new(
                life.steps.total() as f64,
                standard_step_budget(b, 0, life.inserts, life.deletes),
            );
            check.pass = w.holds && l.holds;
            check.window = Some(w);
            check.lifetime = Some(l);
        }
        Policy::ConstRebalance => {
            let s = &life.steps;
            let (i, d) = (life.inserts as f64, life.deletes as f64);
            let weighted = (b as f64 - 1.0) * s.compress as f64
                + s.absorb as f64
                + s.split as f64
                + 2.0 * (s.root_zero + s.root_replace) as f64;
            let ineqs = [
                Inequality::new(weighted, (b as f64 - 1.0) * i + d),
                Inequality::new(s.one_child as f64, s.compress as f64),
                Inequality::new((s.absorb + s.root_zero) as f64, i),
                Inequality::new(s.root_replace as f64, s.compress as f64),
            ];
            check.pass = ineqs.iter().all(|q| q.holds) && report.max_potential_excess.is_none_or(|e| e <= 0);
            check.weighted = Some(ineqs[0]);
            check.one_child_vs_compress = Some(ineqs[1]);
            check.absorb_root_zero_vs_inserts = Some(ineqs[2]);
            check.root_replace_vs_compress = Some(ineqs[3]);
            check.max_potential_excess = report.max_potential_excess;
        }
    }
    check
}

/// Wall clock; reads zero where the platform has no clock (wasm32 without
/// host bindings).
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    fn start() -> Self {
        Stopwatch(std::time::Instant::now())
    }

    #[cfg(target_arch = "wasm32")]
    fn start() -> Self {
        Stopwatch()
    }

    #[cfg(not(target_arch = "wasm32"))]
    fn millis(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1000.0
    }

    #[cfg(target_arch = "wasm32")]
    fn millis(&self) -> f64 {
        0.0
    }
}

struct Runner {
    tree: Tree<u64, u64>,
    config: TrialConfig,
    track_potential: bool,
    max_excess: Option<i64>,
    validations: u64,
}

impl Runner {
    /// Applies one update; returns `(successful, steps)`.
    fn apply(&mut self, update: Update) -> (bool, u64) {
        let (ok, steps) = match update {
            Update::Insert(k) => {
                let out = self.tree.insert(k, k);
                (out.status == crate::tree::InsertStatus::Inserted, out.steps.total())
            }
            Update::Delete(k) => {
                let out = self.tree.delete(&k);
                (out.deleted, out.steps.total())
            }
        };
        self.audit_potential();
        (ok, steps)
    }

    fn audit_potential(&mut self) {
        if !self.track_potential {
            return;
        }
        let b = self.config.b as i64;
        for ev in self.tree.take_trace() {
            let bound = (b - 1) * ev.inserts as i64 + ev.deletes as i64;
            let excess = ev.potential - bound;
            self.max_excess = Some(self.max_excess.map_or(excess, |m| m.max(excess)));
        }
    }

    fn maybe_validate(&mut self, phase: Phase, index: u64) -> Result<(), TrialError> {
        let every = self.config.validate_every;
        if every == 0 || !(index + 1).is_multiple_of(every) {
            return Ok(());
        }
        self.validate(phase, index)
    }

    fn validate(&mut self, phase: Phase, index: u64) -> Result<(), TrialError> {
        let mode = if self.config.policy == Policy::Batch && phase != Phase::Cleanup {
            Mode::Relaxed
        } else {
            Mode::strict_for(self.config.policy)
        };
        self.validations += 1;
        let report = checker::validate(&self.tree, mode);
        if report.passes() {
            Ok(())
        } else {
            Err(TrialError::Invariant {
                phase,
                index,
                seed: self.config.seed,
                report: Box::new(report),
            })
        }
    }
}

/// Runs one trial. The prefill phase performs 50/50 updates until the key
/// count first reaches `⌊size/2⌋`, then `size` more; the tree is then fully
/// rebalanced and `ops` measured updates follow.
pub fn run_trial(config: &TrialConfig) -> Result<TrialReport, TrialError> {
    config.validate()?;
    let start = Stopwatch::start();
    let mut tree = Tree::new(config.tree_config())?;
    let track_potential = config.policy == Policy::ConstRebalance;
    if track_potential {
        tree.enable_trace();
    }
    let mut run = Runner {
        tree,
        config: *config,
        track_potential,
        max_excess: None,
        validations: 0,
    };
    let mut stream = UpdateStream::new(config.seed, config.size, 50);

    let target = (config.size / 2) as usize;
    let mut prefill = 0u64;
    while run.tree.len() < target {
        run.apply(stream.next_update());
        run.maybe_validate(Phase::Prefill, prefill)?;
        prefill += 1;
    }
    for _ in 0..config.size {
        run.apply(stream.next_update());
        run.maybe_validate(Phase::Prefill, prefill)?;
        prefill += 1;
    }
    if config.policy == Policy::Batch {
        run.tree.cleanup();
        run.audit_potential();
    }
    let initial_keys = run.tree.len() as u64;
    let before = *run.tree.stats();

    stream.set_insert_pct(config.insert_pct);
    let mut histogram: BTreeMap<u64, u64> = BTreeMap::new();
    let (mut inserts, mut deletes, mut failed_deletes) = (0u64, 0u64, 0u64);
    for index in 0..config.ops {
        let update = stream.next_update();
        let (ok, steps) = run.apply(update);
        match (update, ok) {
            (Update::Insert(_), true) => inserts += 1,
            (Update::Delete(_), true) => deletes += 1,
            (Update::Delete(_), false) => failed_deletes += 1,
            (Update::Insert(_), false) => {}
        }
        if ok {
            *histogram.entry(steps).or_default() += 1;
        }
        run.maybe_validate(Phase::Measured, index)?;
    }
    let after_ops = *run.tree.stats();
    let mut final_cleanup_steps = 0;
    if config.policy == Policy::Batch {
        final_cleanup_steps = run.tree.cleanup().total();
        run.audit_potential();
        if config.validate_every > 0 {
            run.validate(Phase::Cleanup, config.ops)?;
        }
    }

    let mut steps = after_ops.steps;
    sub_counts(&mut steps, &before.steps);
    let tree = &run.tree;
    let shape = checker::validate(tree, Mode::Relaxed);
    let final_keys = tree.len() as u64;
    let nodes = shape.node_count as u64;
    let successful = inserts + deletes;
    let mut report = TrialReport {
        config: *config,
        initial_keys,
        final_keys,
        prefill_updates: prefill,
        inserts,
        deletes,
        replacements: after_ops.replacements - before.replacements,
        failed_deletes,
        steps,
        overflows: after_ops.overflows - before.overflows,
        final_cleanup_steps,
        steps_per_update: if successful == 0 {
            0.0
        } else {
            (steps.total() + final_cleanup_steps) as f64 / successful as f64
        },
        histogram: histogram
            .into_iter()
            .map(|(steps, count)| HistogramBin { steps, count })
            .collect(),
        height: shape.height,
        nodes,
        total_degree: shape.total_degree,
        average_degree: shape.total_degree as f64 / nodes as f64,
        words_per_key: 2.0 * config.b as f64 * nodes as f64 / final_keys.max(1) as f64,
        space_upper_ratio: analysis::space_bounds(final_keys, config.b).ok().map(|s| s.upper_ratio),
        lifetime: *tree.stats(),
        max_potential_excess: run.max_excess,
        validations: run.validations,
        bounds: BoundCheck::empty(config.policy),
        wall_time_ms: 0.0,
    };
    report.bounds = check_amortized_bound(&report, config.policy);
    report.wall_time_ms = start.millis();
    Ok(report)
}

fn sub_counts(a: &mut StepCounts, b: &StepCounts) {
    a.root_zero -= b.root_zero;
    a.root_replace -= b.root_replace;
    a.absorb -= b.absorb;
    a.split -= b.split;
    a.compress -= b.compress;
    a.one_child -= b.one_child;
}

/// Runs independent trials on separate threads. Results keep the input order.
pub fn run_trials(configs: &[TrialConfig]) -> Vec<Result<TrialReport, TrialError>> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(configs.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut results: Vec<Option<Result<TrialReport, TrialError>>> = (0..configs.len()).map(|_| None).collect();
    let slots = std::sync::Mutex::new(&mut results);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= configs.len() {
                    break;
                }
                let r = run_trial(&configs[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results.into_iter().map(|r| r.expect("every trial ran")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_log_values() {
        assert_eq!(floor_log_half(1, 8), -1);
        assert_eq!(floor_log_half(2, 8), 0);
        assert_eq!(floor_log_half(15, 8), 0);
        assert_eq!(floor_log_half(16, 8), 1);
        assert_eq!(floor_log_half(128, 8), 2);
    }

    #[test]
    fn budget_with_no_updates_is_zero() {
        assert_eq!(standard_step_budget(16, 1000, 0, 0), 0.0);
    }

    #[test]
    fn budget_for_small_cases() {
        // n0 + i = 20, base 8: ⌊log_8 10⌋ = 1.
        assert_eq!(standard_step_budget(16, 10, 10, 0), 2.0 * 10.0 * 5.5);
        assert_eq!(standard_step_budget(16, 0, 0, 15), 2.0);
    }

    #[test]
    fn empty_histogram_stats() {
        let report = run_trial(&TrialConfig::new(8).size(64).ops(0)).unwrap();
        let s = histogram_stats(&report);
        assert_eq!(s.updates, 0);
        assert_eq!((s.zero, s.at_most_six, s.under_ten, s.max), (1.0, 1.0, 1.0, 0));
        assert_eq!(report.steps_per_update, 0.0);
        assert_eq!(report.initial_keys, report.final_keys);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = TrialConfig::new(8);
        c.insert_pct = 60;
        assert!(matches!(c.validate(), Err(TrialError::Percentages(60, 50))));
        assert!(matches!(TrialConfig::new(4).validate(), Err(TrialError::Config(_))));
        assert!(matches!(
            TrialConfig::new(8).size(1).validate(),
            Err(TrialError::KeySpace(1))
        ));
    }

    #[test]
    fn histogram_counts_successful_updates() {
        let r = run_trial(&TrialConfig::new(6).size(256).ops(2000).validate_every(1)).unwrap();
        let total: u64 = r.histogram.iter().map(|b| b.count).sum();
        assert_eq!(total, r.inserts + r.deletes);
        assert_eq!(r.validations, r.prefill_updates + 2000);
        assert!(r.bounds.pass);
    }
}
