//! Browser bindings for the B-slack tree playground.
//!
//! Every function returns JSON text so the page stays framework free and
//! the same code runs in native tests.

use bslack::analysis::{self, OverslackParams};
use bslack::checker::{validate, Mode, ViolationKind};
use bslack::harness::{self, TrialConfig};
use bslack::rng::{Update, UpdateStream};
use bslack::{Config, NodeId, Policy, Tree};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct NodeView {
    depth: usize,
    weight: u8,
    leaf: bool,
    keys: Vec<u64>,
    violations: Vec<&'static str>,
}

#[derive(Serialize)]
struct TreeView {
    b: usize,
    policy: String,
    keys: usize,
    height: usize,
    nodes: usize,
    average_degree: f64,
    words_per_key: f64,
    potential: i64,
    pending: usize,
    strict: bool,
    last_step: Option<&'static str>,
    steps: bslack::StepCounts,
    rows: Vec<NodeView>,
}

fn violation_name(kind: ViolationKind) -> &'static str {
    match kind {
        ViolationKind::Weight => "weight",
        ViolationKind::Slack => "slack",
        ViolationKind::Degree => "degree",
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

fn error_json(message: impl std::fmt::Display) -> String {
    to_json(&serde_json::json!({ "error": message.to_string() }))
}

/// An interactive tree. Updates can rebalance immediately or leave their
/// violations in place to be repaired one step at a time.
#[wasm_bindgen]
pub struct Playground {
    tree: Tree<u64, ()>,
    deferred: bool,
    last_step: Option<&'static str>,
}

#[wasm_bindgen]
impl Playground {
    /// `policy` is `standard`, `const` or `batch`.
    #[wasm_bindgen(constructor)]
    pub fn new(b: usize, policy: &str) -> Result<Playground, String> {
        let policy: Policy = policy.parse()?;
        let tree = Tree::new(Config::new(b).policy(policy)).map_err(|e| e.to_string())?;
        Ok(Playground {
            tree,
            deferred: false,
            last_step: None,
        })
    }

    /// When set, updates skip rebalancing until `step` or `cleanup`.
    pub fn set_deferred(&mut self, deferred: bool) {
        self.deferred = deferred;
    }

    pub fn insert(&mut self, key: u32) -> String {
        self.last_step = None;
        if self.deferred {
            self.tree.insert_deferred(key.into(), ());
        } else {
            self.tree.insert(key.into(), ());
        }
        self.view()
    }

    pub fn delete(&mut self, key: u32) -> String {
        self.last_step = None;
        if self.deferred {
            self.tree.delete_deferred(&key.into());
        } else {
            self.tree.delete(&key.into());
        }
        self.view()
    }

    /// Applies `count` random updates with keys in `[0, range)`. Integer
    /// arguments are `u32` so that JavaScript passes plain numbers.
    pub fn random(&mut self, count: u32, range: u32, insert_pct: u8, seed: u32) -> String {
        self.last_step = None;
        let mut stream = UpdateStream::new(seed.into(), range.max(1).into(), insert_pct.min(100));
        for _ in 0..count {
            match (stream.next_update(), self.deferred) {
                (Update::Insert(k), false) => drop(self.tree.insert(k, ())),
                (Update::Insert(k), true) => drop(self.tree.insert_deferred(k, ())),
                (Update::Delete(k), false) => drop(self.tree.delete(&k)),
                (Update::Delete(k), true) => drop(self.tree.delete_deferred(&k)),
            }
        }
        self.view()
    }

    /// Performs a single rebalancing step, if one is pending.
    pub fn step(&mut self) -> String {
        self.last_step = self.tree.step().map(|k| k.name());
        self.view()
    }

    pub fn cleanup(&mut self) -> String {
        self.tree.cleanup();
        self.last_step = None;
        self.view()
    }

    pub fn dump(&self) -> String {
        self.tree.dump()
    }

    /// Current shape, per-node violations and summary figures.
    pub fn view(&self) -> String {
        let t = &self.tree;
        let report = validate(t, Mode::strict_for(t.policy()));
        let mut rows = Vec::new();
        let mut stack: Vec<(NodeId, usize)> = vec![(t.root(), 0)];
        while let Some((id, depth)) = stack.pop() {
            let node = t.node(id).expect("reachable node");
            let violations = report
                .violations
                .iter()
                .filter(|v| v.node == id)
                .map(|v| violation_name(v.kind))
                .collect();
            rows.push(NodeView {
                depth,
                weight: node.weight(),
                leaf: node.is_leaf(),
                keys: node.keys().to_vec(),
                violations,
            });
            stack.extend(node.children().iter().rev().map(|&c| (c, depth + 1)));
        }
        let view = TreeView {
            b: t.b(),
            policy: t.policy().to_string(),
            keys: t.len(),
            height: report.height,
            nodes: report.node_count,
            average_degree: report.average_degree(),
            words_per_key: if t.is_empty() {
                0.0
            } else {
                2.0 * t.b() as f64 * report.node_count as f64 / t.len() as f64
            },
            potential: t.potential(),
            pending: t.pending(),
            strict: report.is_strict(),
            last_step: self.last_step,
            steps: t.stats().steps,
            rows,
        };
        to_json(&view)
    }
}

/// Worst-case space table for a comma-separated list of `b` values.
#[wasm_bindgen]
pub fn space_table(bs: &str, min_keys: u32) -> String {
    let parsed: Result<Vec<usize>, _> = bs.split(',').map(|s| s.trim().parse::<usize>()).collect();
    let Ok(bs) = parsed else {
        return error_json(format!("cannot parse degree list `{bs}`"));
    };
    match analysis::space_table(&bs, min_keys.into()) {
        Ok(rows) => to_json(&rows),
        Err(e) => error_json(e),
    }
}

/// Exact quantities of the sparsest relaxed tree for `b`, root degree `k`
/// and height `h`.
#[wasm_bindgen]
pub fn overslack(b: usize, k: usize, h: usize) -> String {
    match OverslackParams::new(b, k, h).and_then(analysis::bound_report) {
        Ok(r) => to_json(&r),
        Err(e) => error_json(e),
    }
}

/// A small randomized trial; the report includes the per-update step
/// histogram.
#[wasm_bindgen]
pub fn trial(b: usize, size: u32, ops: u32, insert_pct: u8, seed: u32, policy: &str) -> String {
    let policy: Policy = match policy.parse() {
        Ok(p) => p,
        Err(e) => return error_json(e),
    };
    let mut config = TrialConfig::new(b)
        .size(size.into())
        .ops(ops.into())
        .seed(seed.into())
        .policy(policy);
    config.insert_pct = insert_pct;
    config.delete_pct = 100u8.saturating_sub(insert_pct);
    match harness::run_trial(&config) {
        Ok(r) => to_json(&r),
        Err(e) => error_json(e),
    }
}
