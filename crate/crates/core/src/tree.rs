//! The leaf-oriented B-slack tree dictionary.
//!
//! Updates (insert, delete, overflow) only touch a single leaf and possibly
//! create violations. Violations are repaired by the rebalancing steps in
//! [`crate::steps`], driven by a bounded queue of suspect nodes.

use std::borrow::Borrow;
use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::node::{Arena, Links, Node, NodeId, NodeRef};

pub const DEFAULT_QUEUE_CAPACITY: usize = 64;

/// Rebalancing policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Policy {
    /// Children of each internal node share at most `b - 1` slack; cleanup
    /// runs after every update.
    #[serde(rename = "standard")]
    Standard,
    /// Children of a degree-`k` node share at most `b + k - 1` slack, and
    /// Compress leaves one unit of slack in every surviving child. Amortized
    /// constant rebalancing; cleanup runs after every update.
    #[serde(rename = "const")]
    ConstRebalance,
    /// Standard thresholds, but updates never rebalance. Violations
    /// accumulate until [`Tree::cleanup`] is called.
    #[serde(rename = "batch")]
    Batch,
}

impl Policy {
    pub fn slack_rule(self) -> SlackRule {
        match self {
            Policy::Standard | Policy::Batch => SlackRule::Standard,
            Policy::ConstRebalance => SlackRule::ConstRebalance,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Standard => "standard",
            Policy::ConstRebalance => "const",
            Policy::Batch => "batch",
        })
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Policy::Standard),
            "const" | "const-rebalance" => Ok(Policy::ConstRebalance),
            "batch" => Ok(Policy::Batch),
            other => Err(format!("unknown policy `{other}` (expected standard, const or batch)")),
        }
    }
}

/// Order in which queued suspect nodes are served.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Schedule {
    /// Deepest queued node first, oldest first among equal depths. Repairs
    /// below a node finish before the node itself is looked at again.
    #[default]
    #[serde(rename = "deepest")]
    DeepestFirst,
    /// Plain arrival order.
    #[serde(rename = "fifo")]
    Fifo,
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::DeepestFirst => "deepest",
            Schedule::Fifo => "fifo",
        })
    }
}

impl std::str::FromStr for Schedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "deepest" => Ok(Schedule::DeepestFirst),
            "fifo" => Ok(Schedule::Fifo),
            other => Err(format!("unknown schedule `{other}` (expected deepest or fifo)")),
        }
    }
}

/// Threshold that decides when the children of an internal node hold too
/// much slack, and how Compress sizes its output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlackRule {
    Standard,
    ConstRebalance,
}

impl SlackRule {
    /// `k` children with total degree `c`.
    pub fn is_violation(self, b: usize, k: usize, c: usize) -> bool {
        debug_assert!(c <= k * b);
        match self {
            // total slack k*b - c exceeds b - 1
            SlackRule::Standard => k * b - c > b - 1,
            // c <= (k-1)(b-1): the Compress trigger, one tighter than the
            // literal b+k-1 slack bound so that One-Child always applies at a
            // node whose parent is violation free.
            SlackRule::ConstRebalance => c <= (k - 1) * (b - 1),
        }
    }

    /// Number of children Compress keeps for `c` grandchild-level items.
    pub fn compress_target(self, b: usize, c: usize) -> usize {
        let per_node = match self {
            SlackRule::Standard => b,
            SlackRule::ConstRebalance => b - 1,
        };
        c.div_ceil(per_node).max(1)
    }

    pub fn one_child_applicable(self, b: usize, k: usize, c: usize) -> bool {
        match self {
            SlackRule::Standard => c > b * (k - 1),
            SlackRule::ConstRebalance => c > (k - 1) * (b - 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Config {
    pub b: usize,
    pub policy: Policy,
    pub queue_capacity: usize,
    pub schedule: Schedule,
}

impl Config {
    pub fn new(b: usize) -> Self {
        Config {
            b,
            policy: Policy::Standard,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            schedule: Schedule::default(),
        }
    }

    pub fn schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn queue_capacity(mut self, capacity: usize) -> Self {
        self.queue_capacity = capacity;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.b <= 4 {
            return Err(ConfigError::DegreeTooSmall(self.b));
        }
        if self.queue_capacity == 0 {
            return Err(ConfigError::ZeroQueueCapacity);
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("maximum degree b must be greater than 4 (got {0})")]
    DegreeTooSmall(usize),
    #[error("violation queue capacity must be positive")]
    ZeroQueueCapacity,
}

/// The six rebalancing steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StepKind {
    RootZero,
    RootReplace,
    Absorb,
    Split,
    Compress,
    OneChild,
}

impl StepKind {
    pub const ALL: [StepKind; 6] = [
        StepKind::RootZero,
        StepKind::RootReplace,
        StepKind::Absorb,
        StepKind::Split,
        StepKind::Compress,
        StepKind::OneChild,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StepKind::RootZero => "root-zero",
            StepKind::RootReplace => "root-replace",
            StepKind::Absorb => "absorb",
            StepKind::Split => "split",
            StepKind::Compress => "compress",
            StepKind::OneChild => "one-child",
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A rebalancing step and the node it targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RebalanceStep {
    pub kind: StepKind,
    pub target: NodeId,
}

/// Per-kind rebalancing step counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounts {
    pub root_zero: u64,
    pub root_replace: u64,
    pub absorb: u64,
    pub split: u64,
    pub compress: u64,
    pub one_child: u64,
}

impl StepCounts {
    pub fn add(&mut self, kind: StepKind) {
        *self.slot(kind) += 1;
    }

    pub fn get(&self, kind: StepKind) -> u64 {
        match kind {
            StepKind::RootZero => self.root_zero,
            StepKind::RootReplace => self.root_replace,
            StepKind::Absorb => self.absorb,
            StepKind::Split => self.split,
            StepKind::Compress => self.compress,
            StepKind::OneChild => self.one_child,
        }
    }

    fn slot(&mut self, kind: StepKind) -> &mut u64 {
        match kind {
            StepKind::RootZero => &mut self.root_zero,
            StepKind::RootReplace => &mut self.root_replace,
            StepKind::Absorb => &mut self.absorb,
            StepKind::Split => &mut self.split,
            StepKind::Compress => &mut self.compress,
            StepKind::OneChild => &mut self.one_child,
        }
    }

    /// Total number of rebalancing steps. Overflow is part of an insertion
    /// and is not counted here.
    pub fn total(&self) -> u64 {
        StepKind::ALL.iter().map(|&k| self.get(k)).sum()
    }
}

impl std::ops::AddAssign for StepCounts {
    fn add_assign(&mut self, rhs: StepCounts) {
        for kind in StepKind::ALL {
            *self.slot(kind) += rhs.get(kind);
        }
    }
}

/// Lifetime counters of a tree.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    /// Insertions of a key that was not present.
    pub inserts: u64,
    /// Insertions that replaced the data of an existing key.
    pub replacements: u64,
    /// Deletions of a key that was present.
    pub deletes: u64,
    pub overflows: u64,
    pub steps: StepCounts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Insert,
    Overflow,
    Delete,
    Step(StepKind),
}

/// One structural event, with the tree's potential and weight-one slack
/// right after it. Recorded only while tracing is enabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub kind: EventKind,
    pub potential: i64,
    pub weight1_slack: i64,
    pub inserts: u64,
    pub deletes: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InsertStatus {
    Inserted,
    Replaced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InsertOutcome {
    pub status: InsertStatus,
    pub overflowed: bool,
    pub steps: StepCounts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeleteOutcome {
    pub deleted: bool,
    pub steps: StepCounts,
}

/// Nested description of a tree, used to build fixtures and overslack trees.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape<K, V> {
    Leaf(Vec<(K, V)>),
    Internal {
        weight: u8,
        keys: Vec<K>,
        children: Vec<Shape<K, V>>,
    },
}

pub struct Tree<K, V> {
    pub(crate) arena: Arena<K, V>,
    pub(crate) root: NodeId,
    pub(crate) config: Config,
    pub(crate) queue: VecDeque<NodeId>,
    /// Set when a queue entry was dropped; the next time the queue drains
    /// the whole tree is swept for violations.
    pub(crate) needs_sweep: bool,
    len: usize,
    pub(crate) stats: TreeStats,
    pub(crate) potential: i64,
    pub(crate) weight1_slack: i64,
    trace: Option<Vec<TraceEvent>>,
}

impl<K: Ord + Clone, V> Tree<K, V> {
    pub fn new(config: Config) -> Result<Self, ConfigError> {
        Self::from_shape(config, Shape::Leaf(Vec::new()))
    }

    /// Builds a tree with exactly the given shape. Leaves get weight one.
    /// The shape is not checked; run the checker if it matters. Any
    /// violations it contains are found by the next cleanup.
    pub fn from_shape(config: Config, shape: Shape<K, V>) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut arena = Arena::new();
        let mut len = 0;
        let root = Self::build(&mut arena, shape, None, &mut len);
        let mut tree = Tree {
            arena,
            root,
            config,
            queue: VecDeque::with_capacity(config.queue_capacity),
            needs_sweep: true,
            len,
            stats: TreeStats::default(),
            potential: 0,
            weight1_slack: 0,
            trace: None,
        };
        let all = tree.node_ids();
        let (phi, slack) = tree.measure(&all);
        tree.potential = phi;
        tree.weight1_slack = slack;
        Ok(tree)
    }

    fn build(arena: &mut Arena<K, V>, shape: Shape<K, V>, parent: Option<NodeId>, len: &mut usize) -> NodeId {
        match shape {
            Shape::Leaf(entries) => {
                *len += entries.len();
                let (keys, values) = entries.into_iter().unzip();
                let mut node = Node::leaf(keys, values);
                node.parent = parent;
                arena.alloc(node)
            }
            Shape::Internal { weight, keys, children } => {
                let mut node = Node::internal(weight, keys, Vec::new());
                node.parent = parent;
                let id = arena.alloc(node);
                let ids: Vec<NodeId> = children
                    .into_iter()
                    .map(|c| Self::build(arena, c, Some(id), len))
                    .collect();
                *arena[id].children_mut() = ids;
                id
            }
        }
    }

    pub fn config(&self) -> Config {
        self.config
    }

    pub fn b(&self) -> usize {
        self.config.b
    }

    pub fn policy(&self) -> Policy {
        self.config.policy
    }

    pub fn slack_rule(&self) -> SlackRule {
        self.config.policy.slack_rule()
    }

    /// Number of keys stored.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> Option<NodeRef<'_, K, V>> {
        self.arena.get(id).map(|node| NodeRef { id, node })
    }

    pub fn node_count(&self) -> usize {
        self.arena.live()
    }

    pub fn stats(&self) -> &TreeStats {
        &self.stats
    }

    /// Potential of the tree: the sum over nodes of `b - deg` for non-full
    /// weight-one nodes and `b` for full or weight-zero nodes. Maintained
    /// incrementally.
    pub fn potential(&self) -> i64 {
        self.potential
    }

    /// Total slack over weight-one nodes. Maintained incrementally.
    pub fn weight1_slack(&self) -> i64 {
        self.weight1_slack
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Number of pending queue entries (some may be stale).
    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn get<Q>(&self, key: &Q) -> Option<&V>
    where
        K: Borrow<Q>,
        Q: Ord + ?Sized,
    {
        let leaf = &self.arena[self.find_leaf(key)];
        leaf.keys
            .binary_search_by(|k| k.borrow().cmp(key))
            .ok()
            .map(|i| &leaf.values()[i])
    }

    pub fn contains_key<Q>(&self, key: &Q) -> bool
    where
        K: Borrow<Q>,
        Q: Ord + ?Sized,
    {
        self.get(key).is_some()
    }

    pub(crate) fn find_leaf<Q>(&self, key: &Q) -> NodeId
    where
        K: Borrow<Q>,
        Q: Ord + ?Sized,
    {
        let mut id = self.root;
        loop {
            let node = &self.arena[id];
            match &node.links {
                Links::Leaf(_) => return id,
                Links::Internal(children) => {
                    // keys >= separator go right
                    let i = node.keys.partition_point(|k| k.borrow() <= key);
                    id = children[i];
                }
            }
        }
    }

    /// Inserts `key`, replacing its data if present. Rebalances unless the
    /// policy is [`Policy::Batch`].
    pub fn insert(&mut self, key: K, value: V) -> InsertOutcome {
        let mut outcome = self.insert_deferred(key, value);
        if self.config.policy != Policy::Batch {
            outcome.steps = self.cleanup();
        }
        outcome
    }

    /// Deletes `key` if present. Rebalances unless the policy is
    /// [`Policy::Batch`].
    pub fn delete<Q>(&mut self, key: &Q) -> DeleteOutcome
    where
        K: Borrow<Q>,
        Q: Ord + ?Sized,
    {
        let mut outcome = self.delete_deferred(key);
        if self.config.policy != Policy::Batch {
            outcome.steps = self.cleanup();
        }
        outcome
    }

    /// Insert or Overflow without any rebalancing. Violations created are
    /// queued for the next [`Tree::step`] or [`Tree::cleanup`].
    pub fn insert_deferred(&mut self, key: K, value: V) -> InsertOutcome {
        let b = self.b();
        let leaf = self.find_leaf(&key);
        let node = &mut self.arena[leaf];
        let pos = match node.keys.binary_search(&key) {
            Ok(i) => {
                if let Links::Leaf(values) = &mut node.links {
                    values[i] = value;
                }
                self.stats.replacements += 1;
                return InsertOutcome {
                    status: InsertStatus::Replaced,
                    overflowed: false,
                    steps: StepCounts::default(),
                };
            }
            Err(pos) => pos,
        };
        self.len += 1;
        self.stats.inserts += 1;
        let overflowed = node.keys.len() >= b;
        if overflowed {
            self.overflow(leaf, pos, key, value);
        } else {
            let before = self.measure(&[leaf]);
            let node = &mut self.arena[leaf];
            node.keys.insert(pos, key);
            if let Links::Leaf(values) = &mut node.links {
                values.insert(pos, value);
            }
            self.settle(before, &[leaf]);
            self.record(EventKind::Insert);
        }
        InsertOutcome {
            status: InsertStatus::Inserted,
            overflowed,
            steps: StepCounts::default(),
        }
    }

    /// Replaces the full leaf `leaf` by a weight-zero internal node over two
    /// leaves sharing the `b + 1` keys (left gets the larger half).
    fn overflow(&mut self, leaf: NodeId, pos: usize, key: K, value: V) {
        let b = self.b();
        let before = self.measure(&[leaf]);
        let node = &mut self.arena[leaf];
        node.keys.insert(pos, key);
        let Links::Leaf(values) = &mut node.links else {
            unreachable!()
        };
        values.insert(pos, value);
        let left = (b + 1).div_ceil(2);
        let right_values = values.split_off(left);
        let right_keys = node.keys.split_off(left);
        let parent = node.parent;
        let separator = right_keys[0].clone();

        let right = self.arena.alloc(Node::leaf(right_keys, right_values));
        let mut top = Node::internal(0, vec![separator], vec![leaf, right]);
        top.parent = parent;
        let top = self.arena.alloc(top);
        self.arena[leaf].parent = Some(top);
        self.arena[right].parent = Some(top);
        self.replace_child(parent, leaf, top);

        self.settle(before, &[leaf, right, top]);
        self.stats.overflows += 1;
        self.record(EventKind::Overflow);
        self.touch(top);
    }

    pub fn delete_deferred<Q>(&mut self, key: &Q) -> DeleteOutcome
    where
        K: Borrow<Q>,
        Q: Ord + ?Sized,
    {
        let leaf = self.find_leaf(key);
        let Ok(i) = self.arena[leaf].keys.binary_search_by(|k| k.borrow().cmp(key)) else {
            return DeleteOutcome {
                deleted: false,
                steps: StepCounts::default(),
            };
        };
        let before = self.measure(&[leaf]);
        let node = &mut self.arena[leaf];
        node.keys.remove(i);
        if let Links::Leaf(values) = &mut node.links {
            values.remove(i);
        }
        self.settle(before, &[leaf]);
        self.len -= 1;
        self.stats.deletes += 1;
        self.record(EventKind::Delete);
        self.touch(leaf);
        DeleteOutcome {
            deleted: true,
            steps: StepCounts::default(),
        }
    }

    /// In-order iterator over `(key, data)` pairs.
    pub fn iter(&self) -> Iter<'_, K, V> {
        Iter {
            tree: self,
            stack: vec![self.root],
            leaf: None,
            pos: 0,
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> + '_ {
        self.iter().map(|(k, _)| k)
    }

    /// All live node handles, in breadth-first order.
    pub fn node_ids(&self) -> Vec<NodeId> {
        let mut out = vec![self.root];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(self.arena[out[i]].children());
            i += 1;
        }
        out
    }

    /// Length of the root-to-leaf path along the leftmost spine.
    pub fn height(&self) -> usize {
        let mut h = 0;
        let mut id = self.root;
        while let Some(&c) = self.arena[id].children().first() {
            id = c;
            h += 1;
        }
        h
    }

    // ---- accounting helpers shared with the rebalancing steps ----

    pub(crate) fn phi_of(&self, node: &Node<K, V>) -> i64 {
        let b = self.b();
        let deg = node.degree();
        if node.weight == 1 && deg < b {
            (b - deg) as i64
        } else {
            b as i64
        }
    }

    /// Potential and weight-one slack summed over the live nodes in `ids`.
    pub(crate) fn measure(&self, ids: &[NodeId]) -> (i64, i64) {
        let b = self.b() as i64;
        ids.iter()
            .filter_map(|&id| self.arena.get(id))
            .fold((0, 0), |(phi, slack), node| {
                let s = if node.weight == 1 { b - node.degree() as i64 } else { 0 };
                (phi + self.phi_of(node), slack + s)
            })
    }

    /// Applies the change between `before` and the current measure of
    /// `after` to the running totals.
    pub(crate) fn settle(&mut self, before: (i64, i64), after: &[NodeId]) {
        let (phi, slack) = self.measure(after);
        self.potential += phi - before.0;
        self.weight1_slack += slack - before.1;
    }

    pub(crate) fn record(&mut self, kind: EventKind) {
        if let Some(trace) = &mut self.trace {
            trace.push(TraceEvent {
                kind,
                potential: self.potential,
                weight1_slack: self.weight1_slack,
                inserts: self.stats.inserts,
                deletes: self.stats.deletes,
            });
        }
    }

    pub(crate) fn replace_child(&mut self, parent: Option<NodeId>, old: NodeId, new: NodeId) {
        match parent {
            None => self.root = new,
            Some(p) => {
                let children = self.arena[p].children_mut();
                let slot = children.iter_mut().find(|c| **c == old).expect("child not found");
                *slot = new;
            }
        }
    }

    /// Queues `id` (if internal) and its parent: the only nodes whose
    /// violation status can change when `id` changes.
    pub(crate) fn touch(&mut self, id: NodeId) {
        let node = &self.arena[id];
        let parent = node.parent;
        if !node.is_leaf() {
            self.enqueue(id);
        }
        if let Some(p) = parent {
            self.enqueue(p);
        }
    }

    pub(crate) fn enqueue(&mut self, id: NodeId) {
        if self.queue.contains(&id) {
            return;
        }
        if self.queue.len() >= self.config.queue_capacity {
            self.needs_sweep = true;
        } else {
            self.queue.push_back(id);
        }
    }
}

impl<K: Ord + Clone + fmt::Debug, V> fmt::Debug for Tree<K, V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tree")
            .field("config", &self.config)
            .field("len", &self.len)
            .field("nodes", &self.node_count())
            .finish()
    }
}

pub struct Iter<'a, K, V> {
    tree: &'a Tree<K, V>,
    stack: Vec<NodeId>,
    leaf: Option<&'a Node<K, V>>,
    pos: usize,
}

impl<'a, K, V> Iterator for Iter<'a, K, V> {
    type Item = (&'a K, &'a V);

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(leaf) = self.leaf {
                if self.pos < leaf.keys.len() {
                    self.pos += 1;
                    return Some((&leaf.keys[self.pos - 1], &leaf.values()[self.pos - 1]));
                }
                self.leaf = None;
            }
            let id = self.stack.pop()?;
            let node = &self.tree.arena[id];
            match &node.links {
                Links::Leaf(_) => {
                    self.leaf = Some(node);
                    self.pos = 0;
                }
                Links::Internal(children) => self.stack.extend(children.iter().rev()),
            }
        }
    }
}
