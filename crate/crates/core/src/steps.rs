//! Rebalancing steps and the cleanup scheduler.
//!
//! Each `step_*` method checks its own preconditions and returns
//! [`StepError::NotApplicable`] when they fail, leaving the tree untouched.
//! The scheduler ([`Tree::step`]) takes suspect nodes off the violation
//! queue in [`Schedule`] order and walks from each to the step that must run
//! first.

use std::mem;

use thiserror::Error;

use crate::node::{Links, Node, NodeId};
use crate::tree::{EventKind, Schedule, StepCounts, StepKind, Tree};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum StepError {
    #[error("{step} not applicable: {reason}")]
    NotApplicable { step: StepKind, reason: &'static str },
}

fn not_applicable(step: StepKind, reason: &'static str) -> StepError {
    StepError::NotApplicable { step, reason }
}

/// Sizes of `m` left-to-right runs sharing `c` items as evenly as possible;
/// the first `c mod m` runs get one extra item.
pub fn even_split(c: usize, m: usize) -> Vec<usize> {
    assert!(m > 0);
    let (q, r) = (c / m, c % m);
    (0..m).map(|i| if i < r { q + 1 } else { q }).collect()
}

impl<K: Ord + Clone, V> Tree<K, V> {
    fn children_of(&self, id: NodeId) -> &[NodeId] {
        self.arena[id].children()
    }

    fn child_degree_total(&self, id: NodeId) -> usize {
        self.children_of(id).iter().map(|&c| self.arena[c].degree()).sum()
    }

    pub(crate) fn has_slack_violation(&self, id: NodeId) -> bool {
        let node = &self.arena[id];
        if node.is_leaf() {
            return false;
        }
        let k = node.degree();
        self.slack_rule().is_violation(self.b(), k, self.child_degree_total(id))
    }

    pub(crate) fn has_violation(&self, id: NodeId) -> bool {
        let node = &self.arena[id];
        node.weight == 0 || (!node.is_leaf() && (node.degree() == 1 || self.has_slack_violation(id)))
    }

    fn any_weight_zero_child(&self, id: NodeId) -> Option<NodeId> {
        self.children_of(id)
            .iter()
            .copied()
            .find(|&c| self.arena[c].weight == 0)
    }

    /// The step that must run to make progress on the violation at `start`,
    /// following the precedence rules: weight violations first (topmost on
    /// the path), Root-Replace before Root-Zero, a violating parent before
    /// One-Child, weight-zero children before Compress.
    pub fn plan(&self, start: NodeId) -> Option<crate::tree::RebalanceStep> {
        use crate::tree::RebalanceStep;
        let b = self.b();
        let mut u = start;
        loop {
            let node = self.arena.get(u)?;
            let found = |kind| Some(RebalanceStep { kind, target: u });
            if node.weight == 0 {
                let Some(p) = node.parent else {
                    return if node.degree() == 1 {
                        found(StepKind::RootReplace)
                    } else {
                        found(StepKind::RootZero)
                    };
                };
                let parent = &self.arena[p];
                if parent.weight == 0 || (parent.parent.is_none() && parent.degree() == 1) {
                    u = p;
                    continue;
                }
                return if parent.degree() < b {
                    found(StepKind::Absorb)
                } else {
                    found(StepKind::Split)
                };
            }
            if node.is_leaf() {
                return None;
            }
            if node.degree() == 1 {
                let Some(p) = node.parent else {
                    return found(StepKind::RootReplace);
                };
                let parent = &self.arena[p];
                if parent.weight == 0 || parent.degree() == 1 || self.has_slack_violation(p) {
                    u = p;
                    continue;
                }
                if let Some(s) = self.any_weight_zero_child(p) {
                    u = s;
                    continue;
                }
                return found(StepKind::OneChild);
            }
            if self.has_slack_violation(u) {
                if let Some(c) = self.any_weight_zero_child(u) {
                    u = c;
                    continue;
                }
                return found(StepKind::Compress);
            }
            return None;
        }
    }

    /// Performs one rebalancing step, if any violation is pending. Queue
    /// entries without a violation are discarded. When the queue runs dry
    /// after having dropped entries, the tree is swept and the queue
    /// repopulated.
    pub fn step(&mut self) -> Option<StepKind> {
        loop {
            let next = match self.config.schedule {
                Schedule::DeepestFirst => self.pop_deepest(),
                Schedule::Fifo => self.queue.pop_front(),
            };
            let Some(id) = next else {
                if !self.needs_sweep {
                    return None;
                }
                self.needs_sweep = false;
                self.sweep();
                if self.queue.is_empty() && !self.needs_sweep {
                    return None;
                }
                continue;
            };
            let Some(step) = self.plan(id) else { continue };
            self.apply(step.kind, step.target)
                .unwrap_or_else(|e| panic!("scheduler chose an inapplicable step: {e}"));
            if step.target != id && self.arena.contains(id) {
                self.enqueue(id);
            }
            return Some(step.kind);
        }
    }

    /// Depth of `id`, or zero for a stale entry.
    fn depth_of(&self, id: NodeId) -> usize {
        let mut d = 0;
        let mut u = id;
        while let Some(p) = self.arena.get(u).and_then(|n| n.parent) {
            d += 1;
            u = p;
        }
        d
    }

    fn pop_deepest(&mut self) -> Option<NodeId> {
        // max_by_key keeps the last maximum, so scan newest to oldest
        let i = (0..self.queue.len())
            .rev()
            .max_by_key(|&i| self.depth_of(self.queue[i]))?;
        self.queue.remove(i)
    }

    /// Runs rebalancing steps until the tree has no violations.
    pub fn cleanup(&mut self) -> StepCounts {
        let mut counts = StepCounts::default();
        while let Some(kind) = self.step() {
            counts.add(kind);
        }
        counts
    }

    /// Queues every node that currently has a violation, top-down.
    fn sweep(&mut self) {
        for id in self.node_ids() {
            if self.has_violation(id) {
                self.enqueue(id);
            }
        }
    }

    /// Applies a step of the given kind at `target` (ignored for the two
    /// root steps).
    pub fn apply(&mut self, kind: StepKind, target: NodeId) -> Result<(), StepError> {
        match kind {
            StepKind::RootZero => self.step_root_zero(),
            StepKind::RootReplace => self.step_root_replace(),
            StepKind::Absorb => self.step_absorb(target),
            StepKind::Split => self.step_split(target),
            StepKind::Compress => self.step_compress(target).map(|_| ()),
            StepKind::OneChild => self.step_one_child(target),
        }
    }

    fn finish_step(&mut self, kind: StepKind) {
        self.stats.steps.add(kind);
        self.record(EventKind::Step(kind));
    }

    /// Sets the weight of a weight-zero root to one.
    pub fn step_root_zero(&mut self) -> Result<(), StepError> {
        const K: StepKind = StepKind::RootZero;
        let root = self.root;
        let node = &self.arena[root];
        if node.weight != 0 {
            return Err(not_applicable(K, "root has weight one"));
        }
        if !node.is_leaf() && node.degree() == 1 {
            return Err(not_applicable(K, "degree violation at the root takes precedence"));
        }
        let before = self.measure(&[root]);
        self.arena[root].weight = 1;
        self.settle(before, &[root]);
        self.finish_step(K);
        self.touch(root);
        Ok(())
    }

    /// Replaces a degree-one root by its only child, which gets weight one.
    pub fn step_root_replace(&mut self) -> Result<(), StepError> {
        const K: StepKind = StepKind::RootReplace;
        let root = self.root;
        let node = &self.arena[root];
        if node.is_leaf() || node.degree() != 1 {
            return Err(not_applicable(K, "root does not have exactly one child"));
        }
        let child = node.children()[0];
        let before = self.measure(&[root, child]);
        self.arena.free(root);
        let c = &mut self.arena[child];
        c.parent = None;
        c.weight = 1;
        self.root = child;
        self.settle(before, &[child]);
        self.finish_step(K);
        self.touch(child);
        Ok(())
    }

    /// Moves the two links of weight-zero `u` into its non-full parent.
    pub fn step_absorb(&mut self, u: NodeId) -> Result<(), StepError> {
        const K: StepKind = StepKind::Absorb;
        let p = self.weight_zero_parent(K, u)?;
        let parent = &self.arena[p];
        if parent.weight != 1 {
            return Err(not_applicable(K, "parent has weight zero"));
        }
        if parent.degree() >= self.b() {
            return Err(not_applicable(K, "parent is full"));
        }
        let i = self.position(p, u);
        let before = self.measure(&[u, p]);
        let gone = self.arena.free(u);
        let Links::Internal(grandchildren) = gone.links else {
            unreachable!()
        };
        for &g in &grandchildren {
            self.arena[g].parent = Some(p);
        }
        let parent = &mut self.arena[p];
        parent.keys.splice(i..i, gone.keys);
        parent.children_mut().splice(i..=i, grandchildren);
        self.settle(before, &[p]);
        self.finish_step(K);
        self.touch(p);
        Ok(())
    }

    /// Splits a full parent of weight-zero `u`: the `b + 1` links of `u` and
    /// its parent are shared between `u` and a new node `v`; the parent keeps
    /// `u` and `v` and takes over the weight-zero.
    pub fn step_split(&mut self, u: NodeId) -> Result<(), StepError> {
        const K: StepKind = StepKind::Split;
        let b = self.b();
        let p = self.weight_zero_parent(K, u)?;
        if self.arena[p].degree() != b {
            return Err(not_applicable(K, "parent is not full"));
        }
        let i = self.position(p, u);
        let before = self.measure(&[u, p]);

        let parent = &mut self.arena[p];
        let mut items = mem::take(parent.children_mut());
        let mut keys = mem::take(&mut parent.keys);
        let child = &mut self.arena[u];
        let u_items = mem::take(child.children_mut());
        let u_keys = mem::take(&mut child.keys);
        items.splice(i..=i, u_items);
        keys.splice(i..i, u_keys);
        debug_assert_eq!(items.len(), b + 1);
        debug_assert_eq!(keys.len(), b);

        let left = (b + 1).div_ceil(2);
        let right_items = items.split_off(left);
        let right_keys = keys.split_off(left);
        let up = keys.pop().expect("split separator");

        let mut right = Node::internal(1, right_keys, right_items);
        right.parent = Some(p);
        let v = self.arena.alloc(right);
        let child = &mut self.arena[u];
        child.weight = 1;
        child.keys = keys;
        *child.children_mut() = items;
        self.reparent(u);
        self.reparent(v);
        let parent = &mut self.arena[p];
        parent.weight = 0;
        parent.keys = vec![up];
        *parent.children_mut() = vec![u, v];

        self.settle(before, &[u, v, p]);
        self.finish_step(K);
        self.touch(p);
        self.touch(u);
        self.touch(v);
        Ok(())
    }

    /// Redistributes the children's contents of `u` over as few children as
    /// the slack rule allows and discards the rest. Returns the number of
    /// children removed.
    pub fn step_compress(&mut self, u: NodeId) -> Result<usize, StepError> {
        const K: StepKind = StepKind::Compress;
        let node = self.arena.get(u).ok_or(not_applicable(K, "stale node"))?;
        if node.is_leaf() {
            return Err(not_applicable(K, "target is a leaf"));
        }
        if node.weight == 0 {
            return Err(not_applicable(K, "weight violation at target"));
        }
        if node.degree() < 2 {
            return Err(not_applicable(K, "degree violation at target"));
        }
        if !self.has_slack_violation(u) {
            return Err(not_applicable(K, "no slack violation"));
        }
        if self.any_weight_zero_child(u).is_some() {
            return Err(not_applicable(K, "weight violation at a child"));
        }
        if !self.uniform_children(u) {
            return Err(not_applicable(K, "children mix leaves and internal nodes"));
        }
        let c = self.child_degree_total(u);
        let m = self.slack_rule().compress_target(self.b(), c);
        let mut involved = vec![u];
        involved.extend_from_slice(self.children_of(u));
        let before = self.measure(&involved);
        let removed = self.redistribute(u, m);
        involved.truncate(1 + m);
        self.settle(before, &involved);
        self.finish_step(K);
        for &c in &involved {
            self.touch(c);
        }
        Ok(removed)
    }

    /// Evenly redistributes the contents of all children of the parent of
    /// the degree-one node `u`.
    pub fn step_one_child(&mut self, u: NodeId) -> Result<(), StepError> {
        const K: StepKind = StepKind::OneChild;
        let node = self.arena.get(u).ok_or(not_applicable(K, "stale node"))?;
        if node.is_leaf() || node.degree() != 1 {
            return Err(not_applicable(K, "target is not a degree-one internal node"));
        }
        let Some(p) = node.parent else {
            return Err(not_applicable(K, "target is the root"));
        };
        let parent = &self.arena[p];
        if parent.weight == 0 || parent.degree() == 1 {
            return Err(not_applicable(K, "violation at parent"));
        }
        if self.has_slack_violation(p) {
            return Err(not_applicable(K, "slack violation at parent"));
        }
        if self.any_weight_zero_child(p).is_some() {
            return Err(not_applicable(K, "weight violation at a sibling"));
        }
        if !self.uniform_children(p) {
            return Err(not_applicable(K, "siblings mix leaves and internal nodes"));
        }
        let k = parent.degree();
        let c = self.child_degree_total(p);
        if !self.slack_rule().one_child_applicable(self.b(), k, c) {
            return Err(not_applicable(K, "children too sparse"));
        }
        let siblings = self.children_of(p).to_vec();
        let before = self.measure(&siblings);
        self.redistribute(p, k);
        self.settle(before, &siblings);
        self.finish_step(K);
        for &s in &siblings {
            self.touch(s);
        }
        Ok(())
    }

    fn weight_zero_parent(&self, kind: StepKind, u: NodeId) -> Result<NodeId, StepError> {
        let node = self.arena.get(u).ok_or(not_applicable(kind, "stale node"))?;
        if node.weight != 0 {
            return Err(not_applicable(kind, "target has weight one"));
        }
        if node.is_leaf() || node.degree() != 2 {
            return Err(not_applicable(kind, "weight-zero target must have two children"));
        }
        node.parent.ok_or(not_applicable(kind, "target is the root"))
    }

    fn position(&self, parent: NodeId, child: NodeId) -> usize {
        self.children_of(parent)
            .iter()
            .position(|&c| c == child)
            .expect("child of its parent")
    }

    fn uniform_children(&self, id: NodeId) -> bool {
        let children = self.children_of(id);
        let leaf = self.arena[children[0]].is_leaf();
        children.iter().all(|&c| self.arena[c].is_leaf() == leaf)
    }

    fn reparent(&mut self, id: NodeId) {
        let children = self.arena[id].children().to_vec();
        for c in children {
            self.arena[c].parent = Some(id);
        }
    }

    /// Flattens the contents of all children of `parent` (with the parent's
    /// separators between internal children), cuts the sequence into `m`
    /// even runs stored in the first `m` children, and frees the others.
    /// Returns the number of children freed.
    fn redistribute(&mut self, parent: NodeId, m: usize) -> usize {
        let children = self.children_of(parent).to_vec();
        let k = children.len();
        debug_assert!(m >= 1 && m <= k);
        let separators = mem::take(&mut self.arena[parent].keys);
        let leaves = self.arena[children[0]].is_leaf();
        let mut new_separators = Vec::with_capacity(m - 1);

        if leaves {
            let mut keys = Vec::new();
            let mut values = Vec::new();
            for &c in &children {
                let node = &mut self.arena[c];
                keys.append(&mut node.keys);
                if let Links::Leaf(v) = &mut node.links {
                    values.append(v);
                }
            }
            let mut keys = keys.into_iter();
            let mut values = values.into_iter();
            for (r, size) in even_split(keys.len(), m).into_iter().enumerate() {
                let run_keys: Vec<K> = keys.by_ref().take(size).collect();
                let run_values: Vec<V> = values.by_ref().take(size).collect();
                if r > 0 {
                    new_separators.push(run_keys.first().expect("empty leaf run").clone());
                }
                let node = &mut self.arena[children[r]];
                node.keys = run_keys;
                node.links = Links::Leaf(run_values);
            }
        } else {
            let mut items = Vec::new();
            let mut keys = Vec::new();
            let mut seps = separators.into_iter();
            for (j, &c) in children.iter().enumerate() {
                if j > 0 {
                    keys.push(seps.next().expect("separator count"));
                }
                let node = &mut self.arena[c];
                keys.append(&mut node.keys);
                items.append(node.children_mut());
            }
            debug_assert_eq!(keys.len() + 1, items.len());
            let mut items = items.into_iter();
            let mut keys = keys.into_iter();
            for (r, size) in even_split(items.len(), m).into_iter().enumerate() {
                let run_items: Vec<NodeId> = items.by_ref().take(size).collect();
                let run_keys: Vec<K> = keys.by_ref().take(size - 1).collect();
                if r + 1 < m {
                    new_separators.push(keys.next().expect("boundary separator"));
                }
                let node = &mut self.arena[children[r]];
                node.keys = run_keys;
                *node.children_mut() = run_items;
                self.reparent(children[r]);
            }
        }

        for &c in &children[m..] {
            self.arena.free(c);
        }
        let node = &mut self.arena[parent];
        node.keys = new_separators;
        node.children_mut().truncate(m);
        k - m
    }
}
