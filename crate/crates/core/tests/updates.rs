use bslack::checker::{validate, Mode, ViolationKind};
use bslack::{Config, EventKind, InsertStatus, Policy, StepError, StepKind, Tree};

fn tree(b: usize, dump: &str) -> Tree<u64, u64> {
    Tree::from_dump(Config::new(b), dump).unwrap()
}

fn const_tree(b: usize, dump: &str) -> Tree<u64, u64> {
    Tree::from_dump(Config::new(b).policy(Policy::ConstRebalance), dump).unwrap()
}

fn leaf(keys: &[u64]) -> String {
    let ks: Vec<String> = keys.iter().map(u64::to_string).collect();
    format!("(w=1 keys=[{}] children=[])", ks.join(","))
}

fn child(t: &Tree<u64, u64>, i: usize) -> bslack::NodeId {
    t.node(t.root()).unwrap().children()[i]
}

fn keys(t: &Tree<u64, u64>) -> Vec<u64> {
    t.keys().copied().collect()
}

fn relaxed_depths(t: &Tree<u64, u64>) -> Vec<usize> {
    validate(t, Mode::Relaxed).leaf_relaxed_depths
}

#[test]
fn search_on_empty_tree() {
    let t: Tree<u64, u64> = Tree::new(Config::new(5)).unwrap();
    assert_eq!(t.get(&7), None);
}

#[test]
fn search_routes_separator_right() {
    let t = tree(
        5,
        &format!("(w=1 keys=[10] children=[{} {}])", leaf(&[5, 7]), leaf(&[10, 12])),
    );
    assert_eq!(t.get(&10), Some(&10));
    assert_eq!(t.get(&7), Some(&7));
    assert_eq!(t.get(&9), None);
}

#[test]
fn search_after_ascending_inserts() {
    let mut t = Tree::new(Config::new(5)).unwrap();
    for k in 1..=20u64 {
        t.insert(k, k * 10);
    }
    for k in 1..=20u64 {
        assert_eq!(t.get(&k), Some(&(k * 10)));
    }
    assert_eq!(t.get(&21), None);
}

#[test]
fn insert_into_leaf_with_slack() {
    let mut t = tree(5, &leaf(&[1, 2]));
    let out = t.insert(3, 3);
    assert_eq!(out.status, InsertStatus::Inserted);
    assert!(!out.overflowed);
    assert_eq!(out.steps.total(), 0);
    assert_eq!(t.dump(), leaf(&[1, 2, 3]));
}

#[test]
fn insert_into_full_root_leaf() {
    let mut t = tree(5, &leaf(&[1, 2, 3, 4, 5]));
    t.enable_trace();
    let out = t.insert(6, 6);
    assert!(out.overflowed);
    let kinds: Vec<EventKind> = t.take_trace().iter().map(|e| e.kind).collect();
    assert_eq!(kinds, vec![EventKind::Overflow, EventKind::Step(StepKind::RootZero)]);
    assert_eq!(out.steps.total(), 1);
    assert_eq!(out.steps.root_zero, 1);
    assert_eq!(
        t.dump(),
        format!("(w=1 keys=[4] children=[{} {}])", leaf(&[1, 2, 3]), leaf(&[4, 5, 6]))
    );
}

#[test]
fn overflow_leaves_one_weight_violation_at_new_node() {
    let mut t = tree(5, &leaf(&[1, 2, 3, 4, 5]));
    t.insert_deferred(6, 6);
    let r = validate(&t, Mode::Strict);
    assert!(r.is_well_formed());
    assert_eq!(r.violations.len(), 1);
    assert_eq!(r.violations[0].kind, ViolationKind::Weight);
    assert_eq!(r.violations[0].node, t.root());
    let step = t.plan(t.root()).unwrap();
    assert_eq!(step.kind, StepKind::RootZero);
}

#[test]
fn ascending_inserts_stay_strict() {
    let mut t = Tree::new(Config::new(5)).unwrap();
    for k in 1..=100u64 {
        t.insert(k, k);
        assert!(validate(&t, Mode::Strict).is_strict(), "after inserting {k}");
        assert_eq!(keys(&t), (1..=k).collect::<Vec<_>>());
    }
}

#[test]
fn delete_absent_key_changes_nothing() {
    let text = format!("(w=1 keys=[5] children=[{} {}])", leaf(&[1, 2, 3, 4]), leaf(&[5, 6, 7]));
    let mut t = tree(5, &text);
    assert_eq!(t.cleanup().total(), 0);
    let out = t.delete(&9);
    assert!(!out.deleted);
    assert_eq!(out.steps.total(), 0);
    assert_eq!(t.dump(), text);
}

#[test]
fn delete_triggers_compress_then_root_replace() {
    // The children already share 5 > 4 slack; the delete's cleanup repairs it.
    let mut t = tree(
        5,
        &format!("(w=1 keys=[5] children=[{} {}])", leaf(&[1, 2, 3]), leaf(&[5, 6])),
    );
    let out = t.delete(&3);
    assert!(out.deleted);
    assert_eq!(out.steps.compress, 1);
    assert_eq!(out.steps.root_replace, 1);
    assert_eq!(out.steps.total(), 2);
    assert_eq!(t.dump(), leaf(&[1, 2, 5, 6]));
}

#[test]
fn root_zero_sets_weight_and_deepens_leaves() {
    let mut t = tree(
        5,
        &format!("(w=0 keys=[4] children=[{} {}])", leaf(&[1, 2, 3]), leaf(&[4, 5, 6])),
    );
    assert_eq!(relaxed_depths(&t), vec![0]);
    t.step_root_zero().unwrap();
    assert_eq!(t.node(t.root()).unwrap().weight(), 1);
    assert_eq!(relaxed_depths(&t), vec![1]);
    assert!(matches!(t.step_root_zero(), Err(StepError::NotApplicable { .. })));
}

#[test]
fn root_replace_with_weight_zero_child() {
    let inner = format!("(w=0 keys=[4] children=[{} {}])", leaf(&[1, 2, 3]), leaf(&[4, 5, 6]));
    let mut t = tree(5, &format!("(w=1 keys=[] children=[{inner}])"));
    assert_eq!(relaxed_depths(&t), vec![1]);
    t.step_root_replace().unwrap();
    assert_eq!(t.node(t.root()).unwrap().weight(), 1);
    assert_eq!(relaxed_depths(&t), vec![1]);
    assert!(validate(&t, Mode::Strict).is_strict());
}

#[test]
fn root_replace_with_weight_one_child() {
    let inner = format!("(w=1 keys=[4] children=[{} {}])", leaf(&[1, 2, 3]), leaf(&[4, 5, 6]));
    let mut t = tree(5, &format!("(w=1 keys=[] children=[{inner}])"));
    assert_eq!(relaxed_depths(&t), vec![2]);
    t.step_root_replace().unwrap();
    assert_eq!(relaxed_depths(&t), vec![1]);
    assert!(matches!(t.step_root_replace(), Err(StepError::NotApplicable { .. })));
}

fn absorb_fixture(extra: &[&[u64]]) -> String {
    let u = format!(
        "(w=0 keys=[15] children=[{} {}])",
        leaf(&[10, 11, 12]),
        leaf(&[15, 16, 17])
    );
    let mut children = vec![leaf(&[1, 2, 3]), u];
    let mut seps = vec![10];
    for ks in extra {
        seps.push(ks[0]);
        children.push(leaf(ks));
    }
    let seps: Vec<String> = seps.iter().map(u64::to_string).collect();
    format!("(w=1 keys=[{}] children=[{}])", seps.join(","), children.join(" "))
}

#[test]
fn absorb_moves_links_into_parent() {
    let mut t = tree(5, &absorb_fixture(&[&[20, 21, 22]]));
    let before = keys(&t);
    let u = child(&t, 1);
    t.step_absorb(u).unwrap();
    assert_eq!(t.node(t.root()).unwrap().degree(), 4);
    assert!(t.node(u).is_none());
    assert_eq!(keys(&t), before);
    assert_eq!(
        t.dump(),
        format!(
            "(w=1 keys=[10,15,20] children=[{} {} {} {}])",
            leaf(&[1, 2, 3]),
            leaf(&[10, 11, 12]),
            leaf(&[15, 16, 17]),
            leaf(&[20, 21, 22])
        )
    );
    assert!(validate(&t, Mode::Relaxed).is_well_formed());
}

#[test]
fn absorb_can_fill_parent() {
    let mut t = tree(5, &absorb_fixture(&[&[20, 21], &[30, 31]]));
    let u = child(&t, 1);
    t.step_absorb(u).unwrap();
    assert_eq!(t.node(t.root()).unwrap().degree(), 5);
}

#[test]
fn absorb_refused_when_parent_full() {
    let mut t = tree(5, &absorb_fixture(&[&[20, 21], &[30, 31], &[40, 41]]));
    let u = child(&t, 1);
    assert!(matches!(t.step_absorb(u), Err(StepError::NotApplicable { .. })));
    assert_eq!(t.plan(u).unwrap().kind, StepKind::Split);
}

#[test]
fn split_shares_links_of_node_and_parent() {
    let mut t = tree(5, &absorb_fixture(&[&[20, 21, 22], &[30, 31, 32], &[40, 41, 42]]));
    let before = keys(&t);
    let u = child(&t, 1);
    t.step_split(u).unwrap();
    assert_eq!(
        t.dump(),
        format!(
            "(w=0 keys=[20] children=[(w=1 keys=[10,15] children=[{} {} {}]) (w=1 keys=[30,40] children=[{} {} {}])])",
            leaf(&[1, 2, 3]),
            leaf(&[10, 11, 12]),
            leaf(&[15, 16, 17]),
            leaf(&[20, 21, 22]),
            leaf(&[30, 31, 32]),
            leaf(&[40, 41, 42])
        )
    );
    assert_eq!(keys(&t), before);
    assert_eq!(relaxed_depths(&t), vec![1]);
    let r = validate(&t, Mode::Relaxed);
    let slack_uv: usize = r
        .slack
        .iter()
        .filter(|s| s.children_slack.is_some() && s.node != t.root())
        .map(|s| s.slack)
        .sum();
    assert_eq!(slack_uv, 4);
}

#[test]
fn split_refused_when_parent_not_full() {
    let mut t = tree(5, &absorb_fixture(&[&[20, 21, 22]]));
    let u = child(&t, 1);
    assert!(matches!(t.step_split(u), Err(StepError::NotApplicable { .. })));
}

#[test]
fn compress_leaf_children() {
    let mut t = tree(
        5,
        &format!(
            "(w=1 keys=[5,8] children=[{} {} {}])",
            leaf(&[1, 2, 3]),
            leaf(&[5, 6]),
            leaf(&[8, 9, 10, 11])
        ),
    );
    let root = t.root();
    assert_eq!(t.step_compress(root).unwrap(), 1);
    assert_eq!(
        t.dump(),
        format!(
            "(w=1 keys=[8] children=[{} {}])",
            leaf(&[1, 2, 3, 5, 6]),
            leaf(&[8, 9, 10, 11])
        )
    );
    assert!(validate(&t, Mode::Strict).is_strict());
}

#[test]
fn compress_internal_children_recomputes_separators() {
    let l = |k: u64| leaf(&[k]);
    let a = format!("(w=1 keys=[2,3] children=[{} {} {}])", l(1), l(2), l(3));
    let b = format!("(w=1 keys=[5] children=[{} {}])", l(4), l(5));
    let c = format!("(w=1 keys=[7,8,9] children=[{} {} {} {}])", l(6), l(7), l(8), l(9));
    let mut t = tree(5, &format!("(w=1 keys=[4,6] children=[{a} {b} {c}])"));
    let root = t.root();
    assert_eq!(t.step_compress(root).unwrap(), 1);
    assert_eq!(
        t.dump(),
        format!(
            "(w=1 keys=[6] children=[(w=1 keys=[2,3,4,5] children=[{} {} {} {} {}]) (w=1 keys=[7,8,9] children=[{} {} {} {}])])",
            l(1), l(2), l(3), l(4), l(5), l(6), l(7), l(8), l(9)
        )
    );
    assert_eq!(keys(&t), (1..=9).collect::<Vec<_>>());
}

#[test]
fn const_compress_threshold_is_looser() {
    let text = format!(
        "(w=1 keys=[5,8] children=[{} {} {}])",
        leaf(&[1, 2, 3]),
        leaf(&[5, 6]),
        leaf(&[8, 9, 10, 11])
    );
    let mut t = const_tree(5, &text);
    let root = t.root();
    assert!(matches!(t.step_compress(root), Err(StepError::NotApplicable { .. })));
    assert!(validate(&t, Mode::StrictConstRebalance).is_strict());
}

#[test]
fn const_compress_leaves_slack_in_every_child() {
    let mut t = const_tree(
        5,
        &format!(
            "(w=1 keys=[5,8] children=[{} {} {}])",
            leaf(&[1, 2]),
            leaf(&[5, 6]),
            leaf(&[8, 9])
        ),
    );
    let root = t.root();
    assert_eq!(t.step_compress(root).unwrap(), 1);
    assert_eq!(
        t.dump(),
        format!("(w=1 keys=[6] children=[{} {}])", leaf(&[1, 2, 5]), leaf(&[6, 8, 9]))
    );
}

#[test]
fn one_child_levels_two_siblings() {
    let l = |k: u64| leaf(&[k]);
    let u = format!("(w=1 keys=[] children=[{}])", leaf(&[1, 2]));
    let s = format!(
        "(w=1 keys=[11,12,13,14] children=[{} {} {} {} {}])",
        l(10),
        l(11),
        l(12),
        l(13),
        l(14)
    );
    let mut t = tree(5, &format!("(w=1 keys=[10] children=[{u} {s}])"));
    let phi_before = t.potential();
    let u = child(&t, 0);
    assert_eq!(t.plan(u).unwrap().kind, StepKind::OneChild);
    t.step_one_child(u).unwrap();
    assert_eq!(
        t.dump(),
        format!(
            "(w=1 keys=[12] children=[(w=1 keys=[10,11] children=[{} {} {}]) (w=1 keys=[13,14] children=[{} {} {}])])",
            leaf(&[1, 2]),
            l(10),
            l(11),
            l(12),
            l(13),
            l(14)
        )
    );
    // Leveling [1,5] to [3,3] removes a full node.
    assert_eq!(t.potential() - phi_before, 4 - 9);
}

#[test]
fn one_child_levels_three_siblings() {
    let l = |k: u64| leaf(&[k]);
    let full = |base: u64| {
        format!(
            "(w=1 keys=[{},{},{},{}] children=[{} {} {} {} {}])",
            base + 1,
            base + 2,
            base + 3,
            base + 4,
            l(base),
            l(base + 1),
            l(base + 2),
            l(base + 3),
            l(base + 4)
        )
    };
    let u = format!("(w=1 keys=[] children=[{}])", l(20));
    let mut t = tree(
        5,
        &format!("(w=1 keys=[10,20] children=[{} {} {u}])", full(0), full(10)),
    );
    let u = child(&t, 2);
    t.step_one_child(u).unwrap();
    let degrees: Vec<usize> = t
        .node(t.root())
        .unwrap()
        .children()
        .iter()
        .map(|&c| t.node(c).unwrap().degree())
        .collect();
    assert_eq!(degrees, vec![4, 4, 3]);
    assert_eq!(keys(&t).len(), 11);
    let r = validate(&t, Mode::Strict);
    assert!(r.is_well_formed());
    assert_eq!(r.count(ViolationKind::Degree), 0);
}

#[test]
fn one_child_yields_to_compress_at_parent() {
    let u = format!("(w=1 keys=[] children=[{}])", leaf(&[1]));
    let s = format!("(w=1 keys=[11] children=[{} {}])", leaf(&[10]), leaf(&[11]));
    let mut t = tree(5, &format!("(w=1 keys=[10] children=[{u} {s}])"));
    let u = child(&t, 0);
    assert!(matches!(t.step_one_child(u), Err(StepError::NotApplicable { .. })));
    assert_eq!(t.plan(u).unwrap().kind, StepKind::Compress);
}

#[test]
fn cleanup_of_strict_tree_does_nothing() {
    let mut t = tree(
        5,
        &format!(
            "(w=1 keys=[5] children=[{} {}])",
            leaf(&[1, 2, 3, 4]),
            leaf(&[5, 6, 7, 8])
        ),
    );
    assert_eq!(t.cleanup().total(), 0);
}

#[test]
fn batch_updates_then_cleanup() {
    let mut t = Tree::new(Config::new(6).policy(Policy::Batch)).unwrap();
    let mut model = std::collections::BTreeMap::new();
    let mut x = 12345u64;
    for _ in 0..1000 {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let k = (x >> 33) % 300;
        if (x >> 20) & 1 == 0 {
            t.insert(k, k);
            model.insert(k, k);
        } else {
            t.delete(&k);
            model.remove(&k);
        }
        assert!(validate(&t, Mode::Relaxed).is_well_formed());
    }
    t.cleanup();
    assert!(validate(&t, Mode::Strict).is_strict());
    assert_eq!(keys(&t), model.keys().copied().collect::<Vec<_>>());
}

#[test]
fn stale_handles_are_not_applicable() {
    let mut t = tree(5, &absorb_fixture(&[&[20, 21, 22]]));
    let u = child(&t, 1);
    t.step_absorb(u).unwrap();
    assert!(t.step_absorb(u).is_err());
    assert!(t.plan(u).is_none());
}
