#![allow(dead_code)]

use bslack::{EventKind, Policy, StepKind, TraceEvent};

/// Checks one traced event against the state before it. `removed` is the
/// number of children a Compress discarded.
pub fn check_delta(
    b: i64,
    policy: Policy,
    prev: &TraceEvent,
    ev: &TraceEvent,
    removed: Option<i64>,
) -> Result<(), String> {
    let ds = ev.weight1_slack - prev.weight1_slack;
    let dp = ev.potential - prev.potential;
    let ok = match ev.kind {
        EventKind::Insert => ds == -1 && (dp == -1 || dp == b - 1),
        EventKind::Delete => ds == 1 && (dp == 1 || dp == -(b - 1)),
        EventKind::Overflow => ds == b - 1 && ds <= 2 * (b - 1) && dp == b - 1,
        EventKind::Step(StepKind::Absorb) => ds == -1 && (dp == -1 || dp == -(b + 1)),
        EventKind::Step(StepKind::Split) => ds == b - 1 && dp == -1,
        EventKind::Step(StepKind::Compress) => {
            let gone = removed.unwrap_or(1);
            ds == -gone * (b - 1) && ds <= -(b - 1) && (policy != Policy::ConstRebalance || dp <= -(b - 1))
        }
        EventKind::Step(StepKind::OneChild) => ds == 0 && dp <= 0,
        EventKind::Step(StepKind::RootZero) => ds == b - 2 && dp == -2,
        EventKind::Step(StepKind::RootReplace) => (ds == -(b - 1) && dp == -(b - 1)) || (ds == -1 && dp == -(b + 1)),
    };
    if ok {
        Ok(())
    } else {
        Err(format!("{:?}: slack {ds:+}, potential {dp:+}", ev.kind))
    }
}

/// Trace state of a tree before any event.
pub fn initial_event(potential: i64, weight1_slack: i64) -> TraceEvent {
    TraceEvent {
        kind: EventKind::Insert,
        potential,
        weight1_slack,
        inserts: 0,
        deletes: 0,
    }
}
