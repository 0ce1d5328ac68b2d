//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs as a plain binary (`harness = false`).

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use bslack::analysis::{
    bslack_ratio_at_height, build_overslack, d_closed, d_recurrence, dbar_total, family_space, space_table, to_f64,
    Family, OverslackParams,
};
use bslack::checker::{enumerate_min_keys_height2, validate, Mode};
use bslack::harness::{
    check_amortized_bound, histogram_stats, run_trial, standard_step_budget, TrialConfig, TrialReport, Workload,
};
use bslack::rng::{Update, UpdateStream};
use bslack::{Config, InsertStatus, Policy, StepKind, Tree};
use num_bigint::BigInt;
use num_rational::BigRational;

mod common;
use common::{check_delta, initial_event};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn oracle_equivalence() -> Outcome {
    let mut checked = 0u64;
    for b in [5usize, 6, 8, 16] {
        for policy in [Policy::Standard, Policy::ConstRebalance] {
            let mode = Mode::strict_for(policy);
            for seed in 1..=10u64 {
                let mut t = Tree::new(Config::new(b).policy(policy)).unwrap();
                let mut m = BTreeMap::new();
                let mut stream = UpdateStream::new(seed, 512, 50);
                for i in 0..100_000u64 {
                    match stream.next_update() {
                        Update::Insert(k) => {
                            t.insert(k, i);
                            m.insert(k, i);
                        }
                        Update::Delete(k) => {
                            let ok = t.delete(&k).deleted;
                            ensure(ok == m.remove(&k).is_some(), || {
                                format!("b={b} seed={seed} op {i}: delete result")
                            })?;
                        }
                    }
                    let same = t.len() == m.len() && t.iter().zip(&m).all(|((a, x), (c, y))| a == c && x == y);
                    ensure(same, || format!("b={b} {policy} seed={seed} op {i}: contents differ"))?;
                    let r = validate(&t, mode);
                    ensure(r.is_strict(), || {
                        format!(
                            "b={b} {policy} seed={seed} op {i}: {:?} {:?}",
                            r.violations, r.structural
                        )
                    })?;
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} updates checked"))
}

fn formula_cross_check() -> Outcome {
    let mut worst = 0f64;
    for b in 5..=64usize {
        for k in 2..=b {
            for delta in 0..=20 {
                let exact = to_f64(&BigRational::from_integer(d_recurrence(delta, k, b).unwrap()));
                let closed = d_closed(delta, k, b).unwrap();
                let rel = (closed - exact).abs() / exact;
                worst = worst.max(rel);
                ensure(rel <= 1e-6, || {
                    format!("b={b} k={k} delta={delta}: {closed} vs {exact}")
                })?;
            }
            for h in 3..=12 {
                let dbar = dbar_total(h, k, b).unwrap();
                let floor = BigRational::from_integer(BigInt::from(b - 2));
                ensure(dbar > floor, || {
                    format!("b={b} k={k} h={h}: average degree {}", to_f64(&dbar))
                })?;
            }
        }
    }
    Ok(format!("max relative error {worst:.2e}"))
}

fn overslack_construction() -> Outcome {
    let mut built = 0;
    for b in 5..=10usize {
        for k in 2..=4usize {
            for h in 0..=4usize {
                let t = build_overslack(OverslackParams::new(b, k, h).unwrap()).unwrap();
                let expect: Vec<BigInt> = (0..=h).map(|d| d_recurrence(d, k, b).unwrap()).collect();
                ensure(BigInt::from(t.len()) == expect[h], || {
                    format!("b={b} k={k} h={h}: {} keys", t.len())
                })?;
                let r = validate(&t, Mode::Relaxed);
                ensure(r.is_well_formed(), || format!("b={b} k={k} h={h}: {:?}", r.structural))?;
                let totals: Vec<BigInt> = r.depth_degree_totals.iter().map(|&x| BigInt::from(x)).collect();
                ensure(totals == expect, || {
                    format!("b={b} k={k} h={h}: per-depth totals {totals:?}")
                })?;
                built += 1;
            }
        }
    }
    Ok(format!("{built} trees"))
}

fn exhaustive_minimum() -> Outcome {
    let mut found = Vec::new();
    for b in [6usize, 8, 10] {
        let m = enumerate_min_keys_height2(b).map_err(|e| e.to_string())?;
        ensure(m == (b * b - b + 2) as u64, || format!("b={b}: minimum {m}"))?;
        let d = d_recurrence(2, 2, b).unwrap();
        ensure(BigInt::from(m) > d, || format!("b={b}: {m} <= {d}"))?;
        found.push(format!("b={b}:{m}"));
    }
    Ok(found.join(" "))
}

fn space_table_reproduction() -> Outcome {
    let expected = [
        (Family::BTree, [5.333, 4.571, 4.266]),
        (Family::OverflowTree, [5.066, 3.120, 2.492]),
    ];
    for (family, ratios) in expected {
        for (b, want) in [8usize, 16, 32].into_iter().zip(ratios) {
            let got = family_space(family, b, 1_000_000).unwrap().ratio;
            ensure((got - want).abs() <= 0.001, || {
                format!("{} b={b}: {got:.4} vs {want}", family.name())
            })?;
        }
    }
    for (b, h, want) in [(16usize, 4usize, 2.301), (32, 3, 2.145)] {
        let got = bslack_ratio_at_height(b, h).unwrap();
        ensure((got - want).abs() <= 0.001, || {
            format!("bound b={b} h={h}: {got:.4} vs {want}")
        })?;
    }
    let rows = space_table(&[8, 16, 32], 1_000_000).unwrap();
    let b8: Vec<String> = rows
        .iter()
        .filter(|r| r.family == "b-slack-bound" && r.b == 8)
        .map(|r| format!("h={}:{:.3}", r.height, r.ratio))
        .collect();
    ensure(b8.len() == 2, || format!("b=8 bound rows {b8:?}"))?;
    Ok(format!("b=8 bound reported as {}", b8.join(", ")))
}

struct Trials {
    reference: Vec<TrialReport>,
    wide: TrialReport,
    delete_heavy: TrialReport,
}

fn run(config: TrialConfig) -> Result<TrialReport, String> {
    run_trial(&config).map_err(|e| e.to_string())
}

fn experiment_reproduction(trials: &Trials) -> Outcome {
    let mut parts = Vec::new();
    let mean = |rs: &[TrialReport], f: fn(&TrialReport) -> f64| rs.iter().map(f).sum::<f64>() / rs.len() as f64;
    let steps = mean(&trials.reference, |r| r.steps_per_update);
    let degree = mean(&trials.reference, |r| r.average_degree);
    let words = trials.reference.iter().map(|r| r.words_per_key).fold(0.0, f64::max);
    ensure((1.0..=1.4).contains(&steps), || format!("b=16 steps/update {steps:.3}"))?;
    ensure((15.2..=15.8).contains(&degree), || {
        format!("b=16 average degree {degree:.3}")
    })?;
    ensure(words < 2.23, || format!("b=16 words/key {words:.4}"))?;
    parts.push(format!(
        "b=16: {steps:.3} steps, degree {degree:.2}, {words:.4} words/key"
    ));

    let w = &trials.wide;
    ensure((0.9..=1.3).contains(&w.steps_per_update), || {
        format!("b=32 steps/update {:.3}", w.steps_per_update)
    })?;
    ensure((31.0..=31.9).contains(&w.average_degree), || {
        format!("b=32 average degree {:.3}", w.average_degree)
    })?;
    ensure(w.words_per_key < 2.12, || {
        format!("b=32 words/key {:.4}", w.words_per_key)
    })?;
    parts.push(format!(
        "b=32: {:.3} steps, degree {:.2}, {:.4} words/key",
        w.steps_per_update, w.average_degree, w.words_per_key
    ));

    let d = &trials.delete_heavy;
    ensure(d.steps_per_update < 1.0, || {
        format!("10i-90d steps/update {:.3}", d.steps_per_update)
    })?;
    ensure(d.words_per_key < 2.25, || {
        format!("10i-90d words/key {:.4}", d.words_per_key)
    })?;
    parts.push(format!(
        "10i-90d: {:.3} steps, {:.4} words/key",
        d.steps_per_update, d.words_per_key
    ));
    Ok(parts.join("; "))
}

fn histogram_shape(trials: &Trials) -> Outcome {
    let mut worst = (1.0f64, 1.0f64, 1.0f64, 0u64);
    for r in &trials.reference {
        let s = histogram_stats(r);
        let total: u64 = r.histogram.iter().map(|b| b.count).sum();
        ensure(total == r.inserts + r.deletes, || {
            format!("seed {}: histogram total {total}", r.config.seed)
        })?;
        ensure(s.zero >= 0.60, || {
            format!("seed {}: zero-step {:.4}", r.config.seed, s.zero)
        })?;
        ensure(s.at_most_six >= 0.95, || {
            format!("seed {}: <=6 steps {:.4}", r.config.seed, s.at_most_six)
        })?;
        ensure(s.under_ten >= 0.995, || {
            format!("seed {}: <10 steps {:.4}", r.config.seed, s.under_ten)
        })?;
        ensure(s.max <= 25, || format!("seed {}: max {}", r.config.seed, s.max))?;
        worst = (
            worst.0.min(s.zero),
            worst.1.min(s.at_most_six),
            worst.2.min(s.under_ten),
            worst.3.max(s.max),
        );
    }
    Ok(format!(
        "worst over seeds: zero {:.1}%, <=6 {:.1}%, <10 {:.2}%, max {}",
        worst.0 * 100.0,
        worst.1 * 100.0,
        worst.2 * 100.0,
        worst.3
    ))
}

fn amortized_bounds(trials: &Trials) -> Outcome {
    let standard = trials.reference.iter().chain([&trials.wide, &trials.delete_heavy]);
    let mut count = 0;
    for r in standard {
        let c = check_amortized_bound(r, Policy::Standard);
        ensure(c.pass, || {
            format!("standard b={} seed={}: {c:?}", r.config.b, r.config.seed)
        })?;
        count += 1;
    }
    let mut tightest = i64::MIN;
    for (b, workload) in [
        (8usize, Workload::Balanced),
        (16, Workload::InsertHeavy),
        (16, Workload::DeleteHeavy),
    ] {
        for seed in 1..=2u64 {
            let config = TrialConfig::new(b)
                .workload(workload)
                .size(1 << 16)
                .ops(200_000)
                .seed(seed)
                .policy(Policy::ConstRebalance);
            let r = run(config)?;
            let c = check_amortized_bound(&r, Policy::ConstRebalance);
            let excess = c.max_potential_excess.unwrap_or(i64::MAX);
            ensure(c.pass && excess <= 0, || {
                format!("const b={b} {} seed={seed}: {c:?}", workload.name())
            })?;
            tightest = tightest.max(excess);
            count += 1;
        }
    }
    Ok(format!("{count} trials, largest potential excess {tightest}"))
}

fn step_deltas() -> Outcome {
    let mut steps = 0u64;
    let mut kinds = BTreeMap::new();
    for policy in [Policy::Standard, Policy::ConstRebalance] {
        for b in 5..=12usize {
            for seed in 1..=3u64 {
                let mut t: Tree<u64, ()> = Tree::new(Config::new(b).policy(policy)).unwrap();
                t.enable_trace();
                let mut prev = initial_event(t.potential(), t.weight1_slack());
                let mut stream = UpdateStream::new(seed, 600, 50);
                for i in 0..6_000u32 {
                    // alternate growth and shrinkage so every step kind shows up
                    stream.set_insert_pct(if (i / 1_500) % 2 == 0 { 70 } else { 30 });
                    match stream.next_update() {
                        Update::Insert(k) => {
                            t.insert_deferred(k, ());
                        }
                        Update::Delete(k) => {
                            t.delete_deferred(&k);
                        }
                    }
                    for ev in t.take_trace() {
                        check_delta(b as i64, policy, &prev, &ev, None)?;
                        prev = ev;
                    }
                    loop {
                        let before = t.node_count() as i64;
                        let Some(kind) = t.step() else { break };
                        let removed = (kind == StepKind::Compress).then(|| before - t.node_count() as i64);
                        for ev in t.take_trace() {
                            check_delta(b as i64, policy, &prev, &ev, removed)
                                .map_err(|e| format!("{policy} b={b} seed={seed}: {e}"))?;
                            prev = ev;
                        }
                        steps += 1;
                        *kinds.entry(kind.name()).or_insert(0u64) += 1;
                    }
                }
            }
        }
    }
    ensure(steps >= 10_000, || format!("only {steps} steps"))?;
    let kinds: Vec<String> = kinds.iter().map(|(k, n)| format!("{k}={n}")).collect();
    Ok(format!("{steps} steps ({})", kinds.join(" ")))
}

fn batch_convergence() -> Outcome {
    let mut worst = 0f64;
    for b in [5usize, 8, 16] {
        for seed in 1..=3u64 {
            let mut t: Tree<u64, ()> = Tree::new(Config::new(b).policy(Policy::Batch)).unwrap();
            let mut stream = UpdateStream::new(seed, 8_192, 70);
            for _ in 0..5_000 {
                match stream.next_update() {
                    Update::Insert(k) => {
                        t.insert(k, ());
                    }
                    Update::Delete(k) => {
                        t.delete(&k);
                    }
                }
            }
            t.cleanup();
            ensure(validate(&t, Mode::Strict).is_strict(), || {
                format!("b={b} seed={seed}: prefill not strict")
            })?;
            let n0 = t.len() as u64;
            stream.set_insert_pct(50);
            let (mut i, mut d) = (0u64, 0u64);
            for _ in 0..10_000 {
                match stream.next_update() {
                    Update::Insert(k) => {
                        if t.insert(k, ()).status == InsertStatus::Inserted {
                            i += 1;
                        }
                    }
                    Update::Delete(k) => {
                        if t.delete(&k).deleted {
                            d += 1;
                        }
                    }
                }
            }
            ensure(validate(&t, Mode::Relaxed).is_well_formed(), || {
                format!("b={b} seed={seed}: malformed")
            })?;
            let steps = t.cleanup().total() as f64;
            let r = validate(&t, Mode::Strict);
            ensure(r.is_strict(), || format!("b={b} seed={seed}: {:?}", r.violations))?;
            let budget = standard_step_budget(b, n0, i, d);
            ensure(steps <= budget, || {
                format!("b={b} seed={seed}: {steps} steps > {budget}")
            })?;
            worst = worst.max(steps / budget);
        }
    }
    Ok(format!("largest steps/budget {worst:.3}"))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let result = f();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n:>2} PASS {name}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL {name}: {detail} ({secs:.1}s)");
            }
        }
    };

    report(1, "oracle equivalence", &mut oracle_equivalence);
    report(2, "formula cross-check", &mut formula_cross_check);
    report(3, "overslack construction", &mut overslack_construction);
    report(4, "exhaustive minimum", &mut exhaustive_minimum);
    report(5, "space table", &mut space_table_reproduction);

    let start = Instant::now();
    let trials = (|| -> Result<Trials, String> {
        let reference = (1..=5)
            .map(|seed| run(TrialConfig::new(16).seed(seed)))
            .collect::<Result<_, _>>()?;
        let wide = run(TrialConfig::new(32).seed(1))?;
        let delete_heavy = run(TrialConfig::new(16).workload(Workload::DeleteHeavy).seed(1))?;
        Ok(Trials {
            reference,
            wide,
            delete_heavy,
        })
    })();
    println!("(randomized trials ran in {:.1}s)", start.elapsed().as_secs_f64());
    match &trials {
        Ok(trials) => {
            report(6, "experiment reproduction", &mut || experiment_reproduction(trials));
            report(7, "histogram shape", &mut || histogram_shape(trials));
            report(8, "amortized bounds", &mut || amortized_bounds(trials));
        }
        Err(e) => {
            for (n, name) in [
                (6, "experiment reproduction"),
                (7, "histogram shape"),
                (8, "amortized bounds"),
            ] {
                report(n, name, &mut || Err(e.clone()));
            }
        }
    }
    report(9, "per-step deltas", &mut step_deltas);
    report(10, "batch convergence", &mut batch_convergence);

    if failed == 0 {
        println!("all 10 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
