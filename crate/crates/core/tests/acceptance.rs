//! End-to-end acceptance checks. Runs as a plain binary so every line is
//! printed; exits non-zero if any check fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use common::{buckets, labels_by_evaluation};
use labelcov::bench::{self, Benchmark};
use labelcov::coverage::{greedy_reduce, run_pipeline, CoverageStore, PipelineConfig, Replayer};
use labelcov::criteria::{annotate, Criterion, WmOp};
use labelcov::instrument::{transform, Mode};
use labelcov::minic::{interpret, nondet_name, parse, Outcome, Value, DEFAULT_STEP_LIMIT};
use labelcov::symex::harness::to_inputs;
use labelcov::symex::{explore, ExploreConfig, ExploreHook, Harness, Strategy, TestCase, TestKind};
use proptest::prelude::Rng;
use proptest::test_runner::{RngAlgorithm, TestRng};

type Check = Result<String, String>;
type NamedCheck = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn matrix_criteria() -> Vec<Criterion> {
    vec![Criterion::Dc, Criterion::Cc, Criterion::Mcc, Criterion::wm(&WmOp::ALL), Criterion::Limit(1)]
}

fn complete_test(assignment: &[(&str, i64)]) -> TestCase {
    TestCase {
        id: 1,
        assignment: assignment.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        kind: TestKind::Complete,
        path_len: 0,
        trace: vec![],
    }
}

fn power_paths() -> Check {
    let power = bench::by_name("power").unwrap();
    let ap = annotate(&power.program, &Criterion::Dc).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        explore: ExploreConfig { strategy: Strategy::Bfs, ..Default::default() },
        ..Default::default()
    };
    let mut seen = Vec::new();
    for b in [5i64, 10, 20] {
        let h = Harness::new().with("X", -10, 10).with("N", 0, b);
        let start = Instant::now();
        let r = run_pipeline::<i128>(&ap, &h, Mode::Ignore, &cfg).map_err(|e| e.to_string())?;
        within(start, Duration::from_secs(2))?;
        let paths = r.exploration.paths_complete;
        ensure(paths == b as u64 + 1, || format!("B={b}: {paths} complete paths"))?;
        // The suite the covering-new policy lets through, before reduction.
        let ns: Vec<i64> = r.suite.generated.iter().map(|t| t.assignment["N"]).collect();
        let zero = ns.iter().filter(|n| **n == 0).count();
        let odd = ns.iter().filter(|n| *n % 2 != 0).count();
        let even = ns.iter().filter(|n| **n != 0 && *n % 2 == 0).count();
        ensure(ns.len() == 3 && (zero, odd, even) == (1, 1, 1), || format!("B={b}: emitted N values {ns:?}"))?;
        seen.push(format!("B={b}: {paths} paths, N={ns:?}"));
    }
    Ok(seen.join("; "))
}

fn search_mcc() -> Check {
    let search = bench::by_name("search").unwrap();
    let ap = annotate(&search.program, &Criterion::Mcc).map_err(|e| e.to_string())?;
    // Atoms are `res` and `i<n`; the missed vector has both true.
    let target_label = ap.labels.iter().find(|l| l.note == "TT").unwrap();
    let (target, loop_loc) = (target_label.id, target_label.loc);
    let loop_labels: BTreeSet<u32> = ap.labels.iter().filter(|l| l.loc == loop_loc).map(|l| l.id).collect();
    ensure(loop_labels.len() == 4, || format!("{} loop labels", loop_labels.len()))?;

    let start = Instant::now();
    let cfg = PipelineConfig::default();
    let ignore = run_pipeline::<i128>(&ap, &search.harness, Mode::Ignore, &cfg).map_err(|e| e.to_string())?;
    let optim = run_pipeline::<i128>(&ap, &search.harness, Mode::Optim, &cfg).map_err(|e| e.to_string())?;
    within(start, Duration::from_secs(5))?;

    let missed: BTreeSet<u32> = ignore.suite.per_label.iter().filter(|(_, c)| !**c).map(|(id, _)| *id).collect();
    ensure(missed == BTreeSet::from([target]), || format!("Ignore missed {missed:?}, expected {{{target}}}"))?;
    let optim_loop = loop_labels.iter().filter(|id| optim.suite.per_label[id]).count();
    ensure(optim_loop == 4, || format!("Optim covers {optim_loop}/4 loop labels"))?;
    Ok(format!("Ignore misses only label {target}; Optim covers 4/4 loop labels"))
}

fn straight_line(k: usize) -> String {
    let params: Vec<String> = (1..=k).map(|i| format!("int a{i}")).collect();
    let body: String = (1..=k).map(|i| format!("  int x{i} = a{i} + 0;\n")).collect();
    format!("int f({}) {{\n{body}  return 0;\n}}\n", params.join(", "))
}

fn path_growth() -> Check {
    let start = Instant::now();
    let mut rows = Vec::new();
    for k in 1..=8usize {
        let p = parse(&straight_line(k)).map_err(|e| e.to_string())?;
        let ap = annotate(&p, &Criterion::wm(&[WmOp::Abs])).map_err(|e| e.to_string())?;
        ensure(ap.labels.len() == k, || format!("k={k}: {} labels", ap.labels.len()))?;
        let h = (1..=k).fold(Harness::new(), |h, i| h.with(&format!("a{i}"), -1, 1));
        let cfg = ExploreConfig::default();
        let naive = explore::<i128>(&transform(&ap, Mode::Naive), &h, &cfg, None).map_err(|e| e.to_string())?;
        let tight = explore::<i128>(&transform(&ap, Mode::Tight), &h, &cfg, None).map_err(|e| e.to_string())?;
        ensure(naive.paths_complete == 1 << k, || format!("k={k}: Naive {} complete paths", naive.paths_complete))?;
        ensure(tight.paths() <= 3 * k as u64 + 2, || format!("k={k}: Tight {} paths", tight.paths()))?;
        rows.push(format!("{}/{}", naive.paths_complete, tight.paths()));
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!("naive/tight paths for k=1..8: {}", rows.join(" ")))
}

fn commit_on_success() -> Check {
    // DC labels: 1 is `a > 0`, 2 is its negation. a = 1 covers label 1, then
    // divides by zero.
    let faulty = "int f(int a) { int r = 0; if (a > 0) { r = 1; } return 10 / (a - 1) + r; }";
    let patched = "int f(int a) { int r = 0; if (a > 0) { r = 1; } return 10 / (a + 1) + r; }";
    let t = complete_test(&[("a", 1)]);

    let ap = annotate(&parse(faulty).unwrap(), &Criterion::Dc).map_err(|e| e.to_string())?;
    let rep = Replayer::new(&ap);
    let (buf, outcome) = rep.run::<i128>(&t).map_err(|e| e.to_string())?;
    ensure(buf.staged.contains(&1), || "staging buffer never saw label 1".into())?;
    ensure(matches!(outcome, Outcome::Rte { .. }), || format!("outcome {outcome:?}"))?;
    let mut sigma = CoverageStore::in_memory(ap.ids());
    let before = sigma.statuses().clone();
    let suite = greedy_reduce::<i128>(&rep, std::slice::from_ref(&t), &mut sigma).map_err(|e| e.to_string())?;
    ensure(sigma.statuses() == &before, || "σ changed after a faulting replay".into())?;
    ensure(suite.kept.is_empty(), || "faulting test kept".into())?;

    let ap = annotate(&parse(patched).unwrap(), &Criterion::Dc).map_err(|e| e.to_string())?;
    let mut sigma = CoverageStore::in_memory(ap.ids());
    let suite = greedy_reduce::<i128>(&Replayer::new(&ap), &[t], &mut sigma).map_err(|e| e.to_string())?;
    ensure(sigma.covered_ids() == BTreeSet::from([1]), || format!("patched σ {:?}", sigma.covered_ids()))?;
    ensure(suite.kept.len() == 1, || "patched test not kept".into())?;
    Ok("faulting replay leaves σ untouched; patched replay commits label 1".into())
}

/// Synchronous replay-and-commit, recording assertion checks on ids that were
/// already covered.
struct Ild<'a> {
    replayer: &'a Replayer,
    store: CoverageStore,
    assert_errs: BTreeMap<u32, usize>,
    stale_checks: usize,
}

impl ExploreHook for Ild<'_> {
    fn on_test(&mut self, t: &TestCase) {
        if let TestKind::AssertErr(id) = t.kind {
            *self.assert_errs.entry(id).or_default() += 1;
            self.replayer.replay::<i128>(t, &mut self.store).expect("replay");
        }
    }

    fn is_covered(&self, id: u32) -> bool {
        self.store.is_covered(id)
    }

    fn on_assert_check(&mut self, id: u32) {
        if self.store.is_covered(id) {
            self.stale_checks += 1;
        }
    }
}

fn ild_uniqueness() -> Check {
    let start = Instant::now();
    let mut cells = 0;
    let mut emitted = 0;
    for b in bench::builtin() {
        for c in matrix_criteria() {
            let ap = annotate(&b.program, &c).map_err(|e| e.to_string())?;
            let replayer = Replayer::new(&ap);
            let mut hook =
                Ild { replayer: &replayer, store: CoverageStore::in_memory(ap.ids()), assert_errs: BTreeMap::new(), stale_checks: 0 };
            let r = explore::<i128>(&transform(&ap, Mode::Optim), &b.harness, &ExploreConfig::default(), Some(&mut hook))
                .map_err(|e| e.to_string())?;
            ensure(!r.timed_out, || format!("{} {c}: timed out", b.name))?;
            if let Some((id, n)) = hook.assert_errs.iter().find(|(_, n)| **n > 1) {
                return Err(format!("{} {c}: label {id} has {n} assertion tests", b.name));
            }
            ensure(hook.stale_checks == 0, || format!("{} {c}: {} checks on covered ids", b.name, hook.stale_checks))?;
            cells += 1;
            emitted += hook.assert_errs.len();
        }
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("{cells} cells, {emitted} assertion tests, none repeated"))
}

fn mode_dominance() -> Check {
    let rows = bench::run_matrix(&bench::builtin(), &matrix_criteria(), &Mode::EXPLORATION, &PipelineConfig::default());
    let mut cell = BTreeMap::new();
    for m in &rows {
        ensure(m.error.is_none() && !m.timed_out, || format!("{} {} {}: {:?}", m.program, m.criterion, m.mode, m.error))?;
        cell.insert((m.program.as_str(), m.criterion.as_str(), m.mode), m);
    }
    let mut strict = Vec::new();
    for m in rows.iter().filter(|m| m.mode == Mode::Optim) {
        let key = |mode| cell[&(m.program.as_str(), m.criterion.as_str(), mode)];
        let (ignore, tight) = (key(Mode::Ignore), key(Mode::Tight));
        ensure(m.covered >= ignore.covered, || format!("{} {}: Optim {} < Ignore {}", m.program, m.criterion, m.covered, ignore.covered))?;
        ensure(m.tests_gen <= tight.tests_gen, || {
            format!("{} {}: Optim generated {} > Tight {}", m.program, m.criterion, m.tests_gen, tight.tests_gen)
        })?;
        if m.covered > ignore.covered {
            strict.push(format!("{}×{} {}>{}", m.program, m.criterion, m.covered, ignore.covered));
        }
    }
    let wm = Criterion::wm(&WmOp::ALL).to_string();
    for (p, c) in [("power", wm.as_str()), ("search", "MCC")] {
        let (o, i) = (cell[&(p, c, Mode::Optim)], cell[&(p, c, Mode::Ignore)]);
        ensure(o.covered > i.covered, || format!("{p}×{c}: Optim {} not above Ignore {}", o.covered, i.covered))?;
    }
    Ok(format!("{} cells; strict gains: {}", rows.len(), strict.join(", ")))
}

fn saturation() -> Check {
    let names = ["power", "search", "tritype", "selection_sort", "fourballs", "modulus"];
    let bs: Vec<Benchmark> = names.iter().map(|n| bench::by_name(n).unwrap()).collect();
    let rows = bench::run_matrix(&bs, &[Criterion::Dc, Criterion::Cc], &Mode::EXPLORATION, &PipelineConfig::default());
    for m in &rows {
        ensure(m.error.is_none() && m.labels > 0 && m.covered == m.labels, || {
            format!("{} {} {}: {}/{} {:?}", m.program, m.criterion, m.mode, m.covered, m.labels, m.error)
        })?;
    }
    Ok(format!("{} cells at 100%", rows.len()))
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut fixtures: Vec<(String, labelcov::minic::Program, Harness)> = ["tritype", "fourballs", "check"]
        .iter()
        .map(|n| {
            let b = bench::by_name(n).unwrap();
            (b.name, b.program, b.harness)
        })
        .collect();
    let hand = [
        "int f(int a, int b) { int r = 0; if (a > b && b != 0) { r = a / b; } else { if (a == 0 || b < -1) { r = 1; } } return r; }",
        "int f(int a, int b, int c) { int m = a; if (b > m) { m = b; } if (c > m) { m = c; } if (m - a == abs(b)) { m = 0; } return m; }",
        "int f(int a, int b) { int t[3]; t[0] = a; t[1] = b; t[2] = a + b; return t[a] % (b + 1); }",
    ];
    for (i, src) in hand.iter().enumerate() {
        let p = parse(src).map_err(|e| e.to_string())?;
        let h = ["a", "b", "c"].iter().filter(|v| src.contains(&format!("int {v}"))).fold(Harness::new(), |h, v| h.with(v, -3, 3));
        fixtures.push((format!("fixture{}", i + 1), p, h));
    }
    let mut summary = Vec::new();
    for (name, p, h) in &fixtures {
        let d = h.domain(p).map_err(|e| e.to_string())?;
        ensure(d.product() <= 10_000, || format!("{name}: domain {}", d.product()))?;
        let r = explore::<i128>(p, h, &ExploreConfig::default(), None).map_err(|e| e.to_string())?;
        let oracle = buckets(p, h);
        let complete: Vec<&TestCase> = r.tests.iter().filter(|t| t.kind == TestKind::Complete).collect();
        let traces: BTreeSet<_> = complete.iter().map(|t| t.trace.clone()).collect();
        ensure(traces.len() == complete.len(), || format!("{name}: two tests share a path"))?;
        ensure(traces == oracle.normal.keys().cloned().collect(), || format!("{name}: path partition differs"))?;
        for t in &complete {
            ensure(oracle.normal[&t.trace].contains(&t.assignment), || format!("{name}: test {} outside its bucket", t.id))?;
        }

        // Replayer coverage of the explorer suite and of the whole domain.
        for c in matrix_criteria() {
            let ap = annotate(p, &c).map_err(|e| e.to_string())?;
            let rep = Replayer::new(&ap);
            let all: Vec<BTreeMap<String, i64>> = d.iter().collect();
            let suites: [Vec<BTreeMap<String, i64>>; 2] = [complete.iter().map(|t| t.assignment.clone()).collect(), all];
            for inputs in &suites {
                let mut sigma = CoverageStore::in_memory(ap.ids());
                for a in inputs {
                    let t = TestCase { assignment: a.clone(), ..complete_test(&[]) };
                    rep.replay::<i128>(&t, &mut sigma).map_err(|e| e.to_string())?;
                }
                let expected = labels_by_evaluation(&ap, inputs);
                ensure(sigma.covered_ids() == expected, || format!("{name} {c}: replayer {:?} vs {expected:?}", sigma.covered_ids()))?;
            }
        }
        summary.push(format!("{name}:{}", traces.len()));
    }
    within(start, Duration::from_secs(30))?;
    Ok(format!("paths per fixture {}", summary.join(" ")))
}

fn behaviour_preserved() -> Check {
    let mut rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    let mut runs = 0u64;
    for b in bench::builtin() {
        let d = b.harness.domain(&b.program).map_err(|e| e.to_string())?;
        let samples: Vec<BTreeMap<String, i64>> = (0..1000).map(|_| d.decode(rng.next_u64() % d.product())).collect();
        let base: Vec<Outcome<i128>> = samples
            .iter()
            .map(|s| interpret::<i128>(&b.program, &to_inputs(&b.program, s), None, DEFAULT_STEP_LIMIT).map(|e| e.outcome))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for c in matrix_criteria() {
            let ap = annotate(&b.program, &c).map_err(|e| e.to_string())?;
            for mode in [Mode::Ignore, Mode::Naive, Mode::Tight, Mode::Optim, Mode::Replayer] {
                let q = transform(&ap, mode);
                for (s, expected) in samples.iter().zip(&base) {
                    let mut inputs = to_inputs::<i128>(&q, s);
                    for id in q.nondet_ids() {
                        inputs.insert(nondet_name(id), Value::Int(0));
                    }
                    let got = interpret::<i128>(&q, &inputs, None, DEFAULT_STEP_LIMIT).map_err(|e| e.to_string())?.outcome;
                    let expected = match expected {
                        Outcome::Returned(_) if mode.uses_assertions() => Outcome::SilentExited,
                        o => o.clone(),
                    };
                    ensure(got == expected, || format!("{} {c} {mode} on {s:?}: {got:?} vs {expected:?}", b.name))?;
                    runs += 1;
                }
            }
        }
    }
    Ok(format!("{runs} instrumented runs, 0 mismatches"))
}

fn main() {
    let checks: [NamedCheck; 9] = [
        ("power paths and three tests", power_paths),
        ("search MCC gap", search_mcc),
        ("naive exponential, tight linear", path_growth),
        ("commit on success", commit_on_success),
        ("one assertion test per label", ild_uniqueness),
        ("mode dominance", mode_dominance),
        ("DC/CC saturation", saturation),
        ("oracle equivalence", oracle_equivalence),
        ("behaviour preserved", behaviour_preserved),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({why})", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
