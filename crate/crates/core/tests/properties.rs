mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{buckets, harness, labels_by_evaluation, program_src, TrueLabels};
use labelcov::bench;
use labelcov::coverage::{greedy_reduce, run_pipeline, CoverageStore, PipelineConfig, Replayer};
use labelcov::criteria::{annotate, strip, Criterion, WmOp};
use labelcov::instrument::{transform, Mode};
use labelcov::minic::{interpret, parse, program_to_string, Outcome, StmtKind, DEFAULT_STEP_LIMIT};
use labelcov::symex::{explore, ExploreConfig, Strategy as Search, TestCase, TestKind};
use proptest::prelude::*;

fn criteria() -> Vec<Criterion> {
    vec![Criterion::Dc, Criterion::Cc, Criterion::Mcc, Criterion::wm(&WmOp::ALL), Criterion::Limit(1)]
}

fn as_tests(inputs: &[BTreeMap<String, i64>]) -> Vec<TestCase> {
    inputs
        .iter()
        .enumerate()
        .map(|(i, a)| TestCase { id: i + 1, assignment: a.clone(), kind: TestKind::Complete, path_len: 0, trace: vec![] })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn print_parse_round_trip(src in program_src()) {
        let p = parse(&src).unwrap();
        let printed = program_to_string(&p);
        prop_assert_eq!(program_to_string(&parse(&printed).unwrap()), printed);
    }

    #[test]
    fn strip_undoes_annotate(src in program_src()) {
        let p = parse(&src).unwrap();
        for c in criteria() {
            let ap = annotate(&p, &c).unwrap();
            prop_assert_eq!(&strip(&ap).functions, &p.functions);
            let printed = ap.source();
            prop_assert_eq!(program_to_string(&strip(&ap)), program_to_string(&p), "{}", printed);
        }
    }

    #[test]
    fn instrumentation_preserves_behaviour(src in program_src(), a in -6i64..6, b in -6i64..6, c in -6i64..6) {
        let p = parse(&src).unwrap();
        let input = common::inputs_of(&BTreeMap::from([("a".into(), a), ("b".into(), b), ("c".into(), c)]));
        let base = interpret::<i128>(&p, &input, None, DEFAULT_STEP_LIMIT).unwrap().outcome;
        for crit in criteria() {
            let ap = annotate(&p, &crit).unwrap();
            for mode in [Mode::Ignore, Mode::Naive, Mode::Tight, Mode::Optim, Mode::Replayer] {
                let q = transform(&ap, mode);
                let mut full = input.clone();
                for id in q.nondet_ids() {
                    full.insert(labelcov::minic::nondet_name(id), labelcov::minic::Value::Int(0));
                }
                let got = interpret::<i128>(&q, &full, None, DEFAULT_STEP_LIMIT).unwrap().outcome;
                let expected = match (&base, mode.uses_assertions()) {
                    (Outcome::Returned(_), true) => Outcome::SilentExited,
                    _ => base.clone(),
                };
                prop_assert_eq!(got, expected, "{} {}", crit, mode);
            }
        }
    }

    #[test]
    fn complete_paths_match_input_buckets(src in program_src()) {
        let p = parse(&src).unwrap();
        let h = harness();
        let r = explore::<i128>(&p, &h, &ExploreConfig::default(), None).unwrap();
        let oracle = buckets(&p, &h);
        let traces: BTreeSet<_> = r.tests.iter().filter(|t| t.kind == TestKind::Complete).map(|t| t.trace.clone()).collect();
        prop_assert_eq!(traces.len() as u64, r.paths_complete);
        prop_assert_eq!(traces, oracle.normal.keys().cloned().collect::<BTreeSet<_>>());
        for t in &r.tests {
            let ex = interpret::<i128>(&p, &t.inputs(&p), None, DEFAULT_STEP_LIMIT).unwrap();
            match t.kind {
                TestKind::Complete => prop_assert!(ex.outcome.is_normal()),
                TestKind::RteErr(k) => {
                    let same = matches!(ex.outcome, Outcome::Rte { kind, .. } if kind == k);
                    prop_assert!(same);
                }
                TestKind::AssertErr(_) => prop_assert!(false, "no assertions in plain programs"),
            }
        }
        prop_assert_eq!(oracle.faulting == 0, r.tests.iter().all(|t| t.kind == TestKind::Complete));
    }

    #[test]
    fn dc_coverage_is_branch_coverage(src in program_src()) {
        let p = parse(&src).unwrap();
        let ap = annotate(&p, &Criterion::Dc).unwrap();
        let all: Vec<_> = harness().domain(&p).unwrap().iter().collect();
        let mut edges = BTreeSet::new();
        for input in &all {
            let ex = interpret::<i128>(&p, &common::inputs_of(input), None, DEFAULT_STEP_LIMIT).unwrap();
            if ex.outcome.is_normal() {
                edges.extend(ex.decisions);
            }
        }
        let if_locs: BTreeSet<_> = p.functions.iter().flat_map(|f| f.body.walk()).filter(|s| matches!(s.kind, StmtKind::If { .. })).map(|s| s.loc).collect();
        let mut sigma = CoverageStore::in_memory(ap.ids());
        let suite = greedy_reduce::<i128>(&Replayer::new(&ap), &as_tests(&all), &mut sigma).unwrap();
        for l in &ap.labels {
            prop_assert!(if_locs.contains(&l.loc));
            let outcome = l.note.ends_with("true");
            prop_assert_eq!(suite.per_label[&l.id], edges.contains(&(l.loc, outcome)), "label {}", l.id);
        }
        prop_assert_eq!(suite.covered_ids(), labels_by_evaluation(&ap, &all));
    }

    #[test]
    fn mcc_coverage_determines_cc_coverage(src in program_src(), a in -2i64..=2, b in -2i64..=2, c in -2i64..=2) {
        let p = parse(&src).unwrap();
        let cc = annotate(&p, &Criterion::Cc).unwrap();
        let mcc = annotate(&p, &Criterion::Mcc).unwrap();
        let input = common::inputs_of(&BTreeMap::from([("a".into(), a), ("b".into(), b), ("c".into(), c)]));
        let mut seen_cc = TrueLabels::default();
        let mut seen_mcc = TrueLabels::default();
        interpret::<i128>(&cc.program, &input, Some(&mut seen_cc), DEFAULT_STEP_LIMIT).unwrap();
        interpret::<i128>(&mcc.program, &input, Some(&mut seen_mcc), DEFAULT_STEP_LIMIT).unwrap();
        let mut implied = BTreeSet::new();
        for l in mcc.labels.iter().filter(|l| seen_mcc.0.contains(&l.id)) {
            let atoms: Vec<_> = cc.labels.iter().filter(|k| k.loc == l.loc).collect();
            for (i, truth) in l.note.chars().enumerate() {
                implied.insert(atoms[2 * i + usize::from(truth == 'F')].id);
            }
        }
        // When every atom is defined exactly one MCC vector holds; decisions
        // with a faulting atom make every vector false and are left out.
        let decided: BTreeSet<_> = mcc.labels.iter().filter(|l| seen_mcc.0.contains(&l.id)).map(|l| l.loc).collect();
        let seen: BTreeSet<u32> = cc.labels.iter().filter(|k| decided.contains(&k.loc) && seen_cc.0.contains(&k.id)).map(|k| k.id).collect();
        prop_assert_eq!(implied, seen);
    }

    #[test]
    fn covering_new_keeps_only_new_edges_under_dfs(src in program_src()) {
        let p = parse(&src).unwrap();
        let cfg = ExploreConfig { covering_new: true, ..Default::default() };
        let r = explore::<i128>(&p, &harness(), &cfg, None).unwrap();
        let all = explore::<i128>(&p, &harness(), &ExploreConfig::default(), None).unwrap();
        prop_assert_eq!(r.paths_complete, all.paths_complete);
        // Reaching the entry counts as new code, so the first test needs no
        // branch edge.
        let mut seen: Option<BTreeSet<_>> = None;
        for t in r.tests.iter().filter(|t| t.kind == TestKind::Complete) {
            if let Some(seen) = &seen {
                prop_assert!(t.trace.iter().any(|e| !seen.contains(e)), "test {} adds nothing", t.id);
            }
            seen.get_or_insert_with(BTreeSet::new).extend(t.trace.iter().copied());
        }
        let every_edge: BTreeSet<_> = all.tests.iter().filter(|t| t.kind == TestKind::Complete).flat_map(|t| t.trace.iter().copied()).collect();
        let kept_edges: BTreeSet<_> = r.tests.iter().filter(|t| t.kind == TestKind::Complete).flat_map(|t| t.trace.iter().copied()).collect();
        prop_assert!(kept_edges.is_subset(&every_edge));
    }

    #[test]
    fn covering_new_under_bfs_credits_a_first_reach(src in program_src()) {
        let p = parse(&src).unwrap();
        let cfg = ExploreConfig { covering_new: true, strategy: Search::Bfs, ..Default::default() };
        let r = explore::<i128>(&p, &harness(), &cfg, None).unwrap();
        // Every edge reached by some complete path lies on at least one kept test.
        let all = explore::<i128>(&p, &harness(), &ExploreConfig { strategy: Search::Bfs, ..Default::default() }, None).unwrap();
        let complete = |ts: &[TestCase]| -> BTreeSet<_> { ts.iter().filter(|t| t.kind == TestKind::Complete).flat_map(|t| t.trace.iter().copied()).collect() };
        let reached_only_by_complete: BTreeSet<_> = {
            let partial: BTreeSet<_> = all.tests.iter().filter(|t| t.kind != TestKind::Complete).flat_map(|t| t.trace.iter().copied()).collect();
            complete(&all.tests).difference(&partial).copied().collect()
        };
        let kept = complete(&r.tests);
        prop_assert!(reached_only_by_complete.is_subset(&kept));
    }

    #[test]
    fn exploration_is_deterministic(src in program_src()) {
        let p = parse(&src).unwrap();
        let ap = annotate(&p, &Criterion::Mcc).unwrap();
        let q = transform(&ap, Mode::Tight);
        let one = explore::<i128>(&q, &harness(), &ExploreConfig::default(), None).unwrap();
        let two = explore::<i128>(&q, &harness(), &ExploreConfig::default(), None).unwrap();
        prop_assert_eq!(one.tests, two.tests);
        prop_assert_eq!(one.conditions, two.conditions);
    }
}

#[test]
fn benchmark_tests_follow_their_paths() {
    for b in bench::builtin() {
        let r = explore::<i128>(&b.program, &b.harness, &ExploreConfig::default(), None).unwrap();
        assert!(!r.timed_out, "{}", b.name);
        for t in &r.tests {
            let ex = interpret::<i128>(&b.program, &t.inputs(&b.program), None, DEFAULT_STEP_LIMIT).unwrap();
            assert_eq!(ex.decisions, t.trace, "{} test {}", b.name, t.id);
            match t.kind {
                TestKind::Complete => assert!(ex.outcome.is_normal()),
                TestKind::RteErr(k) => assert!(matches!(ex.outcome, Outcome::Rte { kind, .. } if kind == k)),
                TestKind::AssertErr(_) => unreachable!(),
            }
        }
    }
}

#[test]
fn assertion_tests_cover_their_label() {
    for b in bench::builtin() {
        for c in [Criterion::Mcc, Criterion::wm(&WmOp::ALL)] {
            let ap = annotate(&b.program, &c).unwrap();
            let q = transform(&ap, Mode::Tight);
            let r = explore::<i128>(&q, &b.harness, &ExploreConfig::default(), None).unwrap();
            for t in &r.tests {
                let TestKind::AssertErr(id) = t.kind else { continue };
                let mut seen = TrueLabels::default();
                interpret::<i128>(&ap.program, &t.inputs(&ap.program), Some(&mut seen), DEFAULT_STEP_LIMIT).unwrap();
                assert!(seen.0.contains(&id), "{} {c}: label {id}", b.name);
            }
        }
    }
}

#[test]
fn strategies_reach_the_same_coverage() {
    for b in bench::builtin() {
        for c in [Criterion::Dc, Criterion::Cc, Criterion::Mcc, Criterion::wm(&WmOp::ALL)] {
            let ap = annotate(&b.program, &c).unwrap();
            for mode in [Mode::Tight, Mode::Optim] {
                let run = |s| {
                    let cfg = PipelineConfig { explore: ExploreConfig { strategy: s, ..Default::default() }, ..Default::default() };
                    run_pipeline::<i128>(&ap, &b.harness, mode, &cfg).unwrap().suite.per_label
                };
                assert_eq!(run(Search::Dfs), run(Search::Bfs), "{} {c} {mode}", b.name);
            }
        }
    }
}

#[test]
fn matrix_is_reproducible() {
    let bs = bench::builtin();
    let cs = [Criterion::Dc, Criterion::Mcc];
    let modes = [Mode::Ignore, Mode::Optim];
    let strip_time = |mut rows: Vec<bench::Metrics>| {
        for r in &mut rows {
            r.time_ms = 0;
        }
        rows
    };
    let one = strip_time(bench::run_matrix(&bs, &cs, &modes, &PipelineConfig::default()));
    let two = strip_time(bench::run_matrix(&bs, &cs, &modes, &PipelineConfig::default()));
    assert_eq!(one, two);
}

#[test]
fn pipeline_keeps_valid_tests() {
    for b in bench::builtin() {
        let ap = annotate(&b.program, &Criterion::Mcc).unwrap();
        let replayer = Replayer::new(&ap);
        for mode in Mode::EXPLORATION {
            let r = run_pipeline::<i128>(&ap, &b.harness, mode, &PipelineConfig::default()).unwrap();
            let mut union = BTreeSet::new();
            for t in &r.suite.kept {
                let (buf, outcome) = replayer.run::<i128>(t).unwrap();
                assert!(outcome.is_normal());
                union.extend(buf.staged);
            }
            assert_eq!(union, r.suite.covered_ids(), "{} {mode}", b.name);
            assert!(r.suite.kept.len() <= r.suite.generated.len());
        }
    }
}
