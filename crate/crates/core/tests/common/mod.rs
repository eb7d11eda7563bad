#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use labelcov::criteria::AnnotatedProgram;
use labelcov::minic::{interpret, Inputs, LabelHook, Loc, Outcome, Program, Value, DEFAULT_STEP_LIMIT};
use labelcov::symex::Harness;
use proptest::prelude::*;

/// Loop-free programs over inputs `a`, `b`, `c` with locals `x`, `y`. Locals
/// only grow additively so values stay small on the test domain.
pub fn program_src() -> impl Strategy<Value = String> {
    (prop::collection::vec(stmt(2), 1..5), expr(2)).prop_map(|(body, ret)| {
        format!("int f(int a, int b, int c) {{\n  int x = 0;\n  int y = 0;\n{}  return {ret};\n}}\n", body.concat())
    })
}

pub fn harness() -> Harness {
    Harness::new().with("a", -2, 2).with("b", -2, 2).with("c", -2, 2)
}

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("a".to_string()),
        Just("b".to_string()),
        Just("c".to_string()),
        (-2i64..=3).prop_map(|v| if v < 0 { format!("({v})") } else { v.to_string() }),
    ]
}

fn expr(depth: u32) -> BoxedStrategy<String> {
    if depth == 0 {
        return leaf().boxed();
    }
    prop_oneof![
        3 => leaf(),
        2 => (expr(depth - 1), prop::sample::select(vec!["+", "-", "*", "/", "%"]), expr(depth - 1))
            .prop_map(|(l, op, r)| format!("({l} {op} {r})")),
        1 => expr(depth - 1).prop_map(|e| format!("abs({e})")),
    ]
    .boxed()
}

fn operand() -> impl Strategy<Value = String> {
    prop_oneof![3 => expr(1), 1 => Just("x".to_string()), 1 => Just("y".to_string())]
}

fn cond(depth: u32) -> BoxedStrategy<String> {
    let atom = (operand(), prop::sample::select(vec!["<", "<=", ">", ">=", "==", "!="]), operand())
        .prop_map(|(l, op, r)| format!("{l} {op} {r}"));
    if depth == 0 {
        return atom.boxed();
    }
    prop_oneof![
        3 => atom,
        1 => (cond(depth - 1), prop::sample::select(vec!["&&", "||"]), cond(depth - 1))
            .prop_map(|(l, op, r)| format!("({l} {op} {r})")),
        1 => cond(depth - 1).prop_map(|c| format!("!({c})")),
    ]
    .boxed()
}

fn stmt(depth: u32) -> BoxedStrategy<String> {
    let assign = (prop::sample::select(vec!["x", "y"]), any::<bool>(), expr(2)).prop_map(|(v, acc, e)| {
        if acc {
            format!("  {v} = {v} + {e};\n")
        } else {
            format!("  {v} = {e};\n")
        }
    });
    if depth == 0 {
        return assign.boxed();
    }
    prop_oneof![
        2 => assign,
        1 => (cond(2), prop::collection::vec(stmt(depth - 1), 1..3), prop::collection::vec(stmt(depth - 1), 0..3))
            .prop_map(|(c, t, e)| {
                if e.is_empty() {
                    format!("  if ({c}) {{\n{}  }}\n", t.concat())
                } else {
                    format!("  if ({c}) {{\n{}  }} else {{\n{}  }}\n", t.concat(), e.concat())
                }
            }),
    ]
    .boxed()
}

pub fn inputs_of(flat: &BTreeMap<String, i64>) -> Inputs<i128> {
    flat.iter().map(|(k, v)| (k.clone(), Value::Int(*v as i128))).collect()
}

/// Every domain input grouped by decision trace, for normally returning
/// runs; faulting runs are grouped under their fault kind.
pub type Assignment = BTreeMap<String, i64>;

pub struct Buckets {
    pub normal: BTreeMap<Vec<(Loc, bool)>, Vec<Assignment>>,
    pub faulting: usize,
}

pub fn buckets(p: &Program, h: &Harness) -> Buckets {
    let d = h.domain(p).unwrap();
    let mut b = Buckets { normal: BTreeMap::new(), faulting: 0 };
    for input in d.iter() {
        let ex = interpret::<i128>(p, &labelcov::symex::harness::to_inputs(p, &input), None, DEFAULT_STEP_LIMIT).unwrap();
        match ex.outcome {
            Outcome::Returned(_) => b.normal.entry(ex.decisions).or_default().push(input),
            _ => b.faulting += 1,
        }
    }
    b
}

#[derive(Default)]
pub struct TrueLabels(pub BTreeSet<u32>);

impl LabelHook for TrueLabels {
    fn on_label(&mut self, id: u32, truth: bool) {
        if truth {
            self.0.insert(id);
        }
    }
}

/// Labels whose predicate holds at some point of a normal run on one of
/// `inputs`, by direct evaluation on the annotated program.
pub fn labels_by_evaluation(ap: &AnnotatedProgram, inputs: &[BTreeMap<String, i64>]) -> BTreeSet<u32> {
    let mut all = BTreeSet::new();
    for input in inputs {
        let mut hook = TrueLabels::default();
        let ex = interpret::<i128>(
            &ap.program,
            &labelcov::symex::harness::to_inputs(&ap.program, input),
            Some(&mut hook),
            DEFAULT_STEP_LIMIT,
        )
        .unwrap();
        if ex.outcome.is_normal() {
            all.extend(hook.0);
        }
    }
    all
}
