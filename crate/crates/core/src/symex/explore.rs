//! The path explorer.
//!
//! A state owns the set of domain assignments that reach it (its survivors)
//! and symbolic terms for every variable. Branching partitions the survivors;
//! a branch forks when both sides are nonempty. Decisions fork atom by atom,
//! following short-circuit evaluation.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use super::harness::{to_inputs, Domain, Harness, HarnessError};
use super::term::{Conjunct, EvalFault, PathCondition, Term, TermRef, DEFAULT_FEASIBILITY_BUDGET};
use crate::instrument::Mode;
use crate::minic::{
    nondet_name, BinOp, Block, Expr, ExprKind, Inputs, LValue, Loc, Program, RteKind, Stmt, StmtKind, Type, UnOp,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Strategy {
    #[default]
    Dfs,
    Bfs,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Dfs => "dfs",
            Strategy::Bfs => "bfs",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dfs" => Ok(Strategy::Dfs),
            "bfs" => Ok(Strategy::Bfs),
            _ => Err(format!("unknown strategy `{s}` (expected dfs or bfs)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExploreConfig {
    pub strategy: Strategy,
    pub time_budget_ms: u64,
    pub max_paths: u64,
    pub max_steps_per_path: u64,
    /// Emit a complete-path test only if its path reached a branch edge (or a
    /// `__nop`) that no earlier path had reached.
    pub covering_new: bool,
    pub feasibility_budget: u64,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            strategy: Strategy::Dfs,
            time_budget_ms: 10_000,
            max_paths: 1_000_000,
            max_steps_per_path: 100_000,
            covering_new: false,
            feasibility_budget: DEFAULT_FEASIBILITY_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestKind {
    Complete,
    /// Carries the id of the label whose assertion failed.
    AssertErr(u32),
    RteErr(RteKind),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub id: usize,
    /// Entry inputs (array elements as `tab[0]`) and `nondet_<id>` values.
    pub assignment: BTreeMap<String, i64>,
    pub kind: TestKind,
    /// Statements executed on the path.
    pub path_len: u64,
    /// Branch decisions along the path, in the interpreter's format.
    pub trace: Vec<(Loc, bool)>,
}

impl TestCase {
    pub fn inputs<S: Scalar>(&self, p: &Program) -> Inputs<S> {
        to_inputs(p, &self.assignment)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExplorationReport<S> {
    pub tests: Vec<TestCase>,
    /// Path condition of each test, parallel to `tests`.
    pub conditions: Vec<PathCondition<S>>,
    pub paths_complete: u64,
    pub paths_partial: u64,
    pub forks: u64,
    pub solver_calls: u64,
    pub stmts_executed: u64,
    pub assertion_checks: u64,
    /// `__covered` guards that skipped their body.
    pub skipped_checks: u64,
    pub wall_time_ms: u64,
    pub timed_out: bool,
    pub path_limit_hit: bool,
}

impl<S> ExplorationReport<S> {
    pub fn paths(&self) -> u64 {
        self.paths_complete + self.paths_partial
    }
}

/// Observer and coverage oracle attached to an exploration.
pub trait ExploreHook {
    /// Called synchronously for every emitted test.
    fn on_test(&mut self, _test: &TestCase) {}
    /// Answers `__covered(id)` guards.
    fn is_covered(&self, _id: u32) -> bool {
        false
    }
    /// Called once per fork.
    fn on_fork(&mut self) {}
    /// Called whenever an assertion is evaluated, with its label id.
    fn on_assert_check(&mut self, _id: u32) {}
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("the harness domain is empty")]
    InfeasibleHarness,
    #[error("{0}: replayer-only statement in an explored program")]
    ModeMismatch(Loc),
    #[error("{0}: arithmetic overflow in the integer carrier")]
    Overflow(Loc),
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("harness entry `{0}` is not defined")]
    UnknownEntry(String),
}

pub fn explore<S: Scalar>(
    p: &Program,
    h: &Harness,
    cfg: &ExploreConfig,
    hook: Option<&mut dyn ExploreHook>,
) -> Result<ExplorationReport<S>, ExploreError> {
    let program: Cow<Program> = match &h.entry {
        Some(e) if *e != p.entry => {
            if p.function(e).is_none() {
                return Err(ExploreError::UnknownEntry(e.clone()));
            }
            let mut q = p.clone();
            q.entry = e.clone();
            Cow::Owned(q)
        }
        _ => Cow::Borrowed(p),
    };
    let domain = h.domain(&program)?;
    if domain.is_empty() {
        return Err(ExploreError::InfeasibleHarness);
    }
    let mut engine = Engine {
        program: &program,
        domain,
        cfg,
        hook,
        report: ExplorationReport {
            tests: Vec::new(),
            conditions: Vec::new(),
            paths_complete: 0,
            paths_partial: 0,
            forks: 0,
            solver_calls: 0,
            stmts_executed: 0,
            assertion_checks: 0,
            skipped_checks: 0,
            wall_time_ms: 0,
            timed_out: false,
            path_limit_hit: false,
        },
        covered: HashSet::new(),
        nondet_ids: program.nondet_ids(),
        vals: Vec::new(),
    };
    if engine.domain.product() > cfg.feasibility_budget {
        // Too large to enumerate: give up as if out of time.
        engine.report.timed_out = true;
        return Ok(engine.report);
    }
    engine.run()?;
    Ok(engine.report)
}

/// Keeps the tests the given mode reports coverage with: complete paths for
/// Ignore and Naive, assertion failures for Tight and Optim.
pub fn classify_tests(tests: &[TestCase], mode: Mode) -> Vec<TestCase> {
    tests
        .iter()
        .filter(|t| match mode {
            Mode::Ignore | Mode::Naive => t.kind == TestKind::Complete,
            Mode::Tight | Mode::Optim => matches!(t.kind, TestKind::AssertErr(_)),
            Mode::Replayer => false,
        })
        .cloned()
        .collect()
}

#[derive(Debug, Clone)]
enum SymValue<S> {
    Int(TermRef<S>),
    Array(Rc<Vec<TermRef<S>>>),
}

#[derive(Debug, Clone, Copy)]
enum Cont<'p> {
    Stmts(&'p [Stmt], usize),
    PopScope,
    LoopHead(&'p Stmt),
}

#[derive(Debug, Clone)]
enum Target<S> {
    Entry,
    Decl(String),
    Assign(String, Option<TermRef<S>>, Loc),
    Return,
}

#[derive(Debug, Clone)]
struct Frame<'p, S> {
    scopes: Vec<Vec<(String, SymValue<S>)>>,
    conts: Vec<Cont<'p>>,
    target: Target<S>,
}

#[derive(Debug, Clone)]
struct State<'p, S> {
    frames: Vec<Frame<'p, S>>,
    survivors: Rc<Vec<u64>>,
    pc: PathCondition<S>,
    nondet: BTreeMap<u32, bool>,
    trace: Vec<(Loc, bool)>,
    covering: bool,
    /// Coverage items reached by the fork that created this state, recorded
    /// when the state is scheduled.
    pending: Vec<(Loc, bool)>,
    steps: u64,
    guard: Option<u32>,
}

impl<'p, S: Scalar> State<'p, S> {
    fn frame(&mut self) -> &mut Frame<'p, S> {
        self.frames.last_mut().expect("live state has a frame")
    }

    fn lookup(&self, name: &str) -> Result<&SymValue<S>, ExploreError> {
        let frame = self.frames.last().expect("live state has a frame");
        frame
            .scopes
            .iter()
            .rev()
            .flat_map(|s| s.iter().rev())
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .ok_or_else(|| ExploreError::Malformed(format!("unbound variable `{name}`")))
    }

    fn lookup_mut(&mut self, name: &str) -> Result<&mut SymValue<S>, ExploreError> {
        self.frame()
            .scopes
            .iter_mut()
            .rev()
            .flat_map(|s| s.iter_mut().rev())
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .ok_or_else(|| ExploreError::Malformed(format!("unbound variable `{name}`")))
    }

    fn declare(&mut self, name: &str, v: SymValue<S>) {
        self.frame().scopes.last_mut().expect("scope").push((name.to_string(), v));
    }

    fn enter(&mut self, b: &'p Block) {
        let f = self.frame();
        f.scopes.push(Vec::new());
        f.conts.push(Cont::PopScope);
        f.conts.push(Cont::Stmts(&b.stmts, 0));
    }
}

struct FaultCheck<S> {
    cond: TermRef<S>,
    kind: RteKind,
    loc: Loc,
}

enum Step<'p, S> {
    Continue,
    Fork(Vec<State<'p, S>>),
    End,
}

struct Engine<'p, 'k, S> {
    program: &'p Program,
    domain: Domain,
    cfg: &'p ExploreConfig,
    hook: Option<&'k mut dyn ExploreHook>,
    report: ExplorationReport<S>,
    covered: HashSet<(Loc, bool)>,
    nondet_ids: Vec<u32>,
    vals: Vec<S>,
}

fn is_original_decision(cond: &Expr) -> bool {
    !matches!(cond.kind, ExprKind::Guarded(_))
}

impl<'p, 'k, S: Scalar> Engine<'p, 'k, S> {
    fn run(&mut self) -> Result<(), ExploreError> {
        let start = Instant::now();
        let entry = self.program.entry_function();
        let mut params = Vec::new();
        for param in &entry.params {
            let input = |name: &str| {
                self.domain
                    .position(name)
                    .map(|i| Rc::new(Term::Input(i)))
                    .ok_or_else(|| ExploreError::Harness(HarnessError::MissingDomain(name.to_string())))
            };
            let v = match param.ty {
                Type::Int => SymValue::Int(input(&param.name)?),
                Type::IntArray(n) => SymValue::Array(Rc::new(
                    (0..n)
                        .map(|k| input(&super::harness::element_name(&param.name, k)))
                        .collect::<Result<_, _>>()?,
                )),
            };
            params.push((param.name.clone(), v));
        }
        let init = State {
            frames: vec![Frame {
                scopes: vec![params, Vec::new()],
                conts: vec![Cont::Stmts(&entry.body.stmts, 0)],
                target: Target::Entry,
            }],
            survivors: Rc::new((0..self.domain.product()).collect()),
            pc: PathCondition::new(),
            nondet: BTreeMap::new(),
            trace: Vec::new(),
            covering: true,
            pending: Vec::new(),
            steps: 0,
            guard: None,
        };
        let mut work = VecDeque::from([init]);
        loop {
            let next = match self.cfg.strategy {
                Strategy::Dfs => work.pop_back(),
                Strategy::Bfs => work.pop_front(),
            };
            let Some(mut st) = next else { break };
            if start.elapsed().as_millis() as u64 >= self.cfg.time_budget_ms {
                self.report.timed_out = true;
                break;
            }
            if self.report.paths() >= self.cfg.max_paths {
                self.report.path_limit_hit = true;
                break;
            }
            self.mark(&mut st);
            let children = self.advance(st)?;
            match self.cfg.strategy {
                Strategy::Dfs => work.extend(children.into_iter().rev()),
                Strategy::Bfs => work.extend(children),
            }
        }
        self.report.wall_time_ms = start.elapsed().as_millis() as u64;
        if self.report.timed_out {
            self.report.wall_time_ms = self.report.wall_time_ms.max(self.cfg.time_budget_ms);
        }
        Ok(())
    }

    fn mark(&mut self, st: &mut State<'p, S>) {
        for item in std::mem::take(&mut st.pending) {
            if self.covered.insert(item) {
                st.covering = true;
            }
        }
    }

    /// Runs `st` until it ends or forks; returns the children of a fork.
    fn advance(&mut self, mut st: State<'p, S>) -> Result<Vec<State<'p, S>>, ExploreError> {
        loop {
            match self.step(&mut st)? {
                Step::Continue => {}
                Step::End => return Ok(Vec::new()),
                Step::Fork(mut children) => {
                    if children.len() != 1 {
                        return Ok(children);
                    }
                    st = children.pop().expect("one child");
                    self.mark(&mut st);
                }
            }
        }
    }

    fn step(&mut self, st: &mut State<'p, S>) -> Result<Step<'p, S>, ExploreError> {
        let frame = st.frame();
        let Some(cont) = frame.conts.last_mut() else {
            return Err(ExploreError::Malformed("function ended without return".into()));
        };
        match *cont {
            Cont::Stmts(stmts, i) => {
                if i == stmts.len() {
                    frame.conts.pop();
                    return Ok(Step::Continue);
                }
                *cont = Cont::Stmts(stmts, i + 1);
                self.exec(st, &stmts[i])
            }
            Cont::PopScope => {
                frame.conts.pop();
                frame.scopes.pop();
                Ok(Step::Continue)
            }
            Cont::LoopHead(s) => {
                frame.conts.pop();
                if !self.tick(st) {
                    return Ok(Step::End);
                }
                self.loop_decision(st, s)
            }
        }
    }

    /// Counts one statement; false when the path's step budget is exhausted.
    fn tick(&mut self, st: &mut State<'p, S>) -> bool {
        st.steps += 1;
        self.report.stmts_executed += 1;
        if st.steps > self.cfg.max_steps_per_path {
            self.report.paths_partial += 1;
            return false;
        }
        true
    }

    fn fork_event(&mut self, n: usize) {
        for _ in 0..n {
            self.report.forks += 1;
            if let Some(h) = self.hook.as_mut() {
                h.on_fork();
            }
        }
    }

    fn exec(&mut self, st: &mut State<'p, S>, s: &'p Stmt) -> Result<Step<'p, S>, ExploreError> {
        if !self.tick(st) {
            return Ok(Step::End);
        }
        match &s.kind {
            StmtKind::Decl { name, ty, init } => {
                let v = match (ty, init) {
                    (Type::IntArray(n), _) => SymValue::Array(Rc::new(vec![Term::int(0); *n])),
                    (Type::Int, None) => SymValue::Int(Term::int(0)),
                    (Type::Int, Some(e)) => {
                        if let ExprKind::Call(f, args) = &e.kind {
                            return self.call(st, f, args, Target::Decl(name.clone()));
                        }
                        match self.value(st, e)? {
                            Some(t) => SymValue::Int(t),
                            None => return Ok(Step::End),
                        }
                    }
                };
                st.declare(name, v);
                Ok(Step::Continue)
            }
            StmtKind::Assign { target, value } => {
                let idx = match target {
                    LValue::Var(_) => None,
                    LValue::Index(_, ie) => match self.value(st, ie)? {
                        Some(t) => Some(t),
                        None => return Ok(Step::End),
                    },
                };
                let name = target.name().to_string();
                if let ExprKind::Call(f, args) = &value.kind {
                    return self.call(st, f, args, Target::Assign(name, idx, s.loc));
                }
                let Some(v) = self.value(st, value)? else { return Ok(Step::End) };
                self.store(st, &name, idx, v, s.loc)
            }
            StmtKind::If { cond, then_block, else_block } => {
                let leaves = self.decision(st, s, cond)?;
                let children = leaves
                    .into_iter()
                    .map(|(mut c, v)| {
                        if v {
                            c.enter(then_block);
                        } else if let Some(b) = else_block {
                            c.enter(b);
                        }
                        c
                    })
                    .collect();
                Ok(Step::Fork(children))
            }
            StmtKind::While { .. } => self.loop_decision(st, s),
            StmtKind::Return(e) => match e {
                None => self.ret(st, None),
                Some(e) => {
                    if let ExprKind::Call(f, args) = &e.kind {
                        return self.call(st, f, args, Target::Return);
                    }
                    match self.value(st, e)? {
                        Some(t) => self.ret(st, Some(t)),
                        None => Ok(Step::End),
                    }
                }
            },
            StmtKind::Block(b) => {
                st.enter(b);
                Ok(Step::Continue)
            }
            StmtKind::Label { .. } => Ok(Step::Continue),
            StmtKind::Nop => {
                st.pending.push((s.loc, true));
                self.mark(st);
                Ok(Step::Continue)
            }
            StmtKind::Assert(e) => self.assert(st, s, e),
            StmtKind::SilentExit => {
                self.report.paths_partial += 1;
                Ok(Step::End)
            }
            StmtKind::NondetGuard { id, body } => {
                let mut taken = st.clone();
                taken.nondet.insert(*id, true);
                taken.guard = Some(*id);
                taken.trace.push((s.loc, true));
                taken.enter(body);
                let mut skipped = st.clone();
                skipped.nondet.insert(*id, false);
                skipped.trace.push((s.loc, false));
                skipped.covering = false;
                self.fork_event(1);
                Ok(Step::Fork(vec![taken, skipped]))
            }
            StmtKind::CoveredGuard { id, body } => {
                if self.hook.as_ref().is_some_and(|h| h.is_covered(*id)) {
                    self.report.skipped_checks += 1;
                } else {
                    st.enter(body);
                }
                Ok(Step::Continue)
            }
            StmtKind::SetCovered(_) => Err(ExploreError::ModeMismatch(s.loc)),
        }
    }

    fn loop_decision(&mut self, st: &mut State<'p, S>, s: &'p Stmt) -> Result<Step<'p, S>, ExploreError> {
        let StmtKind::While { cond, body } = &s.kind else { unreachable!("loop head is a while") };
        let leaves = self.decision(st, s, cond)?;
        let children = leaves
            .into_iter()
            .map(|(mut c, v)| {
                if v {
                    c.frame().conts.push(Cont::LoopHead(s));
                    c.enter(body);
                }
                c
            })
            .collect();
        Ok(Step::Fork(children))
    }

    /// Splits `st` on a branch condition. Children are ordered true-first;
    /// the first keeps the covering flag.
    fn decision(
        &mut self,
        st: &mut State<'p, S>,
        s: &Stmt,
        cond: &Expr,
    ) -> Result<Vec<(State<'p, S>, bool)>, ExploreError> {
        let original = is_original_decision(cond);
        let mut leaves = self.decide(st.clone(), cond, original)?;
        for (i, (c, v)) in leaves.iter_mut().enumerate() {
            c.trace.push((s.loc, *v));
            if original {
                c.pending.push((s.loc, *v));
            }
            if i > 0 {
                c.covering = false;
            }
        }
        self.fork_event(leaves.len().saturating_sub(1));
        Ok(leaves)
    }

    fn decide(&mut self, st: State<'p, S>, e: &Expr, original: bool) -> Result<Vec<(State<'p, S>, bool)>, ExploreError> {
        match &e.kind {
            ExprKind::Unary(UnOp::Not, x) => {
                Ok(self.decide(st, x, original)?.into_iter().map(|(s, v)| (s, !v)).collect())
            }
            ExprKind::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
                let mut out = Vec::new();
                for (s, v) in self.decide(st, l, original)? {
                    if v == (*op == BinOp::Or) {
                        out.push((s, v));
                    } else {
                        out.extend(self.decide(s, r, original)?);
                    }
                }
                Ok(out)
            }
            _ => {
                let mut st = st;
                let mut faults = Vec::new();
                let t = self.sym_eval(&st, e, None, &mut faults)?;
                if !self.exclude_faults(&mut st, faults)? {
                    return Ok(Vec::new());
                }
                let (yes, no) = self.split(&st.survivors, &t, e.loc)?;
                let both = !yes.is_empty() && !no.is_empty();
                let mut out = Vec::new();
                for (part, v) in [(yes, true), (no, false)] {
                    if part.is_empty() {
                        continue;
                    }
                    let mut c = st.clone();
                    c.survivors = Rc::new(part);
                    c.trace.push((e.loc, v));
                    if original {
                        c.pending.push((e.loc, v));
                    }
                    if both {
                        c.pc.conjuncts.push(Conjunct::Branch { term: t.clone(), polarity: v });
                        c.pc.fork_locs.push(e.loc);
                    }
                    out.push((c, v));
                }
                Ok(out)
            }
        }
    }

    fn assert(&mut self, st: &mut State<'p, S>, s: &Stmt, e: &Expr) -> Result<Step<'p, S>, ExploreError> {
        let id = st.guard.unwrap_or(0);
        self.report.assertion_checks += 1;
        if let Some(h) = self.hook.as_mut() {
            h.on_assert_check(id);
        }
        let mut faults = Vec::new();
        let t = self.sym_eval(st, e, None, &mut faults)?;
        if !self.exclude_faults(st, faults)? {
            return Ok(Step::End);
        }
        let (ok, fail) = self.split(&st.survivors, &t, e.loc)?;
        if !fail.is_empty() {
            let mut pc = st.pc.clone();
            pc.conjuncts.push(Conjunct::Branch { term: t.clone(), polarity: false });
            pc.fork_locs.push(s.loc);
            let mut trace = st.trace.clone();
            trace.push((s.loc, false));
            self.report.paths_partial += 1;
            self.emit(st, fail[0], pc, TestKind::AssertErr(id), trace);
            if ok.is_empty() {
                return Ok(Step::End);
            }
            self.fork_event(1);
            st.pc.conjuncts.push(Conjunct::Branch { term: t, polarity: true });
            st.pc.fork_locs.push(s.loc);
        }
        st.survivors = Rc::new(ok);
        st.trace.push((s.loc, true));
        Ok(Step::Continue)
    }

    fn call(
        &mut self,
        st: &mut State<'p, S>,
        name: &str,
        args: &[Expr],
        target: Target<S>,
    ) -> Result<Step<'p, S>, ExploreError> {
        let program = self.program;
        let callee = program.function(name).ok_or_else(|| ExploreError::Malformed(format!("undefined function `{name}`")))?;
        let mut params = Vec::new();
        for (param, arg) in callee.params.iter().zip(args) {
            let v = match param.ty {
                Type::Int => match self.value(st, arg)? {
                    Some(t) => SymValue::Int(t),
                    None => return Ok(Step::End),
                },
                Type::IntArray(_) => match &arg.kind {
                    ExprKind::Var(n) => st.lookup(n)?.clone(),
                    _ => return Err(ExploreError::Malformed("array argument must be a variable".into())),
                },
            };
            params.push((param.name.clone(), v));
        }
        st.frames.push(Frame {
            scopes: vec![params, Vec::new()],
            conts: vec![Cont::Stmts(&callee.body.stmts, 0)],
            target,
        });
        Ok(Step::Continue)
    }

    fn ret(&mut self, st: &mut State<'p, S>, v: Option<TermRef<S>>) -> Result<Step<'p, S>, ExploreError> {
        let frame = st.frames.pop().expect("live state has a frame");
        let value = || v.clone().ok_or_else(|| ExploreError::Malformed("missing return value".into()));
        match frame.target {
            Target::Entry => {
                self.report.paths_complete += 1;
                if !self.cfg.covering_new || st.covering {
                    let first = st.survivors[0];
                    self.emit(st, first, st.pc.clone(), TestKind::Complete, st.trace.clone());
                }
                Ok(Step::End)
            }
            Target::Decl(name) => {
                st.declare(&name, SymValue::Int(value()?));
                Ok(Step::Continue)
            }
            Target::Assign(name, idx, loc) => self.store(st, &name, idx, value()?, loc),
            Target::Return => self.ret(st, v),
        }
    }

    fn store(
        &mut self,
        st: &mut State<'p, S>,
        name: &str,
        idx: Option<TermRef<S>>,
        v: TermRef<S>,
        loc: Loc,
    ) -> Result<Step<'p, S>, ExploreError> {
        let Some(it) = idx else {
            match st.lookup_mut(name)? {
                SymValue::Int(slot) => *slot = v,
                SymValue::Array(_) => return Err(ExploreError::Malformed(format!("array `{name}` assigned as scalar"))),
            }
            return Ok(Step::Continue);
        };
        let len = match st.lookup(name)? {
            SymValue::Array(xs) => xs.len(),
            SymValue::Int(_) => return Err(ExploreError::Malformed(format!("`{name}` is not an array"))),
        };
        let check = FaultCheck { cond: out_of_bounds(&it, len), kind: RteKind::IndexOutOfBounds, loc };
        if !self.exclude_faults(st, vec![check])? {
            return Ok(Step::End);
        }
        let SymValue::Array(xs) = st.lookup_mut(name)? else { unreachable!() };
        let xs = Rc::make_mut(xs);
        match it.as_lit().and_then(|k| k.to_usize()) {
            Some(k) => xs[k] = v,
            None => {
                for (j, x) in xs.iter_mut().enumerate() {
                    let hit = Term::binary(BinOp::Eq, it.clone(), Term::int(j as i64));
                    *x = Term::ite(hit, v.clone(), x.clone());
                }
            }
        }
        Ok(Step::Continue)
    }

    /// Evaluates `e` in `st`, first splitting off every input that faults.
    /// `None` when no survivor gets through.
    fn value(&mut self, st: &mut State<'p, S>, e: &Expr) -> Result<Option<TermRef<S>>, ExploreError> {
        let mut faults = Vec::new();
        let t = self.sym_eval(st, e, None, &mut faults)?;
        Ok(self.exclude_faults(st, faults)?.then_some(t))
    }

    /// Emits a runtime-error test for each feasible fault condition (in
    /// evaluation order) and restricts `st` to the non-faulting inputs.
    fn exclude_faults(&mut self, st: &mut State<'p, S>, faults: Vec<FaultCheck<S>>) -> Result<bool, ExploreError> {
        for f in faults {
            let (bad, good) = self.split(&st.survivors, &f.cond, f.loc)?;
            if bad.is_empty() {
                continue;
            }
            let mut pc = st.pc.clone();
            pc.conjuncts.push(Conjunct::Fault { term: f.cond.clone(), kind: f.kind, loc: f.loc });
            pc.fork_locs.push(f.loc);
            self.report.paths_partial += 1;
            self.emit(st, bad[0], pc, TestKind::RteErr(f.kind), st.trace.clone());
            if good.is_empty() {
                return Ok(false);
            }
            self.fork_event(1);
            st.pc.conjuncts.push(Conjunct::NoFault { term: f.cond });
            st.pc.fork_locs.push(f.loc);
            st.survivors = Rc::new(good);
        }
        Ok(true)
    }

    /// Partitions `survivors` by the truth of `t`, preserving order.
    fn split(&mut self, survivors: &[u64], t: &TermRef<S>, loc: Loc) -> Result<(Vec<u64>, Vec<u64>), ExploreError> {
        if let Some(v) = t.as_lit() {
            return Ok(if v.truthy() { (survivors.to_vec(), Vec::new()) } else { (Vec::new(), survivors.to_vec()) });
        }
        self.report.solver_calls += 1;
        let (mut yes, mut no) = (Vec::new(), Vec::new());
        let mut vals = std::mem::take(&mut self.vals);
        for &idx in survivors {
            self.domain.decode_into(idx, &mut vals);
            match t.eval(&vals) {
                Ok(v) if v.truthy() => yes.push(idx),
                Ok(_) => no.push(idx),
                Err(EvalFault::Overflow) => return Err(ExploreError::Overflow(loc)),
                Err(EvalFault::Rte(k)) => {
                    return Err(ExploreError::Malformed(format!("{loc}: unguarded {k} in a path constraint")))
                }
            }
        }
        self.vals = vals;
        Ok((yes, no))
    }

    fn emit(&mut self, st: &State<'p, S>, model: u64, pc: PathCondition<S>, kind: TestKind, trace: Vec<(Loc, bool)>) {
        let mut assignment = self.domain.decode(model);
        for id in &self.nondet_ids {
            assignment.insert(nondet_name(*id), st.nondet.get(id).map_or(0, |b| i64::from(*b)));
        }
        let test = TestCase { id: self.report.tests.len() + 1, assignment, kind, path_len: st.steps, trace };
        if let Some(h) = self.hook.as_mut() {
            h.on_test(&test);
        }
        self.report.tests.push(test);
        self.report.conditions.push(pc);
    }

    fn sym_eval(
        &self,
        st: &State<'p, S>,
        e: &Expr,
        guard: Option<&TermRef<S>>,
        faults: &mut Vec<FaultCheck<S>>,
    ) -> Result<TermRef<S>, ExploreError> {
        Ok(match &e.kind {
            ExprKind::Int(v) => Term::int(*v),
            ExprKind::Var(n) => match st.lookup(n)? {
                SymValue::Int(t) => t.clone(),
                SymValue::Array(_) => return Err(ExploreError::Malformed(format!("array `{n}` read as scalar"))),
            },
            ExprKind::Index(n, i) => {
                let mut inner = Vec::new();
                let it = self.sym_eval(st, i, guard, &mut inner)?;
                let SymValue::Array(xs) = st.lookup(n)? else {
                    return Err(ExploreError::Malformed(format!("`{n}` is not an array")));
                };
                let xs = xs.clone();
                faults.extend(inner);
                push_fault(faults, guard, out_of_bounds(&it, xs.len()), RteKind::IndexOutOfBounds, e.loc);
                Term::select(xs, it)
            }
            ExprKind::Unary(op, x) => Term::unary(*op, self.sym_eval(st, x, guard, faults)?),
            ExprKind::Abs(x) => Term::abs(self.sym_eval(st, x, guard, faults)?),
            ExprKind::Guarded(x) => Term::guarded(self.sym_eval(st, x, guard, &mut Vec::new())?),
            ExprKind::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
                let lt = self.sym_eval(st, l, guard, faults)?;
                let reach = if *op == BinOp::And { lt.clone() } else { Term::unary(UnOp::Not, lt.clone()) };
                let g2 = match guard {
                    Some(g) => Term::binary(BinOp::And, g.clone(), reach),
                    None => reach,
                };
                let rt = self.sym_eval(st, r, Some(&g2), faults)?;
                Term::binary(*op, lt, rt)
            }
            ExprKind::Binary(op, l, r) => {
                let a = self.sym_eval(st, l, guard, faults)?;
                let b = self.sym_eval(st, r, guard, faults)?;
                let kind = match op {
                    BinOp::Div => Some(RteKind::DivByZero),
                    BinOp::Rem => Some(RteKind::ModByZero),
                    _ => None,
                };
                if let Some(kind) = kind {
                    push_fault(faults, guard, Term::binary(BinOp::Eq, b.clone(), Term::int(0)), kind, e.loc);
                }
                Term::binary(*op, a, b)
            }
            ExprKind::Call(..) => return Err(ExploreError::Malformed(format!("{}: nested call", e.loc))),
        })
    }
}

/// Records `cond` as a fault check, restricted to inputs that reach it.
fn push_fault<S: Scalar>(
    faults: &mut Vec<FaultCheck<S>>,
    guard: Option<&TermRef<S>>,
    cond: TermRef<S>,
    kind: RteKind,
    loc: Loc,
) {
    let cond = match guard {
        Some(g) => Term::binary(BinOp::And, g.clone(), cond),
        None => cond,
    };
    if cond.as_lit().is_none_or(|v| v.truthy()) {
        faults.push(FaultCheck { cond, kind, loc });
    }
}

fn out_of_bounds<S: Scalar>(it: &TermRef<S>, len: usize) -> TermRef<S> {
    let low = Term::binary(BinOp::Lt, it.clone(), Term::int(0));
    let high = Term::binary(BinOp::Ge, it.clone(), Term::int(len as i64));
    Term::binary(BinOp::Or, low, high)
}
