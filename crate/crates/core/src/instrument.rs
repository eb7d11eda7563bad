//! Label instrumentation: turns an annotated program into something the
//! explorer or the replayer can run.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::criteria::{strip, AnnotatedProgram};
use crate::minic::{Block, Expr, Loc, Program, Stmt, StmtKind, Type};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Ignore,
    Naive,
    Tight,
    Optim,
    Replayer,
}

impl Mode {
    pub const EXPLORATION: [Mode; 4] = [Mode::Ignore, Mode::Naive, Mode::Tight, Mode::Optim];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Ignore => "ignore",
            Mode::Naive => "naive",
            Mode::Tight => "tight",
            Mode::Optim => "optim",
            Mode::Replayer => "replayer",
        }
    }

    /// Tight and Optim report label hits through assertion failures.
    pub fn uses_assertions(self) -> bool {
        matches!(self, Mode::Tight | Mode::Optim)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown mode `{0}` (expected ignore, naive, tight, optim or replayer)")]
pub struct ModeParseError(pub String);

impl FromStr for Mode {
    type Err = ModeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Mode::Ignore, Mode::Naive, Mode::Tight, Mode::Optim, Mode::Replayer]
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ModeParseError(s.to_string()))
    }
}

/// Name of the temporary that holds the entry function's return value while
/// the trailing silent exit runs.
pub const RET_TEMP: &str = "__ret";

pub fn transform(ap: &AnnotatedProgram, mode: Mode) -> Program {
    let mut p = strip_or_keep(ap, mode);
    if mode == Mode::Ignore {
        return p;
    }
    let mut seq = p.next_seq;
    let mut fresh = |near: Loc| {
        let l = Loc::new(near.line, near.col, seq);
        seq += 1;
        l
    };
    p.visit_blocks_mut(&mut |b| {
        for s in &mut b.stmts {
            let StmtKind::Label { id, predicate } = &s.kind else { continue };
            let (id, at) = (*id, s.loc);
            let guarded = Expr::guarded(predicate.loc, predicate.clone());
            let block = |stmts: Vec<Stmt>, loc| Block::new(loc, stmts);
            let kind = match mode {
                Mode::Naive => StmtKind::If {
                    cond: guarded,
                    then_block: block(vec![Stmt::new(fresh(at), StmtKind::Nop)], fresh(at)),
                    else_block: None,
                },
                Mode::Replayer => StmtKind::If {
                    cond: guarded,
                    then_block: block(vec![Stmt::new(fresh(at), StmtKind::SetCovered(id))], fresh(at)),
                    else_block: None,
                },
                Mode::Tight | Mode::Optim => {
                    let assert = Stmt::new(fresh(at), StmtKind::Assert(Expr::not(fresh(at), guarded)));
                    let check = if mode == Mode::Optim {
                        let body = block(vec![assert], fresh(at));
                        Stmt::new(fresh(at), StmtKind::CoveredGuard { id, body })
                    } else {
                        assert
                    };
                    let exit = Stmt::new(fresh(at), StmtKind::SilentExit);
                    StmtKind::NondetGuard { id, body: block(vec![check, exit], fresh(at)) }
                }
                Mode::Ignore => unreachable!(),
            };
            s.kind = kind;
        }
    });
    if mode.uses_assertions() {
        let entry = p.entry.clone();
        let f = p.functions.iter_mut().find(|f| f.name == entry).expect("entry exists");
        silence_returns(&mut f.body, &mut fresh);
    }
    p.next_seq = seq;
    p
}

fn strip_or_keep(ap: &AnnotatedProgram, mode: Mode) -> Program {
    if mode == Mode::Ignore {
        strip(ap)
    } else {
        ap.program.clone()
    }
}

/// Rewrites `return e;` into `{ int __ret = e; __silent_exit(); return __ret; }`.
fn silence_returns(b: &mut Block, fresh: &mut impl FnMut(Loc) -> Loc) {
    for s in &mut b.stmts {
        if let StmtKind::Return(e) = &s.kind {
            let at = s.loc;
            let exit = Stmt::new(fresh(at), StmtKind::SilentExit);
            let stmts = match e {
                None => vec![exit, Stmt::new(fresh(at), StmtKind::Return(None))],
                Some(e) => vec![
                    Stmt::new(
                        fresh(at),
                        StmtKind::Decl { name: RET_TEMP.into(), ty: Type::Int, init: Some(e.clone()) },
                    ),
                    exit,
                    Stmt::new(fresh(at), StmtKind::Return(Some(Expr::var(fresh(at), RET_TEMP)))),
                ],
            };
            // The original statement keeps its location as the wrapping block.
            s.kind = StmtKind::Block(Block::new(fresh(at), stmts));
            continue;
        }
        for inner in s.blocks_mut() {
            silence_returns(inner, fresh);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathCountError {
    #[error("{0}: loop needs an unroll bound")]
    UnboundedLoop(Loc),
}

/// Statement-level paths through the entry function, saturating at `max`.
///
/// Assertions do not fork and calls are opaque; each loop runs 0 to `unroll`
/// iterations. Both normally ending and exiting paths count.
pub fn count_static_paths(p: &Program, max: u64, unroll: Option<u32>) -> Result<u64, PathCountError> {
    let (cont, term) = seq_paths(&p.entry_function().body.stmts, unroll)?;
    Ok(cont.saturating_add(term).min(max))
}

fn seq_paths(stmts: &[Stmt], unroll: Option<u32>) -> Result<(u64, u64), PathCountError> {
    let (mut cont, mut term) = (1u64, 0u64);
    for s in stmts {
        let (c, t) = stmt_paths(s, unroll)?;
        term = term.saturating_add(cont.saturating_mul(t));
        cont = cont.saturating_mul(c);
    }
    Ok((cont, term))
}

fn stmt_paths(s: &Stmt, unroll: Option<u32>) -> Result<(u64, u64), PathCountError> {
    Ok(match &s.kind {
        StmtKind::Return(_) | StmtKind::SilentExit => (0, 1),
        StmtKind::Block(b) => seq_paths(&b.stmts, unroll)?,
        StmtKind::If { then_block, else_block, .. } => {
            let (c1, t1) = seq_paths(&then_block.stmts, unroll)?;
            let (c2, t2) = match else_block {
                Some(b) => seq_paths(&b.stmts, unroll)?,
                None => (1, 0),
            };
            (c1.saturating_add(c2), t1.saturating_add(t2))
        }
        StmtKind::NondetGuard { body, .. } | StmtKind::CoveredGuard { body, .. } => {
            let (c, t) = seq_paths(&body.stmts, unroll)?;
            (c.saturating_add(1), t)
        }
        StmtKind::While { body, .. } => {
            let bound = unroll.ok_or(PathCountError::UnboundedLoop(s.loc))?;
            let (c, t) = seq_paths(&body.stmts, unroll)?;
            // Paths entering the loop i times: c^i.
            let (mut cont, mut term, mut reach) = (0u64, 0u64, 1u64);
            for _ in 0..bound {
                cont = cont.saturating_add(reach);
                term = term.saturating_add(reach.saturating_mul(t));
                reach = reach.saturating_mul(c);
            }
            (cont.saturating_add(reach), term)
        }
        StmtKind::Decl { .. }
        | StmtKind::Assign { .. }
        | StmtKind::Label { .. }
        | StmtKind::Nop
        | StmtKind::Assert(_)
        | StmtKind::SetCovered(_) => (1, 0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{annotate, Criterion, WmOp};
    use crate::minic::parser::parse;
    use crate::minic::printer::program_to_string;

    fn one_label() -> AnnotatedProgram {
        let p = parse("int f(int a, int b) { int x = a + b; return x; }").unwrap();
        let mut ap = annotate(&p, &Criterion::wm(&[WmOp::Abs])).unwrap();
        ap.labels.truncate(1);
        ap.program.visit_blocks_mut(&mut |b| b.stmts.retain(|s| !matches!(s.kind, StmtKind::Label { id: 2, .. })));
        ap
    }

    fn count(p: &Program, pred: impl Fn(&StmtKind) -> bool) -> usize {
        let mut n = 0;
        p.visit_stmts(&mut |s| n += pred(&s.kind) as usize);
        n
    }

    #[test]
    fn naive_is_a_two_way_branch() {
        let ap = one_label();
        let p = transform(&ap, Mode::Naive);
        let ifs: Vec<&Stmt> = {
            let mut v = Vec::new();
            p.visit_stmts(&mut |s| {
                if matches!(s.kind, StmtKind::If { .. }) {
                    v.push(s)
                }
            });
            v
        };
        assert_eq!(ifs.len(), 1);
        let StmtKind::If { then_block, else_block, .. } = &ifs[0].kind else { unreachable!() };
        assert!(else_block.is_none());
        assert_eq!(then_block.stmts.len(), 1);
        assert_eq!(then_block.stmts[0].kind, StmtKind::Nop);
    }

    #[test]
    fn tight_shape() {
        let p = transform(&one_label(), Mode::Tight);
        let body = &p.functions[0].body.stmts;
        let StmtKind::NondetGuard { id: 1, body: g } = &body[0].kind else { panic!("{:?}", body[0]) };
        assert!(matches!(g.stmts[0].kind, StmtKind::Assert(_)));
        assert_eq!(g.stmts[1].kind, StmtKind::SilentExit);
        assert_eq!(count(&p, |k| *k == StmtKind::SilentExit), 2);
        let src = program_to_string(&p);
        assert!(src.contains("if (__nondet_1) {"), "{src}");
        assert!(src.contains("__assert(!__pred(a != abs(a)));"), "{src}");
        assert_eq!(parse(&src).unwrap().without_locs(), p.without_locs());
    }

    #[test]
    fn optim_exit_is_outside_the_covered_guard() {
        let p = transform(&one_label(), Mode::Optim);
        let StmtKind::NondetGuard { body: g, .. } = &p.functions[0].body.stmts[0].kind else { panic!() };
        let StmtKind::CoveredGuard { id: 1, body } = &g.stmts[0].kind else { panic!() };
        assert!(matches!(body.stmts[..], [Stmt { kind: StmtKind::Assert(_), .. }]));
        assert_eq!(g.stmts[1].kind, StmtKind::SilentExit);
        let src = program_to_string(&p);
        assert_eq!(parse(&src).unwrap().without_locs(), p.without_locs());
    }

    #[test]
    fn ignore_equals_strip() {
        let p = parse("int f(int n) { int i = 0; while (i < n) { i = i + 1; } return i; }").unwrap();
        let ap = annotate(&p, &Criterion::Mcc).unwrap();
        assert_eq!(transform(&ap, Mode::Ignore), strip(&ap));
    }

    #[test]
    fn original_locations_survive() {
        let p = parse("int f(int a) { if (a > 1) { a = a - 1; } return a; }").unwrap();
        let ap = annotate(&p, &Criterion::Dc).unwrap();
        for mode in [Mode::Naive, Mode::Tight, Mode::Optim, Mode::Replayer] {
            let q = transform(&ap, mode);
            let mut locs = Vec::new();
            q.visit_stmts(&mut |s| locs.push(s.loc));
            p.visit_stmts(&mut |s| assert!(locs.contains(&s.loc), "{mode}: lost {}", s.loc));
            let mut all = locs.clone();
            all.sort();
            all.dedup();
            assert_eq!(all.len(), locs.len(), "{mode}: duplicate locations");
        }
    }

    #[test]
    fn static_path_counts() {
        let src = "int f(int a) { int x = a + 1; int y = x * 2; int z = y - 1; return z; }";
        let p = parse(src).unwrap();
        let ap = annotate(&p, &Criterion::wm(&[WmOp::Abs])).unwrap();
        assert_eq!(ap.labels.len(), 3);
        assert_eq!(count_static_paths(&transform(&ap, Mode::Naive), u64::MAX, None).unwrap(), 8);
        assert_eq!(count_static_paths(&transform(&ap, Mode::Tight), u64::MAX, None).unwrap(), 4);
        assert_eq!(count_static_paths(&transform(&ap, Mode::Naive), 5, None).unwrap(), 5);
        assert_eq!(count_static_paths(&p, u64::MAX, None).unwrap(), 1);
    }

    #[test]
    fn loops_need_a_bound() {
        let p = parse("int f(int n) { while (n > 0) { if (n > 3) { n = n - 2; } n = n - 1; } return n; }").unwrap();
        assert!(matches!(count_static_paths(&p, 100, None), Err(PathCountError::UnboundedLoop(_))));
        // 0, 1 or 2 iterations, each iteration two ways: 1 + 2 + 4.
        assert_eq!(count_static_paths(&p, 100, Some(2)).unwrap(), 7);
    }

    #[test]
    fn mode_names() {
        for m in [Mode::Ignore, Mode::Naive, Mode::Tight, Mode::Optim, Mode::Replayer] {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert!("fast".parse::<Mode>().is_err());
    }
}
