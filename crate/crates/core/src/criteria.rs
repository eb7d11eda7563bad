//! Coverage criteria as label annotations.
//!
//! A label is a predicate attached to a program point; it is covered when an
//! execution reaches the point with the predicate true. `annotate` inserts one
//! `Label` statement per test objective, immediately before the statement the
//! objective is about.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::minic::typecheck::scope_before;
use crate::minic::{expr_to_string, program_to_string, BinOp, Block, Expr, ExprKind, Loc, Program, Stmt, StmtKind, Type, UnOp};

pub const DEFAULT_MCC_CAP: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WmOp {
    Abs,
    Aor,
    Ror,
    Cor,
}

impl WmOp {
    pub const ALL: [WmOp; 4] = [WmOp::Abs, WmOp::Aor, WmOp::Ror, WmOp::Cor];

    fn name(self) -> &'static str {
        match self {
            WmOp::Abs => "ABS",
            WmOp::Aor => "AOR",
            WmOp::Ror => "ROR",
            WmOp::Cor => "COR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Criterion {
    Dc,
    Cc,
    Mcc,
    Wm(BTreeSet<WmOp>),
    Limit(u32),
    Custom,
}

impl Criterion {
    pub fn wm(ops: &[WmOp]) -> Criterion {
        Criterion::Wm(ops.iter().copied().collect())
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Dc => f.write_str("DC"),
            Criterion::Cc => f.write_str("CC"),
            Criterion::Mcc => f.write_str("MCC"),
            Criterion::Wm(ops) => {
                let names: Vec<&str> = ops.iter().map(|o| o.name()).collect();
                write!(f, "WM:{}", names.join(","))
            }
            Criterion::Limit(n) => write!(f, "LIMIT:{n}"),
            Criterion::Custom => f.write_str("CUSTOM"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid criterion `{0}` (expected DC, CC, MCC, WM:<ops> or LIMIT:<n>)")]
pub struct CriterionParseError(pub String);

impl FromStr for Criterion {
    type Err = CriterionParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || CriterionParseError(s.to_string());
        let t = s.trim().to_ascii_uppercase();
        match t.as_str() {
            "DC" => return Ok(Criterion::Dc),
            "CC" => return Ok(Criterion::Cc),
            "MCC" => return Ok(Criterion::Mcc),
            _ => {}
        }
        if let Some(ops) = t.strip_prefix("WM:") {
            let mut set = BTreeSet::new();
            for name in ops.split(',') {
                let op = WmOp::ALL.into_iter().find(|o| o.name() == name.trim()).ok_or_else(err)?;
                set.insert(op);
            }
            return Ok(Criterion::Wm(set));
        }
        if let Some(n) = t.strip_prefix("LIMIT:") {
            return n.trim().parse().map(Criterion::Limit).map_err(|_| err());
        }
        Err(err())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Label {
    pub id: u32,
    /// Location of the statement the label qualifies.
    pub loc: Loc,
    pub predicate: Expr,
    pub criterion: Criterion,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedProgram {
    pub program: Program,
    /// Ordered by id; ids are `1..=labels.len()`.
    pub labels: Vec<Label>,
    pub criterion: Criterion,
}

impl AnnotatedProgram {
    pub fn label(&self, id: u32) -> Option<&Label> {
        id.checked_sub(1).and_then(|i| self.labels.get(i as usize))
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.labels.iter().map(|l| l.id)
    }

    /// Label table, one tab-separated line per label.
    pub fn labels_tsv(&self) -> String {
        let mut out = String::new();
        for l in &self.labels {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                l.id,
                l.loc,
                l.criterion,
                expr_to_string(&l.predicate),
                l.note
            ));
        }
        out
    }

    /// Pretty-printed program with labels as `// label <id>: <p>` comments.
    pub fn source(&self) -> String {
        program_to_string(&self.program)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CriteriaError {
    #[error("{loc}: decision has {k} atoms, above the MCC cap")]
    AtomCapExceeded { loc: Loc, k: usize },
    #[error("unsupported criterion: {0}")]
    UnsupportedCriterion(String),
    #[error("`{name}` is not in scope at {loc} with a matching type")]
    ScopeError { name: String, loc: Loc },
    #[error("no statement at {0}")]
    BadLocation(Loc),
    #[error("calls are not allowed in label predicates")]
    IllegalPredicate,
}

/// Atomic conditions of a decision: the operands reached by descending
/// through `&&`, `||` and `!`, left to right.
pub fn atoms(e: &Expr) -> Vec<&Expr> {
    let mut out = Vec::new();
    fn go<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
        match &e.kind {
            ExprKind::Unary(UnOp::Not, x) => go(x, out),
            ExprKind::Binary(BinOp::And | BinOp::Or, l, r) => {
                go(l, out);
                go(r, out);
            }
            _ => out.push(e),
        }
    }
    go(e, &mut out);
    out
}

pub fn annotate(p: &Program, c: &Criterion) -> Result<AnnotatedProgram, CriteriaError> {
    annotate_with_cap(p, c, DEFAULT_MCC_CAP)
}

pub fn annotate_with_cap(p: &Program, c: &Criterion, mcc_cap: usize) -> Result<AnnotatedProgram, CriteriaError> {
    match c {
        Criterion::Custom => return Err(CriteriaError::UnsupportedCriterion("CUSTOM".into())),
        Criterion::Wm(ops) if ops.is_empty() => {
            return Err(CriteriaError::UnsupportedCriterion("WM with no operators".into()))
        }
        _ => {}
    }
    let mut program = p.clone();
    let mut a = Annotator { criterion: c, cap: mcc_cap, seq: program.next_seq, labels: Vec::new() };
    for f in &mut program.functions {
        a.block(&mut f.body)?;
    }
    program.next_seq = a.seq;
    Ok(AnnotatedProgram { program, labels: a.labels, criterion: c.clone() })
}

/// Removes every label statement.
pub fn strip(ap: &AnnotatedProgram) -> Program {
    let mut p = ap.program.clone();
    p.visit_blocks_mut(&mut |b| b.stmts.retain(|s| !matches!(s.kind, StmtKind::Label { .. })));
    p
}

/// Adds a CUSTOM label immediately before the statement at `loc`.
pub fn add_custom_label(ap: &AnnotatedProgram, loc: Loc, predicate: Expr) -> Result<AnnotatedProgram, CriteriaError> {
    let mut target_ok = false;
    ap.program.visit_stmts(&mut |s| {
        target_ok |= s.loc == loc && !matches!(s.kind, StmtKind::Label { .. })
    });
    let scope = scope_before(&ap.program, loc).filter(|_| target_ok).ok_or(CriteriaError::BadLocation(loc))?;
    let mut bad: Option<CriteriaError> = None;
    predicate.visit(&mut |e| {
        let ok = match &e.kind {
            ExprKind::Var(n) => scope.get(n) == Some(&Type::Int),
            ExprKind::Index(n, _) => matches!(scope.get(n), Some(Type::IntArray(_))),
            ExprKind::Call(..) => {
                bad.get_or_insert(CriteriaError::IllegalPredicate);
                true
            }
            _ => true,
        };
        if !ok {
            let name = match &e.kind {
                ExprKind::Var(n) | ExprKind::Index(n, _) => n.clone(),
                _ => unreachable!(),
            };
            bad.get_or_insert(CriteriaError::ScopeError { name, loc });
        }
    });
    if let Some(e) = bad {
        return Err(e);
    }

    let mut out = ap.clone();
    let id = out.labels.len() as u32 + 1;
    let mut seq = out.program.next_seq;
    let stored = relocate(&predicate, &mut seq);
    let stmt = Stmt::new(fresh(&mut seq, loc), StmtKind::Label { id, predicate: stored.clone() });
    out.program.next_seq = seq;
    let mut stmt = Some(stmt);
    out.program.visit_blocks_mut(&mut |b| {
        if let Some(pos) = b.stmts.iter().position(|s| s.loc == loc) {
            if let Some(st) = stmt.take() {
                b.stmts.insert(pos, st);
            }
        }
    });
    out.labels.push(Label { id, loc, predicate: stored, criterion: Criterion::Custom, note: String::new() });
    Ok(out)
}

fn fresh(seq: &mut u32, near: Loc) -> Loc {
    let l = Loc::new(near.line, near.col, *seq);
    *seq += 1;
    l
}

/// Copy of `e` with every node moved to a fresh location.
fn relocate(e: &Expr, seq: &mut u32) -> Expr {
    let mut c = e.clone();
    c.visit_mut(&mut |n| n.loc = fresh(seq, n.loc));
    c
}

fn conj(loc: Loc, parts: Vec<Expr>) -> Expr {
    let mut it = parts.into_iter();
    let first = it.next().expect("nonempty conjunction");
    it.fold(first, |acc, x| Expr::binary(loc, BinOp::And, acc, x))
}

fn ne(loc: Loc, l: Expr, r: Expr) -> Expr {
    Expr::binary(loc, BinOp::Ne, l, r)
}

const ARITH_REPLACEMENTS: [BinOp; 4] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div];
const REL_OPS: [BinOp; 6] = [BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge, BinOp::Eq, BinOp::Ne];

struct Objective {
    predicate: Expr,
    criterion: Criterion,
    note: String,
}

struct Annotator<'c> {
    criterion: &'c Criterion,
    cap: usize,
    seq: u32,
    labels: Vec<Label>,
}

impl Annotator<'_> {
    fn block(&mut self, b: &mut Block) -> Result<(), CriteriaError> {
        let mut out = Vec::with_capacity(b.stmts.len());
        for mut s in std::mem::take(&mut b.stmts) {
            let objectives = self.objectives(&s)?;
            let is_loop = matches!(s.kind, StmtKind::While { .. });
            let mut tail = Vec::new();
            for o in objectives {
                let id = self.labels.len() as u32 + 1;
                let predicate = relocate(&o.predicate, &mut self.seq);
                let here = fresh(&mut self.seq, s.loc);
                out.push(Stmt::new(here, StmtKind::Label { id, predicate: predicate.clone() }));
                if is_loop {
                    // The condition is evaluated again after each iteration.
                    let copy = relocate(&o.predicate, &mut self.seq);
                    tail.push(Stmt::new(fresh(&mut self.seq, s.loc), StmtKind::Label { id, predicate: copy }));
                }
                self.labels.push(Label { id, loc: s.loc, predicate, criterion: o.criterion, note: o.note });
            }
            for inner in s.blocks_mut() {
                self.block(inner)?;
            }
            if let StmtKind::While { body, .. } = &mut s.kind {
                body.stmts.extend(tail);
            }
            out.push(s);
        }
        b.stmts = out;
        Ok(())
    }

    fn objectives(&self, s: &Stmt) -> Result<Vec<Objective>, CriteriaError> {
        match &s.kind {
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => self.decision(cond, s.loc),
            StmtKind::Decl { init: Some(e), .. } | StmtKind::Assign { value: e, .. } => Ok(match self.criterion {
                Criterion::Wm(ops) => mutants(e, ops, true),
                _ => Vec::new(),
            }),
            _ => Ok(Vec::new()),
        }
    }

    fn decision(&self, d: &Expr, loc: Loc) -> Result<Vec<Objective>, CriteriaError> {
        let c = self.criterion;
        let obj = |predicate, note: String| Objective { predicate, criterion: c.clone(), note };
        let mut out = Vec::new();
        match c {
            Criterion::Dc => {
                out.push(obj(d.clone(), "decision true".into()));
                out.push(obj(Expr::not(d.loc, d.clone()), "decision false".into()));
            }
            Criterion::Cc => {
                for a in atoms(d) {
                    out.push(obj(a.clone(), format!("condition {} true", expr_to_string(a))));
                    out.push(obj(Expr::not(a.loc, a.clone()), format!("condition {} false", expr_to_string(a))));
                }
            }
            Criterion::Mcc => {
                let atoms = atoms(d);
                let k = atoms.len();
                if k > self.cap {
                    return Err(CriteriaError::AtomCapExceeded { loc, k });
                }
                for v in 0u32..(1 << k) {
                    let mut lits = Vec::with_capacity(k);
                    let mut note = String::with_capacity(k);
                    for (i, a) in atoms.iter().enumerate() {
                        let truth = v & (1 << i) == 0;
                        note.push(if truth { 'T' } else { 'F' });
                        lits.push(if truth { (*a).clone() } else { Expr::not(a.loc, (*a).clone()) });
                    }
                    out.push(obj(conj(d.loc, lits), note));
                }
            }
            Criterion::Limit(n) => {
                for a in atoms(d) {
                    let ExprKind::Binary(op, x, y) = &a.kind else { continue };
                    let (lhs, rhs, plus_one) = match op {
                        BinOp::Lt => (x, y, true),
                        BinOp::Le => (x, y, false),
                        BinOp::Gt => (y, x, true),
                        BinOp::Ge => (y, x, false),
                        _ => continue,
                    };
                    let l = a.loc;
                    let mut boundary = Expr::binary(l, BinOp::Sub, (**lhs).clone(), (**rhs).clone());
                    if plus_one {
                        boundary = Expr::binary(l, BinOp::Add, boundary, Expr::int(l, 1));
                    }
                    let near = Expr::binary(l, BinOp::Le, Expr::abs(l, boundary), Expr::int(l, i64::from(*n)));
                    let p = Expr::binary(l, BinOp::And, a.clone(), near);
                    out.push(obj(p, format!("boundary of {}", expr_to_string(a))));
                }
            }
            Criterion::Wm(ops) => out = mutants(d, ops, false),
            Criterion::Custom => unreachable!("rejected before annotation"),
        }
        Ok(out)
    }
}

/// Weak-mutation objectives inside `e`. ABS and AOR only apply to assignment
/// right-hand sides.
fn mutants(e: &Expr, ops: &BTreeSet<WmOp>, rhs: bool) -> Vec<Objective> {
    let mut nodes = Vec::new();
    e.visit(&mut |n| {
        if let ExprKind::Binary(op, l, r) = &n.kind {
            nodes.push((n, *op, &**l, &**r));
        }
    });
    let mut out = Vec::new();
    for &wm in ops {
        let criterion = Criterion::Wm([wm].into());
        let mut push = |predicate, note| out.push(Objective { predicate, criterion: criterion.clone(), note });
        for &(node, op, l, r) in &nodes {
            let loc = node.loc;
            match wm {
                WmOp::Abs if rhs && op.is_arithmetic() => {
                    for v in [l, r] {
                        if matches!(v.kind, ExprKind::Var(_) | ExprKind::Index(..)) {
                            let p = ne(loc, v.clone(), Expr::abs(loc, v.clone()));
                            push(p, format!("ABS {}", expr_to_string(v)));
                        }
                    }
                }
                WmOp::Aor if rhs && op.is_arithmetic() => {
                    for alt in ARITH_REPLACEMENTS.into_iter().filter(|&o| o != op) {
                        let mutant = Expr::binary(loc, alt, l.clone(), r.clone());
                        push(ne(loc, node.clone(), mutant), format!("AOR {} -> {}", op.symbol(), alt.symbol()));
                    }
                }
                WmOp::Ror if op.is_relational() => {
                    for alt in REL_OPS.into_iter().filter(|&o| o != op) {
                        let mutant = Expr::binary(loc, alt, l.clone(), r.clone());
                        push(ne(loc, node.clone(), mutant), format!("ROR {} -> {}", op.symbol(), alt.symbol()));
                    }
                }
                WmOp::Cor if op.is_logical() => {
                    let alt = if op == BinOp::And { BinOp::Or } else { BinOp::And };
                    let mutant = Expr::binary(loc, alt, l.clone(), r.clone());
                    push(ne(loc, node.clone(), mutant), format!("COR {} -> {}", op.symbol(), alt.symbol()));
                }
                _ => {}
            }
        }
    }
    out
}
