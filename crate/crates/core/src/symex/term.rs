//! Symbolic values over harness inputs, path conditions, and the bounded
//! enumeration solver.

use std::rc::Rc;

use thiserror::Error;

use super::harness::Domain;
use crate::minic::interp::{apply_binop, ApplyFault};
use crate::minic::{BinOp, Expr, ExprKind, Loc, RteKind, UnOp};
use crate::scalar::Scalar;

pub type TermRef<S> = Rc<Term<S>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term<S> {
    Lit(S),
    /// Position of the input in the harness domain.
    Input(usize),
    Unary(UnOp, TermRef<S>),
    Binary(BinOp, TermRef<S>, TermRef<S>),
    Abs(TermRef<S>),
    /// Runtime errors inside evaluate to 0.
    Guarded(TermRef<S>),
    Select(Rc<Vec<TermRef<S>>>, TermRef<S>),
    Ite(TermRef<S>, TermRef<S>, TermRef<S>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalFault {
    Rte(RteKind),
    Overflow,
}

impl<S: Scalar> Term<S> {
    pub fn lit(v: S) -> TermRef<S> {
        Rc::new(Term::Lit(v))
    }

    pub fn int(v: i64) -> TermRef<S> {
        Term::lit(S::from_int(v))
    }

    pub fn as_lit(&self) -> Option<&S> {
        match self {
            Term::Lit(v) => Some(v),
            _ => None,
        }
    }

    pub fn unary(op: UnOp, x: TermRef<S>) -> TermRef<S> {
        if let Some(v) = x.as_lit() {
            let folded = match op {
                UnOp::Neg => v.checked_negate(),
                UnOp::Not => Some(S::from_bool(!v.truthy())),
            };
            if let Some(v) = folded {
                return Term::lit(v);
            }
        }
        Rc::new(Term::Unary(op, x))
    }

    pub fn abs(x: TermRef<S>) -> TermRef<S> {
        if let Some(v) = x.as_lit().and_then(|v| v.checked_magnitude()) {
            return Term::lit(v);
        }
        Rc::new(Term::Abs(x))
    }

    pub fn binary(op: BinOp, l: TermRef<S>, r: TermRef<S>) -> TermRef<S> {
        match (op, l.as_lit(), r.as_lit()) {
            (BinOp::And, Some(a), _) if !a.truthy() => return Term::int(0),
            (BinOp::Or, Some(a), _) if a.truthy() => return Term::int(1),
            (_, Some(a), Some(b)) => {
                if let Ok(v) = apply_binop(op, a, b, Loc::default()) {
                    return Term::lit(v);
                }
            }
            _ => {}
        }
        Rc::new(Term::Binary(op, l, r))
    }

    pub fn guarded(x: TermRef<S>) -> TermRef<S> {
        if x.as_lit().is_some() {
            return x;
        }
        Rc::new(Term::Guarded(x))
    }

    pub fn select(elems: Rc<Vec<TermRef<S>>>, idx: TermRef<S>) -> TermRef<S> {
        if let Some(k) = idx.as_lit().and_then(|k| k.to_usize()) {
            if let Some(e) = elems.get(k) {
                return e.clone();
            }
        }
        Rc::new(Term::Select(elems, idx))
    }

    pub fn ite(c: TermRef<S>, t: TermRef<S>, e: TermRef<S>) -> TermRef<S> {
        match c.as_lit() {
            Some(v) if v.truthy() => t,
            Some(_) => e,
            None => Rc::new(Term::Ite(c, t, e)),
        }
    }

    /// Concrete value under `inputs` (indexed like the domain).
    pub fn eval(&self, inputs: &[S]) -> Result<S, EvalFault> {
        Ok(match self {
            Term::Lit(v) => v.clone(),
            Term::Input(i) => inputs[*i].clone(),
            Term::Unary(UnOp::Neg, x) => x.eval(inputs)?.checked_negate().ok_or(EvalFault::Overflow)?,
            Term::Unary(UnOp::Not, x) => S::from_bool(!x.eval(inputs)?.truthy()),
            Term::Abs(x) => x.eval(inputs)?.checked_magnitude().ok_or(EvalFault::Overflow)?,
            Term::Guarded(x) => match x.eval(inputs) {
                Err(EvalFault::Rte(_)) => S::zero(),
                other => other?,
            },
            Term::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
                let lv = l.eval(inputs)?.truthy();
                if lv == (*op == BinOp::Or) {
                    S::from_bool(lv)
                } else {
                    S::from_bool(r.eval(inputs)?.truthy())
                }
            }
            Term::Binary(op, l, r) => {
                let (a, b) = (l.eval(inputs)?, r.eval(inputs)?);
                apply_binop(*op, &a, &b, Loc::default()).map_err(|f| match f {
                    ApplyFault::Rte(k, _) => EvalFault::Rte(k),
                    ApplyFault::Overflow => EvalFault::Overflow,
                })?
            }
            Term::Select(elems, idx) => {
                let k = idx.eval(inputs)?;
                match k.to_usize().and_then(|k| elems.get(k)) {
                    Some(e) => e.eval(inputs)?,
                    None => return Err(EvalFault::Rte(RteKind::IndexOutOfBounds)),
                }
            }
            Term::Ite(c, t, e) => {
                if c.eval(inputs)?.truthy() {
                    t.eval(inputs)?
                } else {
                    e.eval(inputs)?
                }
            }
        })
    }

    /// Builds a term from an expression over input names (`x`, `tab[1]`).
    pub fn from_expr(e: &Expr, d: &Domain) -> Result<TermRef<S>, SolveError> {
        let rec = |x: &Expr| Term::from_expr(x, d);
        Ok(match &e.kind {
            ExprKind::Int(v) => Term::int(*v),
            ExprKind::Var(n) => Rc::new(Term::Input(d.position(n).ok_or_else(|| SolveError::UnknownName(n.clone()))?)),
            ExprKind::Index(n, i) => {
                let ExprKind::Int(k) = i.kind else {
                    return Err(SolveError::UnknownName(format!("{n}[..]")));
                };
                let name = format!("{n}[{k}]");
                Rc::new(Term::Input(d.position(&name).ok_or(SolveError::UnknownName(name))?))
            }
            ExprKind::Unary(op, x) => Term::unary(*op, rec(x)?),
            ExprKind::Binary(op, l, r) => Term::binary(*op, rec(l)?, rec(r)?),
            ExprKind::Abs(x) => Term::abs(rec(x)?),
            ExprKind::Guarded(x) => Term::guarded(rec(x)?),
            ExprKind::Call(n, _) => return Err(SolveError::UnknownName(format!("{n}()"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Conjunct<S> {
    /// A branch atom took the given truth value.
    Branch { term: TermRef<S>, polarity: bool },
    /// A runtime-error condition was false.
    NoFault { term: TermRef<S> },
    /// A runtime-error condition was true (the path ends in that error).
    Fault { term: TermRef<S>, kind: RteKind, loc: Loc },
}

impl<S: Scalar> Conjunct<S> {
    pub fn holds(&self, inputs: &[S]) -> Result<bool, EvalFault> {
        Ok(match self {
            Conjunct::Branch { term, polarity } => term.eval(inputs)?.truthy() == *polarity,
            Conjunct::NoFault { term } => !term.eval(inputs)?.truthy(),
            Conjunct::Fault { term, .. } => term.eval(inputs)?.truthy(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PathCondition<S> {
    pub conjuncts: Vec<Conjunct<S>>,
    pub fork_locs: Vec<Loc>,
}

impl<S: Scalar> PathCondition<S> {
    pub fn new() -> Self {
        PathCondition { conjuncts: Vec::new(), fork_locs: Vec::new() }
    }

    /// Path condition whose conjuncts are the given expressions, all true.
    pub fn from_exprs(es: &[Expr], d: &Domain) -> Result<Self, SolveError> {
        let mut pc = PathCondition::new();
        for e in es {
            pc.conjuncts.push(Conjunct::Branch { term: Term::from_expr(e, d)?, polarity: true });
            pc.fork_locs.push(e.loc);
        }
        Ok(pc)
    }

    pub fn holds(&self, inputs: &[S]) -> Result<bool, EvalFault> {
        for c in &self.conjuncts {
            if !c.holds(inputs)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("domain has {product} assignments, above the feasibility budget of {budget}")]
    BudgetExceeded { product: u64, budget: u64 },
    #[error("`{0}` is not a harness input")]
    UnknownName(String),
    #[error("arithmetic overflow in the integer carrier")]
    Overflow,
    #[error("runtime error while evaluating a constraint")]
    Rte,
}

impl From<EvalFault> for SolveError {
    fn from(f: EvalFault) -> Self {
        match f {
            EvalFault::Overflow => SolveError::Overflow,
            EvalFault::Rte(_) => SolveError::Rte,
        }
    }
}

pub const DEFAULT_FEASIBILITY_BUDGET: u64 = 1_000_000;

/// Lexicographically smallest assignment satisfying `pc` (and `extra`), by
/// exhaustive enumeration of the domain.
pub fn solve<S: Scalar>(
    pc: &PathCondition<S>,
    extra: Option<&TermRef<S>>,
    d: &Domain,
    budget: u64,
) -> Result<Option<Vec<S>>, SolveError> {
    if d.product() > budget {
        return Err(SolveError::BudgetExceeded { product: d.product(), budget });
    }
    let mut vals = Vec::new();
    for idx in 0..d.product() {
        d.decode_into(idx, &mut vals);
        if pc.holds(&vals)? && extra.map_or(Ok(true), |t| t.eval(&vals).map(|v| v.truthy()))? {
            return Ok(Some(vals));
        }
    }
    Ok(None)
}
