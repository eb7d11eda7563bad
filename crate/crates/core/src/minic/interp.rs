//! Concrete tree-walking interpreter.
//!
//! This is both the reference semantics of MiniC and the execution engine of
//! the replayer. It records the executed statements, every label event, and
//! the branch decisions taken (atom by atom for short-circuit conditions).

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::ast::*;
use crate::scalar::Scalar;

pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value<S> {
    Int(S),
    Array(Vec<S>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RteKind {
    DivByZero,
    ModByZero,
    IndexOutOfBounds,
}

impl fmt::Display for RteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RteKind::DivByZero => "division by zero",
            RteKind::ModByZero => "modulo by zero",
            RteKind::IndexOutOfBounds => "index out of bounds",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome<S> {
    Returned(Option<S>),
    Rte { kind: RteKind, loc: Loc },
    SilentExited,
    AssertFailed(Loc),
    StepLimit,
}

impl<S> Outcome<S> {
    /// Normal termination in the replayer's sense.
    pub fn is_normal(&self) -> bool {
        matches!(self, Outcome::Returned(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecResult<S> {
    pub outcome: Outcome<S>,
    /// Statement locations in execution order (loop heads included).
    pub visited: Vec<Loc>,
    /// `(label id, predicate truth)` for every label statement reached.
    pub label_events: Vec<(u32, bool)>,
    /// Branch decisions: each evaluated condition atom, then the statement's
    /// outcome; nondet guards and assertions record their truth.
    pub decisions: Vec<(Loc, bool)>,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterpError {
    #[error("input `{0}` is missing")]
    InputMissing(String),
    #[error("input `{0}` does not match its declared type")]
    InputShape(String),
    #[error("{0}: arithmetic overflow in the integer carrier")]
    Overflow(Loc),
    #[error("malformed program: {0}")]
    Malformed(String),
}

/// Callbacks for label-related statements.
pub trait LabelHook {
    fn on_label(&mut self, _id: u32, _truth: bool) {}
    fn on_set_covered(&mut self, _id: u32) {}
    fn is_covered(&self, _id: u32) -> bool {
        false
    }
}

pub type Inputs<S> = BTreeMap<String, Value<S>>;

/// Runs the entry function of `p` on `input`.
pub fn interpret<S: Scalar>(
    p: &Program,
    input: &Inputs<S>,
    hook: Option<&mut dyn LabelHook>,
    step_limit: u64,
) -> Result<ExecResult<S>, InterpError> {
    let entry = p
        .function(&p.entry)
        .ok_or_else(|| InterpError::Malformed(format!("no entry function `{}`", p.entry)))?;
    let mut frame = Vec::new();
    for param in &entry.params {
        let v = input
            .get(&param.name)
            .ok_or_else(|| InterpError::InputMissing(param.name.clone()))?;
        let ok = match (param.ty, v) {
            (Type::Int, Value::Int(_)) => true,
            (Type::IntArray(n), Value::Array(xs)) => xs.len() == n,
            _ => false,
        };
        if !ok {
            return Err(InterpError::InputShape(param.name.clone()));
        }
        frame.push((param.name.clone(), v.clone()));
    }
    let mut m = Machine {
        program: p,
        input,
        hook,
        step_limit,
        res: ExecResult {
            outcome: Outcome::StepLimit,
            visited: Vec::new(),
            label_events: Vec::new(),
            decisions: Vec::new(),
            steps: 0,
        },
    };
    let mut scopes = vec![frame];
    let outcome = match m.block(&entry.body.stmts, &mut scopes)? {
        Flow::Normal => {
            return Err(InterpError::Malformed(format!("`{}` ended without return", entry.name)))
        }
        Flow::Return(v) => Outcome::Returned(v),
        Flow::Halt(o) => o,
    };
    m.res.outcome = outcome;
    Ok(m.res)
}

enum Flow<S> {
    Normal,
    Return(Option<S>),
    Halt(Outcome<S>),
}

enum Fault {
    Rte(RteKind, Loc),
    Error(InterpError),
}

impl From<InterpError> for Fault {
    fn from(e: InterpError) -> Self {
        Fault::Error(e)
    }
}

type Scopes<S> = Vec<Vec<(String, Value<S>)>>;

fn find<'a, S>(scopes: &'a mut Scopes<S>, name: &str) -> Result<&'a mut Value<S>, InterpError> {
    scopes
        .iter_mut()
        .rev()
        .flat_map(|s| s.iter_mut().rev())
        .find(|(n, _)| n == name)
        .map(|(_, v)| v)
        .ok_or_else(|| InterpError::Malformed(format!("unbound variable `{name}`")))
}

fn index_of<S: Scalar>(i: &S, len: usize, loc: Loc) -> Result<usize, Fault> {
    match i.to_usize() {
        Some(k) if k < len => Ok(k),
        _ => Err(Fault::Rte(RteKind::IndexOutOfBounds, loc)),
    }
}

/// Applies an arithmetic or comparison operator (not `&&`/`||`).
pub(crate) fn apply_binop<S: Scalar>(op: BinOp, a: &S, b: &S, loc: Loc) -> Result<S, ApplyFault> {
    let of = ApplyFault::Overflow;
    Ok(match op {
        BinOp::Add => a.checked_add(b).ok_or(of)?,
        BinOp::Sub => a.checked_sub(b).ok_or(of)?,
        BinOp::Mul => a.checked_mul(b).ok_or(of)?,
        BinOp::Div => {
            if b.is_zero() {
                return Err(ApplyFault::Rte(RteKind::DivByZero, loc));
            }
            a.checked_div(b).ok_or(of)?
        }
        BinOp::Rem => {
            if b.is_zero() {
                return Err(ApplyFault::Rte(RteKind::ModByZero, loc));
            }
            a.checked_remainder(b).ok_or(of)?
        }
        BinOp::Lt => S::from_bool(a < b),
        BinOp::Le => S::from_bool(a <= b),
        BinOp::Gt => S::from_bool(a > b),
        BinOp::Ge => S::from_bool(a >= b),
        BinOp::Eq => S::from_bool(a == b),
        BinOp::Ne => S::from_bool(a != b),
        BinOp::And => S::from_bool(a.truthy() && b.truthy()),
        BinOp::Or => S::from_bool(a.truthy() || b.truthy()),
    })
}

pub(crate) enum ApplyFault {
    Rte(RteKind, Loc),
    Overflow,
}

struct Machine<'p, 'h, S> {
    program: &'p Program,
    input: &'p Inputs<S>,
    hook: Option<&'h mut dyn LabelHook>,
    step_limit: u64,
    res: ExecResult<S>,
}

impl<'p, 'h, S: Scalar> Machine<'p, 'h, S> {
    fn tick(&mut self, loc: Loc) -> bool {
        self.res.steps += 1;
        self.res.visited.push(loc);
        self.res.steps <= self.step_limit
    }

    fn eval(&mut self, e: &Expr, scopes: &mut Scopes<S>) -> Result<S, Fault> {
        match &e.kind {
            ExprKind::Int(v) => Ok(S::from_int(*v)),
            ExprKind::Var(n) => match find(scopes, n)? {
                Value::Int(v) => Ok(v.clone()),
                Value::Array(_) => Err(InterpError::Malformed(format!("array `{n}` read as scalar")).into()),
            },
            ExprKind::Index(n, i) => {
                let i = self.eval(i, scopes)?;
                match find(scopes, n)? {
                    Value::Array(xs) => {
                        let k = index_of(&i, xs.len(), e.loc)?;
                        Ok(xs[k].clone())
                    }
                    Value::Int(_) => Err(InterpError::Malformed(format!("`{n}` is not an array")).into()),
                }
            }
            ExprKind::Unary(op, x) => {
                let v = self.eval(x, scopes)?;
                match op {
                    UnOp::Neg => v.checked_negate().ok_or(Fault::Error(InterpError::Overflow(e.loc))),
                    UnOp::Not => Ok(S::from_bool(!v.truthy())),
                }
            }
            ExprKind::Abs(x) => {
                let v = self.eval(x, scopes)?;
                v.checked_magnitude().ok_or(Fault::Error(InterpError::Overflow(e.loc)))
            }
            ExprKind::Guarded(x) => match self.eval(x, scopes) {
                Ok(v) => Ok(v),
                Err(Fault::Rte(..)) => Ok(S::zero()),
                Err(err) => Err(err),
            },
            ExprKind::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
                let lv = self.eval(l, scopes)?.truthy();
                if lv == (*op == BinOp::Or) {
                    return Ok(S::from_bool(lv));
                }
                Ok(S::from_bool(self.eval(r, scopes)?.truthy()))
            }
            ExprKind::Binary(op, l, r) => {
                let a = self.eval(l, scopes)?;
                let b = self.eval(r, scopes)?;
                apply_binop(*op, &a, &b, e.loc).map_err(|f| match f {
                    ApplyFault::Rte(k, l) => Fault::Rte(k, l),
                    ApplyFault::Overflow => Fault::Error(InterpError::Overflow(e.loc)),
                })
            }
            ExprKind::Call(..) => Err(InterpError::Malformed("nested call".into()).into()),
        }
    }

    /// Evaluates a branch condition, recording each short-circuit atom.
    fn decision(&mut self, e: &Expr, scopes: &mut Scopes<S>) -> Result<bool, Fault> {
        match &e.kind {
            ExprKind::Unary(UnOp::Not, x) => Ok(!self.decision(x, scopes)?),
            ExprKind::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
                let lv = self.decision(l, scopes)?;
                if lv == (*op == BinOp::Or) {
                    return Ok(lv);
                }
                self.decision(r, scopes)
            }
            _ => {
                let v = self.eval(e, scopes)?.truthy();
                self.res.decisions.push((e.loc, v));
                Ok(v)
            }
        }
    }

    /// Evaluates the right-hand side of a declaration, assignment or return,
    /// which may be a call.
    fn rhs(&mut self, e: &Expr, scopes: &mut Scopes<S>) -> Result<Result<S, Flow<S>>, InterpError> {
        if let ExprKind::Call(name, args) = &e.kind {
            let callee = self
                .program
                .function(name)
                .ok_or_else(|| InterpError::Malformed(format!("undefined function `{name}`")))?;
            let mut frame = Vec::new();
            for (param, arg) in callee.params.iter().zip(args) {
                let v = match param.ty {
                    Type::Int => match self.eval(arg, scopes) {
                        Ok(v) => Value::Int(v),
                        Err(f) => return self.fault(f).map(Err),
                    },
                    Type::IntArray(_) => match &arg.kind {
                        ExprKind::Var(n) => find(scopes, n)?.clone(),
                        _ => return Err(InterpError::Malformed("array argument must be a variable".into())),
                    },
                };
                frame.push((param.name.clone(), v));
            }
            let mut callee_scopes = vec![frame];
            return match self.block(&callee.body.stmts, &mut callee_scopes)? {
                Flow::Return(Some(v)) => Ok(Ok(v)),
                Flow::Return(None) | Flow::Normal => {
                    Err(InterpError::Malformed(format!("`{name}` returned no value")))
                }
                halt @ Flow::Halt(_) => Ok(Err(halt)),
            };
        }
        match self.eval(e, scopes) {
            Ok(v) => Ok(Ok(v)),
            Err(f) => self.fault(f).map(Err),
        }
    }

    fn fault(&mut self, f: Fault) -> Result<Flow<S>, InterpError> {
        match f {
            Fault::Rte(kind, loc) => Ok(Flow::Halt(Outcome::Rte { kind, loc })),
            Fault::Error(e) => Err(e),
        }
    }

    fn block(&mut self, stmts: &[Stmt], scopes: &mut Scopes<S>) -> Result<Flow<S>, InterpError> {
        scopes.push(Vec::new());
        let mut flow = Flow::Normal;
        for s in stmts {
            flow = self.stmt(s, scopes)?;
            if !matches!(flow, Flow::Normal) {
                break;
            }
        }
        scopes.pop();
        Ok(flow)
    }

    fn stmt(&mut self, s: &Stmt, scopes: &mut Scopes<S>) -> Result<Flow<S>, InterpError> {
        if !self.tick(s.loc) {
            return Ok(Flow::Halt(Outcome::StepLimit));
        }
        macro_rules! attempt {
            ($e:expr) => {
                match $e {
                    Ok(v) => v,
                    Err(f) => return self.fault(f),
                }
            };
        }
        match &s.kind {
            StmtKind::Decl { name, ty, init } => {
                let v = match (ty, init) {
                    (Type::IntArray(n), _) => Value::Array(vec![S::zero(); *n]),
                    (Type::Int, None) => Value::Int(S::zero()),
                    (Type::Int, Some(e)) => match self.rhs(e, scopes)? {
                        Ok(v) => Value::Int(v),
                        Err(flow) => return Ok(flow),
                    },
                };
                scopes.last_mut().expect("scope").push((name.clone(), v));
            }
            StmtKind::Assign { target, value } => {
                let idx = match target {
                    LValue::Var(_) => None,
                    LValue::Index(_, i) => Some(attempt!(self.eval(i, scopes))),
                };
                let v = match self.rhs(value, scopes)? {
                    Ok(v) => v,
                    Err(flow) => return Ok(flow),
                };
                match (find(scopes, target.name())?, idx) {
                    (Value::Int(slot), None) => *slot = v,
                    (Value::Array(xs), Some(i)) => {
                        let k = attempt!(index_of(&i, xs.len(), s.loc));
                        xs[k] = v;
                    }
                    _ => return Err(InterpError::Malformed("assignment shape".into())),
                }
            }
            StmtKind::If { cond, then_block, else_block } => {
                let c = attempt!(self.decision(cond, scopes));
                self.res.decisions.push((s.loc, c));
                if c {
                    return self.block(&then_block.stmts, scopes);
                } else if let Some(b) = else_block {
                    return self.block(&b.stmts, scopes);
                }
            }
            StmtKind::While { cond, body } => loop {
                let c = attempt!(self.decision(cond, scopes));
                self.res.decisions.push((s.loc, c));
                if !c {
                    break;
                }
                match self.block(&body.stmts, scopes)? {
                    Flow::Normal => {}
                    other => return Ok(other),
                }
                if !self.tick(s.loc) {
                    return Ok(Flow::Halt(Outcome::StepLimit));
                }
            },
            StmtKind::Return(e) => {
                let v = match e {
                    None => None,
                    Some(e) => match self.rhs(e, scopes)? {
                        Ok(v) => Some(v),
                        Err(flow) => return Ok(flow),
                    },
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Block(b) => return self.block(&b.stmts, scopes),
            StmtKind::Label { id, predicate } => {
                let truth = match self.eval(predicate, scopes) {
                    Ok(v) => v.truthy(),
                    Err(Fault::Rte(..)) => false,
                    Err(Fault::Error(e)) => return Err(e),
                };
                self.res.label_events.push((*id, truth));
                if let Some(h) = self.hook.as_mut() {
                    h.on_label(*id, truth);
                }
            }
            StmtKind::Nop => {}
            StmtKind::Assert(e) => {
                let ok = attempt!(self.eval(e, scopes)).truthy();
                self.res.decisions.push((s.loc, ok));
                if !ok {
                    return Ok(Flow::Halt(Outcome::AssertFailed(s.loc)));
                }
            }
            StmtKind::SilentExit => return Ok(Flow::Halt(Outcome::SilentExited)),
            StmtKind::NondetGuard { id, body } => {
                let name = nondet_name(*id);
                let v = match self.input.get(&name) {
                    Some(Value::Int(v)) => v.truthy(),
                    Some(_) => return Err(InterpError::InputShape(name)),
                    None => return Err(InterpError::InputMissing(name)),
                };
                self.res.decisions.push((s.loc, v));
                if v {
                    return self.block(&body.stmts, scopes);
                }
            }
            StmtKind::CoveredGuard { id, body } => {
                let covered = self.hook.as_ref().is_some_and(|h| h.is_covered(*id));
                if !covered {
                    return self.block(&body.stmts, scopes);
                }
            }
            StmtKind::SetCovered(id) => {
                if let Some(h) = self.hook.as_mut() {
                    h.on_set_covered(*id);
                }
            }
        }
        Ok(Flow::Normal)
    }
}
