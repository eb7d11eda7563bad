//! Static checks: scoping, array usage, call shapes, recursion, returns.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    UndeclaredVariable { name: String, loc: Loc },
    Redeclared { name: String, loc: Loc },
    UnknownFunction { name: String, loc: Loc },
    ArityMismatch { name: String, loc: Loc, expected: usize, found: usize },
    TypeMismatch { message: String, loc: Loc },
    NonPositiveArrayLength { name: String, loc: Loc },
    DuplicateParameter { name: String, loc: Loc },
    NestedCall { loc: Loc },
    RecursionForbidden { cycle: Vec<String> },
    MissingReturn { function: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::UndeclaredVariable { name, loc } => {
                write!(f, "{loc}: undeclared variable `{name}`")
            }
            Diagnostic::Redeclared { name, loc } => write!(f, "{loc}: `{name}` redeclared"),
            Diagnostic::UnknownFunction { name, loc } => {
                write!(f, "{loc}: call to undefined function `{name}`")
            }
            Diagnostic::ArityMismatch { name, loc, expected, found } => write!(
                f,
                "{loc}: `{name}` expects {expected} argument(s), found {found}"
            ),
            Diagnostic::TypeMismatch { message, loc } => write!(f, "{loc}: {message}"),
            Diagnostic::NonPositiveArrayLength { name, loc } => {
                write!(f, "{loc}: array `{name}` must have positive length")
            }
            Diagnostic::DuplicateParameter { name, loc } => {
                write!(f, "{loc}: duplicate parameter `{name}`")
            }
            Diagnostic::NestedCall { loc } => write!(
                f,
                "{loc}: calls may only appear as the whole right-hand side of a declaration, assignment or return"
            ),
            Diagnostic::RecursionForbidden { cycle } => {
                write!(f, "recursion is not allowed: {}", cycle.join(" -> "))
            }
            Diagnostic::MissingReturn { function } => {
                write!(f, "function `{function}` may end without returning a value")
            }
        }
    }
}

type Scope = Vec<HashMap<String, Type>>;

fn lookup(scopes: &Scope, name: &str) -> Option<Type> {
    scopes.iter().rev().find_map(|s| s.get(name).copied())
}

struct Checker<'p> {
    program: &'p Program,
    diags: Vec<Diagnostic>,
    calls: BTreeMap<&'p str, Vec<&'p str>>,
    current: &'p str,
}

impl<'p> Checker<'p> {
    fn expr(&mut self, e: &'p Expr, scopes: &Scope, call_allowed: bool) {
        match &e.kind {
            ExprKind::Int(_) => {}
            ExprKind::Var(n) => match lookup(scopes, n) {
                None => self.diags.push(Diagnostic::UndeclaredVariable { name: n.clone(), loc: e.loc }),
                Some(Type::IntArray(_)) => self.diags.push(Diagnostic::TypeMismatch {
                    message: format!("array `{n}` used as a scalar"),
                    loc: e.loc,
                }),
                Some(Type::Int) => {}
            },
            ExprKind::Index(n, i) => {
                match lookup(scopes, n) {
                    None => self
                        .diags
                        .push(Diagnostic::UndeclaredVariable { name: n.clone(), loc: e.loc }),
                    Some(Type::Int) => self.diags.push(Diagnostic::TypeMismatch {
                        message: format!("`{n}` is not an array"),
                        loc: e.loc,
                    }),
                    Some(Type::IntArray(_)) => {}
                }
                self.expr(i, scopes, false);
            }
            ExprKind::Unary(_, x) | ExprKind::Abs(x) | ExprKind::Guarded(x) => {
                self.expr(x, scopes, false)
            }
            ExprKind::Binary(_, l, r) => {
                self.expr(l, scopes, false);
                self.expr(r, scopes, false);
            }
            ExprKind::Call(name, args) => {
                if !call_allowed {
                    self.diags.push(Diagnostic::NestedCall { loc: e.loc });
                }
                self.calls.entry(self.current).or_default().push(name.as_str());
                let Some(callee) = self.program.function(name) else {
                    self.diags.push(Diagnostic::UnknownFunction { name: name.clone(), loc: e.loc });
                    return;
                };
                if callee.params.len() != args.len() {
                    self.diags.push(Diagnostic::ArityMismatch {
                        name: name.clone(),
                        loc: e.loc,
                        expected: callee.params.len(),
                        found: args.len(),
                    });
                }
                for (param, arg) in callee.params.iter().zip(args) {
                    match param.ty {
                        Type::Int => self.expr(arg, scopes, false),
                        Type::IntArray(len) => {
                            let ok = matches!(&arg.kind, ExprKind::Var(n)
                                if lookup(scopes, n) == Some(Type::IntArray(len)));
                            if !ok {
                                self.diags.push(Diagnostic::TypeMismatch {
                                    message: format!(
                                        "parameter `{}` of `{name}` expects an array of length {len}",
                                        param.name
                                    ),
                                    loc: arg.loc,
                                });
                            }
                        }
                    }
                }
            }
        }
    }

    fn block(&mut self, b: &'p Block, scopes: &mut Scope) {
        scopes.push(HashMap::new());
        for s in &b.stmts {
            self.stmt(s, scopes);
        }
        scopes.pop();
    }

    fn stmt(&mut self, s: &'p Stmt, scopes: &mut Scope) {
        match &s.kind {
            StmtKind::Decl { name, ty, init } => {
                if let Some(e) = init {
                    self.expr(e, scopes, true);
                }
                if let Type::IntArray(0) = ty {
                    self.diags.push(Diagnostic::NonPositiveArrayLength { name: name.clone(), loc: s.loc });
                }
                // No shadowing: labels copied to the end of a loop body must
                // still see the loop condition's variables.
                if scopes.iter().any(|sc| sc.contains_key(name)) {
                    self.diags.push(Diagnostic::Redeclared { name: name.clone(), loc: s.loc });
                }
                scopes.last_mut().expect("scope").insert(name.clone(), *ty);
            }
            StmtKind::Assign { target, value } => {
                match target {
                    LValue::Var(n) => match lookup(scopes, n) {
                        None => self
                            .diags
                            .push(Diagnostic::UndeclaredVariable { name: n.clone(), loc: s.loc }),
                        Some(Type::IntArray(_)) => self.diags.push(Diagnostic::TypeMismatch {
                            message: format!("cannot assign to array `{n}` as a whole"),
                            loc: s.loc,
                        }),
                        Some(Type::Int) => {}
                    },
                    LValue::Index(n, i) => {
                        match lookup(scopes, n) {
                            None => self
                                .diags
                                .push(Diagnostic::UndeclaredVariable { name: n.clone(), loc: s.loc }),
                            Some(Type::Int) => self.diags.push(Diagnostic::TypeMismatch {
                                message: format!("`{n}` is not an array"),
                                loc: s.loc,
                            }),
                            Some(Type::IntArray(_)) => {}
                        }
                        self.expr(i, scopes, false);
                    }
                }
                self.expr(value, scopes, true);
            }
            StmtKind::Return(Some(e)) => self.expr(e, scopes, true),
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => {
                self.expr(cond, scopes, false)
            }
            StmtKind::Label { predicate, .. } | StmtKind::Assert(predicate) => {
                self.expr(predicate, scopes, false)
            }
            _ => {}
        }
        for b in s.blocks() {
            self.block(b, scopes);
        }
    }
}

fn always_returns(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match &s.kind {
        StmtKind::Return(_) | StmtKind::SilentExit => true,
        StmtKind::Block(b) => always_returns(&b.stmts),
        StmtKind::If { then_block, else_block: Some(e), .. } => {
            always_returns(&then_block.stmts) && always_returns(&e.stmts)
        }
        _ => false,
    })
}

fn find_cycle<'a>(calls: &BTreeMap<&'a str, Vec<&'a str>>) -> Option<Vec<String>> {
    fn dfs<'a>(
        f: &'a str,
        calls: &BTreeMap<&'a str, Vec<&'a str>>,
        stack: &mut Vec<&'a str>,
        done: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        if let Some(pos) = stack.iter().position(|g| *g == f) {
            let mut cycle: Vec<String> = stack[pos..].iter().map(|s| s.to_string()).collect();
            cycle.push(f.to_string());
            return Some(cycle);
        }
        if done.contains(&f) {
            return None;
        }
        stack.push(f);
        for g in calls.get(f).into_iter().flatten() {
            if let Some(c) = dfs(g, calls, stack, done) {
                return Some(c);
            }
        }
        stack.pop();
        done.push(f);
        None
    }
    let mut done = Vec::new();
    for f in calls.keys() {
        if let Some(c) = dfs(f, calls, &mut Vec::new(), &mut done) {
            return Some(c);
        }
    }
    None
}

/// Returns every diagnostic of `p`; an empty list means the program is well formed.
pub fn typecheck(p: &Program) -> Vec<Diagnostic> {
    let mut ck = Checker { program: p, diags: Vec::new(), calls: BTreeMap::new(), current: "" };
    for f in &p.functions {
        ck.current = &f.name;
        let mut params = HashMap::new();
        for param in &f.params {
            if let Type::IntArray(0) = param.ty {
                ck.diags.push(Diagnostic::NonPositiveArrayLength { name: param.name.clone(), loc: param.loc });
            }
            if params.insert(param.name.clone(), param.ty).is_some() {
                ck.diags.push(Diagnostic::DuplicateParameter { name: param.name.clone(), loc: param.loc });
            }
        }
        let mut scopes = vec![params];
        ck.block(&f.body, &mut scopes);
        if !always_returns(&f.body.stmts) {
            ck.diags.push(Diagnostic::MissingReturn { function: f.name.clone() });
        }
    }
    if let Some(cycle) = find_cycle(&ck.calls) {
        ck.diags.push(Diagnostic::RecursionForbidden { cycle });
    }
    ck.diags
}

/// Variables in scope immediately before the statement at `target`, or `None`
/// when no statement has that location.
pub fn scope_before(p: &Program, target: Loc) -> Option<HashMap<String, Type>> {
    fn search(stmts: &[Stmt], target: Loc, scopes: &mut Scope) -> Option<HashMap<String, Type>> {
        scopes.push(HashMap::new());
        for s in stmts {
            if s.loc == target {
                let mut flat = HashMap::new();
                for sc in scopes.iter() {
                    flat.extend(sc.iter().map(|(k, v)| (k.clone(), *v)));
                }
                return Some(flat);
            }
            for b in s.blocks() {
                if let Some(found) = search(&b.stmts, target, scopes) {
                    return Some(found);
                }
            }
            if let StmtKind::Decl { name, ty, .. } = &s.kind {
                scopes.last_mut().expect("scope").insert(name.clone(), *ty);
            }
        }
        scopes.pop();
        None
    }
    p.functions.iter().find_map(|f| {
        let params = f.params.iter().map(|p| (p.name.clone(), p.ty)).collect();
        search(&f.body.stmts, target, &mut vec![params])
    })
}
