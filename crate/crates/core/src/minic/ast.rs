use std::fmt;

/// Source position of an AST node. `seq` disambiguates nodes that share a
/// line and column (including nodes synthesized by transforms), so locations
/// are unique within a program and totally ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Loc {
    pub line: u32,
    pub col: u32,
    pub seq: u32,
}

impl Loc {
    pub fn new(line: u32, col: u32, seq: u32) -> Self {
        Loc { line, col, seq }
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Type {
    Int,
    IntArray(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength, higher binds tighter (C ordering).
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem)
    }

    pub fn is_relational(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Expr {
    pub loc: Loc,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExprKind {
    Int(i64),
    Var(String),
    Index(String, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Abs(Box<Expr>),
    /// Only legal as the whole right-hand side of a declaration, assignment or
    /// return (enforced by the type checker).
    Call(String, Vec<Expr>),
    /// Label-predicate context: a runtime error while evaluating the inner
    /// expression makes the whole expression 0 instead of aborting the run.
    Guarded(Box<Expr>),
}

impl Expr {
    pub fn new(loc: Loc, kind: ExprKind) -> Self {
        Expr { loc, kind }
    }

    pub fn int(loc: Loc, v: i64) -> Self {
        Expr::new(loc, ExprKind::Int(v))
    }

    pub fn var(loc: Loc, name: impl Into<String>) -> Self {
        Expr::new(loc, ExprKind::Var(name.into()))
    }

    pub fn not(loc: Loc, e: Expr) -> Self {
        Expr::new(loc, ExprKind::Unary(UnOp::Not, Box::new(e)))
    }

    pub fn binary(loc: Loc, op: BinOp, l: Expr, r: Expr) -> Self {
        Expr::new(loc, ExprKind::Binary(op, Box::new(l), Box::new(r)))
    }

    pub fn abs(loc: Loc, e: Expr) -> Self {
        Expr::new(loc, ExprKind::Abs(Box::new(e)))
    }

    pub fn guarded(loc: Loc, e: Expr) -> Self {
        Expr::new(loc, ExprKind::Guarded(Box::new(e)))
    }

    /// Pre-order visit of this expression and all sub-expressions.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Int(_) | ExprKind::Var(_) => {}
            ExprKind::Index(_, i) => i.visit(f),
            ExprKind::Unary(_, e) | ExprKind::Abs(e) | ExprKind::Guarded(e) => e.visit(f),
            ExprKind::Binary(_, l, r) => {
                l.visit(f);
                r.visit(f);
            }
            ExprKind::Call(_, args) => args.iter().for_each(|a| a.visit(f)),
        }
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut Expr)) {
        f(self);
        match &mut self.kind {
            ExprKind::Int(_) | ExprKind::Var(_) => {}
            ExprKind::Index(_, i) => i.visit_mut(f),
            ExprKind::Unary(_, e) | ExprKind::Abs(e) | ExprKind::Guarded(e) => e.visit_mut(f),
            ExprKind::Binary(_, l, r) => {
                l.visit_mut(f);
                r.visit_mut(f);
            }
            ExprKind::Call(_, args) => args.iter_mut().for_each(|a| a.visit_mut(f)),
        }
    }

    /// Names of variables (scalars and arrays) read by this expression.
    pub fn free_vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit(&mut |e| match &e.kind {
            ExprKind::Var(n) | ExprKind::Index(n, _) => out.push(n.as_str()),
            _ => {}
        });
        out
    }

    pub fn contains_call(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= matches!(e.kind, ExprKind::Call(..)));
        found
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LValue {
    Var(String),
    Index(String, Expr),
}

impl LValue {
    pub fn name(&self) -> &str {
        match self {
            LValue::Var(n) | LValue::Index(n, _) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Block {
    pub loc: Loc,
    pub stmts: Vec<Stmt>,
}

impl Block {
    pub fn new(loc: Loc, stmts: Vec<Stmt>) -> Self {
        Block { loc, stmts }
    }

    /// All statements, nested ones included, in pre-order.
    pub fn walk(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        let mut stack: Vec<&Stmt> = self.stmts.iter().rev().collect();
        while let Some(s) = stack.pop() {
            out.push(s);
            let children: Vec<&Block> = match &s.kind {
                StmtKind::If { then_block, else_block, .. } => std::iter::once(then_block).chain(else_block).collect(),
                StmtKind::While { body, .. }
                | StmtKind::NondetGuard { body, .. }
                | StmtKind::CoveredGuard { body, .. }
                | StmtKind::Block(body) => vec![body],
                _ => Vec::new(),
            };
            for b in children.into_iter().rev() {
                stack.extend(b.stmts.iter().rev());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Stmt {
    pub loc: Loc,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StmtKind {
    Decl {
        name: String,
        ty: Type,
        init: Option<Expr>,
    },
    Assign {
        target: LValue,
        value: Expr,
    },
    If {
        cond: Expr,
        then_block: Block,
        else_block: Option<Block>,
    },
    While {
        cond: Expr,
        body: Block,
    },
    Return(Option<Expr>),
    Block(Block),
    /// Coverage label `(loc, predicate)`; only in annotated programs.
    Label {
        id: u32,
        predicate: Expr,
    },
    // Instrumentation-only forms below.
    Nop,
    Assert(Expr),
    SilentExit,
    /// `if (__nondet_<id>) { ... }`: branch on the fresh input `nondet_<id>`.
    NondetGuard {
        id: u32,
        body: Block,
    },
    /// `if (!__covered(<id>)) { ... }`: concrete query of the coverage store.
    CoveredGuard {
        id: u32,
        body: Block,
    },
    /// `__set_covered(<id>);` (replayer only).
    SetCovered(u32),
}

impl StmtKind {
    pub fn is_instrumentation(&self) -> bool {
        matches!(
            self,
            StmtKind::Nop
                | StmtKind::Assert(_)
                | StmtKind::SilentExit
                | StmtKind::NondetGuard { .. }
                | StmtKind::CoveredGuard { .. }
                | StmtKind::SetCovered(_)
        )
    }
}

impl Stmt {
    pub fn new(loc: Loc, kind: StmtKind) -> Self {
        Stmt { loc, kind }
    }

    /// Nested blocks of this statement, in source order.
    pub fn blocks(&self) -> Vec<&Block> {
        match &self.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => std::iter::once(then_block).chain(else_block.iter()).collect(),
            StmtKind::While { body, .. }
            | StmtKind::NondetGuard { body, .. }
            | StmtKind::CoveredGuard { body, .. }
            | StmtKind::Block(body) => vec![body],
            _ => Vec::new(),
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Block> {
        match &mut self.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => std::iter::once(then_block).chain(else_block.iter_mut()).collect(),
            StmtKind::While { body, .. }
            | StmtKind::NondetGuard { body, .. }
            | StmtKind::CoveredGuard { body, .. }
            | StmtKind::Block(body) => vec![body],
            _ => Vec::new(),
        }
    }

    /// Expressions owned directly by this statement (not by nested blocks).
    pub fn exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Decl { init, .. } => init.iter().collect(),
            StmtKind::Assign { target, value } => match target {
                LValue::Var(_) => vec![value],
                LValue::Index(_, i) => vec![i, value],
            },
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Label { predicate, .. } => vec![predicate],
            StmtKind::Assert(e) => vec![e],
            _ => Vec::new(),
        }
    }

    pub fn exprs_mut(&mut self) -> Vec<&mut Expr> {
        match &mut self.kind {
            StmtKind::Decl { init, .. } => init.iter_mut().collect(),
            StmtKind::Assign { target, value } => match target {
                LValue::Var(_) => vec![value],
                LValue::Index(_, i) => vec![i, value],
            },
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::Return(e) => e.iter_mut().collect(),
            StmtKind::Label { predicate, .. } => vec![predicate],
            StmtKind::Assert(e) => vec![e],
            _ => Vec::new(),
        }
    }

    /// Pre-order visit of this statement and every nested statement.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        for b in self.blocks() {
            for s in &b.stmts {
                s.visit(f);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Param {
    pub loc: Loc,
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunctionDef {
    pub loc: Loc,
    pub name: String,
    pub params: Vec<Param>,
    pub body: Block,
    /// Always `Type::Int`: MiniC functions return int.
    pub return_type: Type,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    pub functions: Vec<FunctionDef>,
    pub entry: String,
    /// Next unused `Loc::seq`; transforms mint fresh locations from it.
    pub next_seq: u32,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn entry_function(&self) -> &FunctionDef {
        self.function(&self.entry)
            .expect("program invariant: entry function exists")
    }

    /// A new location at the same line/column as `near`, unique in this program.
    pub fn fresh_loc(&mut self, near: Loc) -> Loc {
        let seq = self.next_seq;
        self.next_seq += 1;
        Loc::new(near.line, near.col, seq)
    }

    /// Pre-order visit of every statement of every function.
    pub fn visit_stmts<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        for func in &self.functions {
            for s in &func.body.stmts {
                s.visit(f);
            }
        }
    }

    pub fn visit_blocks_mut(&mut self, f: &mut impl FnMut(&mut Block)) {
        fn go(b: &mut Block, f: &mut impl FnMut(&mut Block)) {
            f(b);
            for s in &mut b.stmts {
                for inner in s.blocks_mut() {
                    go(inner, f);
                }
            }
        }
        for func in &mut self.functions {
            go(&mut func.body, f);
        }
    }

    /// Ids of every `__nondet_<id>` guard, ascending and deduplicated.
    pub fn nondet_ids(&self) -> Vec<u32> {
        let mut ids = Vec::new();
        self.visit_stmts(&mut |s| {
            if let StmtKind::NondetGuard { id, .. } = s.kind {
                ids.push(id);
            }
        });
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn contains(&self, pred: impl Fn(&StmtKind) -> bool) -> bool {
        let mut found = false;
        self.visit_stmts(&mut |s| found |= pred(&s.kind));
        found
    }

    /// Copy with every location zeroed, for comparisons modulo locations.
    pub fn without_locs(&self) -> Program {
        let mut p = self.clone();
        p.next_seq = 0;
        for func in &mut p.functions {
            func.loc = Loc::default();
            for param in &mut func.params {
                param.loc = Loc::default();
            }
        }
        p.visit_blocks_mut(&mut |b| {
            b.loc = Loc::default();
            for s in &mut b.stmts {
                s.loc = Loc::default();
                for e in s.exprs_mut() {
                    e.visit_mut(&mut |e| e.loc = Loc::default());
                }
            }
        });
        p
    }
}

pub fn nondet_name(id: u32) -> String {
    format!("nondet_{id}")
}
