//! Lexer and recursive-descent parser for MiniC.
//!
//! Besides the user-facing grammar, the parser accepts the printed forms of
//! instrumentation statements (`__nop();`, `__assert(e);`, `__silent_exit();`,
//! `__set_covered(n);`, `if (__nondet_n) {..}`, `if (!__covered(n)) {..}`) and
//! the label-predicate wrapper `__pred(e)`, so instrumented programs round-trip.

use thiserror::Error;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("{line}:{col}: duplicate function `{name}`")]
    DuplicateFunction { name: String, line: u32, col: u32 },
    #[error("unknown entry function `{0}`")]
    UnknownEntry(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(i64),
    Ident(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

const PUNCTS: [&str; 23] = [
    "<=", ">=", "==", "!=", "&&", "||", "(", ")", "{", "}", "[", "]", ";", ",", "=", "+", "-",
    "*", "/", "%", "<", ">", "!",
];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (tl, tc) = (line, col);
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<i64>().map_err(|_| ParseError::Syntax {
                line: tl,
                col: tc,
                message: format!("integer literal `{text}` out of range"),
            })?;
            col += (i - start) as u32;
            out.push(Token { tok: Tok::Int(v), line: tl, col: tc });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += (i - start) as u32;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                col: tc,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                i += p.len();
                col += p.len() as u32;
                out.push(Token { tok: Tok::Punct(p), line: tl, col: tc });
            }
            None => {
                return Err(ParseError::Syntax {
                    line: tl,
                    col: tc,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    seq: u32,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn loc(&mut self) -> Loc {
        let t = &self.toks[self.pos];
        let l = Loc::new(t.line, t.col, self.seq);
        self.seq += 1;
        l
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(ParseError::Syntax { line: t.line, col: t.col, message: message.into() })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Int(v) => format!("`{v}`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(q) if q == s)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {}", self.describe()))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.is_ident(kw) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.err(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn int_lit(&mut self) -> PResult<i64> {
        match *self.peek() {
            Tok::Int(v) => {
                self.pos += 1;
                Ok(v)
            }
            _ => self.err(format!("expected integer, found {}", self.describe())),
        }
    }

    fn label_id(&mut self) -> PResult<u32> {
        let v = self.int_lit()?;
        u32::try_from(v).or_else(|_| self.err("label id out of range"))
    }

    fn program(&mut self) -> PResult<Vec<FunctionDef>> {
        let mut funcs: Vec<FunctionDef> = Vec::new();
        loop {
            if matches!(self.peek(), Tok::Eof) {
                break;
            }
            let f = self.fundef()?;
            if funcs.iter().any(|g| g.name == f.name) {
                return Err(ParseError::DuplicateFunction {
                    name: f.name,
                    line: f.loc.line,
                    col: f.loc.col,
                });
            }
            funcs.push(f);
        }
        if funcs.is_empty() {
            return self.err("expected at least one function definition");
        }
        Ok(funcs)
    }

    fn fundef(&mut self) -> PResult<FunctionDef> {
        let loc = self.loc();
        self.expect_keyword("int")?;
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let ploc = self.loc();
                self.expect_keyword("int")?;
                let pname = self.ident()?;
                let ty = self.array_suffix()?;
                params.push(Param { loc: ploc, name: pname, ty });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let body = self.block()?;
        Ok(FunctionDef { loc, name, params, body, return_type: Type::Int })
    }

    fn array_suffix(&mut self) -> PResult<Type> {
        if self.eat_punct("[") {
            let n = self.int_lit()?;
            self.expect_punct("]")?;
            Ok(Type::IntArray(n as usize))
        } else {
            Ok(Type::Int)
        }
    }

    fn block(&mut self) -> PResult<Block> {
        let loc = self.loc();
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if matches!(self.peek(), Tok::Eof) {
                return self.err("unterminated block");
            }
            stmts.push(self.stmt()?);
        }
        self.pos += 1;
        Ok(Block::new(loc, stmts))
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let loc = self.loc();
        if self.is_punct("{") {
            return Ok(Stmt::new(loc, StmtKind::Block(self.block()?)));
        }
        let word = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return self.err(format!("expected statement, found {}", self.describe())),
        };
        let kind = match word.as_str() {
            "int" => {
                self.pos += 1;
                let name = self.ident()?;
                let ty = self.array_suffix()?;
                let init = if ty == Type::Int && self.eat_punct("=") {
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect_punct(";")?;
                StmtKind::Decl { name, ty, init }
            }
            "if" => {
                self.pos += 1;
                if let Some(kind) = self.instrumented_if()? {
                    kind
                } else {
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    let then_block = self.block()?;
                    let else_block = if self.is_ident("else") {
                        self.pos += 1;
                        Some(self.block()?)
                    } else {
                        None
                    };
                    StmtKind::If { cond, then_block, else_block }
                }
            }
            "while" => {
                self.pos += 1;
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let body = self.block()?;
                StmtKind::While { cond, body }
            }
            "return" => {
                self.pos += 1;
                let e = if self.is_punct(";") { None } else { Some(self.expr()?) };
                self.expect_punct(";")?;
                StmtKind::Return(e)
            }
            "__nop" | "__silent_exit" => {
                self.pos += 1;
                self.expect_punct("(")?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                if word == "__nop" {
                    StmtKind::Nop
                } else {
                    StmtKind::SilentExit
                }
            }
            "__assert" => {
                self.pos += 1;
                self.expect_punct("(")?;
                let e = self.expr()?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                StmtKind::Assert(e)
            }
            "__set_covered" => {
                self.pos += 1;
                self.expect_punct("(")?;
                let id = self.label_id()?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                StmtKind::SetCovered(id)
            }
            _ => {
                let name = self.ident()?;
                let target = if self.eat_punct("[") {
                    let i = self.expr()?;
                    self.expect_punct("]")?;
                    LValue::Index(name, i)
                } else {
                    LValue::Var(name)
                };
                self.expect_punct("=")?;
                let value = self.expr()?;
                self.expect_punct(";")?;
                StmtKind::Assign { target, value }
            }
        };
        Ok(Stmt::new(loc, kind))
    }

    /// Recognizes `(__nondet_<id>) {..}` and `(!__covered(<id>)) {..}` after `if`.
    fn instrumented_if(&mut self) -> PResult<Option<StmtKind>> {
        if !self.is_punct("(") {
            return Ok(None);
        }
        if let Tok::Ident(s) = self.peek_at(1) {
            if let Some(id) = s.strip_prefix("__nondet_") {
                if matches!(self.peek_at(2), Tok::Punct(")")) {
                    let id: u32 = match id.parse() {
                        Ok(v) => v,
                        Err(_) => return self.err(format!("malformed nondet guard `{s}`")),
                    };
                    self.pos += 3;
                    let body = self.block()?;
                    return Ok(Some(StmtKind::NondetGuard { id, body }));
                }
            }
        }
        let covered = matches!(self.peek_at(1), Tok::Punct("!"))
            && matches!(self.peek_at(2), Tok::Ident(s) if s == "__covered");
        if covered {
            self.pos += 3;
            self.expect_punct("(")?;
            let id = self.label_id()?;
            self.expect_punct(")")?;
            self.expect_punct(")")?;
            let body = self.block()?;
            return Ok(Some(StmtKind::CoveredGuard { id, body }));
        }
        Ok(None)
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Tok::Punct(p) = self.peek() {
            let Some(op) = binop_of(p).filter(|op| op.precedence() >= min_prec) else { break };
            let loc = self.loc();
            self.pos += 1;
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::binary(loc, op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        if self.eat_punct("!") {
            let e = self.unary()?;
            return Ok(Expr::new(loc, ExprKind::Unary(UnOp::Not, Box::new(e))));
        }
        if self.eat_punct("-") {
            let e = self.unary()?;
            return Ok(Expr::new(loc, ExprKind::Unary(UnOp::Neg, Box::new(e))));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.pos += 1;
                Ok(Expr::int(loc, v))
            }
            Tok::Punct("(") => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "abs" || s == "__pred" => {
                self.pos += 1;
                self.expect_punct("(")?;
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(if s == "abs" { Expr::abs(loc, e) } else { Expr::guarded(loc, e) })
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.eat_punct("[") {
                    let i = self.expr()?;
                    self.expect_punct("]")?;
                    Ok(Expr::new(loc, ExprKind::Index(name, Box::new(i))))
                } else if self.eat_punct("(") {
                    let mut args = Vec::new();
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                    Ok(Expr::new(loc, ExprKind::Call(name, args)))
                } else {
                    Ok(Expr::var(loc, name))
                }
            }
            _ => self.err(format!("expected expression, found {}", self.describe())),
        }
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "int" | "if" | "else" | "while" | "return" | "abs")
}

fn binop_of(p: &str) -> Option<BinOp> {
    Some(match p {
        "+" => BinOp::Add,
        "-" => BinOp::Sub,
        "*" => BinOp::Mul,
        "/" => BinOp::Div,
        "%" => BinOp::Rem,
        "<" => BinOp::Lt,
        "<=" => BinOp::Le,
        ">" => BinOp::Gt,
        ">=" => BinOp::Ge,
        "==" => BinOp::Eq,
        "!=" => BinOp::Ne,
        "&&" => BinOp::And,
        "||" => BinOp::Or,
        _ => return None,
    })
}

/// Parses a program. The entry function is `main` when defined, otherwise the
/// last function in the file.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    parse_with_entry(source, None)
}

pub fn parse_with_entry(source: &str, entry: Option<&str>) -> Result<Program, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser { toks, pos: 0, seq: 0 };
    let functions = p.program()?;
    let entry = match entry {
        Some(e) => {
            if !functions.iter().any(|f| f.name == e) {
                return Err(ParseError::UnknownEntry(e.to_string()));
            }
            e.to_string()
        }
        None => functions
            .iter()
            .find(|f| f.name == "main")
            .unwrap_or_else(|| functions.last().expect("nonempty"))
            .name
            .clone(),
    };
    Ok(Program { functions, entry, next_seq: p.seq })
}

/// Parses a standalone expression, e.g. a custom label predicate.
pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser { toks, pos: 0, seq: 0 };
    let e = p.expr()?;
    if !matches!(p.peek(), Tok::Eof) {
        return p.err(format!("trailing input {}", p.describe()));
    }
    Ok(e)
}
