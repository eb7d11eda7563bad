//! Pretty-printer emitting the parser's grammar.

use std::fmt::Write;

use super::ast::*;

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn write_expr(out: &mut String, e: &Expr, ctx_prec: u8) {
    match &e.kind {
        ExprKind::Int(v) => {
            let _ = write!(out, "{v}");
        }
        ExprKind::Var(n) => out.push_str(n),
        ExprKind::Index(n, i) => {
            out.push_str(n);
            out.push('[');
            write_expr(out, i, 0);
            out.push(']');
        }
        ExprKind::Unary(op, inner) => {
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            if is_atomic_syntax(inner) {
                write_expr(out, inner, 7);
            } else {
                out.push('(');
                write_expr(out, inner, 0);
                out.push(')');
            }
        }
        ExprKind::Binary(op, l, r) => {
            let p = op.precedence();
            let paren = p < ctx_prec;
            if paren {
                out.push('(');
            }
            write_expr(out, l, p);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, r, p + 1);
            if paren {
                out.push(')');
            }
        }
        ExprKind::Abs(inner) | ExprKind::Guarded(inner) => {
            out.push_str(if matches!(e.kind, ExprKind::Abs(_)) { "abs(" } else { "__pred(" });
            write_expr(out, inner, 0);
            out.push(')');
        }
        ExprKind::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, 0);
            }
            out.push(')');
        }
    }
}

fn is_atomic_syntax(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Int(v) => *v >= 0,
        ExprKind::Var(_)
        | ExprKind::Index(..)
        | ExprKind::Abs(_)
        | ExprKind::Guarded(_)
        | ExprKind::Call(..)
        | ExprKind::Unary(..) => true,
        ExprKind::Binary(..) => false,
    }
}

fn type_suffix(ty: Type) -> String {
    match ty {
        Type::Int => String::new(),
        Type::IntArray(n) => format!("[{n}]"),
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_block(out: &mut String, b: &Block, depth: usize) {
    out.push_str("{\n");
    for s in &b.stmts {
        write_stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Decl { name, ty, init } => {
            let _ = write!(out, "int {name}{}", type_suffix(*ty));
            if let Some(e) = init {
                let _ = write!(out, " = {}", expr_to_string(e));
            }
            out.push(';');
        }
        StmtKind::Assign { target, value } => {
            match target {
                LValue::Var(n) => out.push_str(n),
                LValue::Index(n, i) => {
                    let _ = write!(out, "{n}[{}]", expr_to_string(i));
                }
            }
            let _ = write!(out, " = {};", expr_to_string(value));
        }
        StmtKind::If { cond, then_block, else_block } => {
            let _ = write!(out, "if ({}) ", expr_to_string(cond));
            write_block(out, then_block, depth);
            if let Some(b) = else_block {
                out.push_str(" else ");
                write_block(out, b, depth);
            }
        }
        StmtKind::While { cond, body } => {
            let _ = write!(out, "while ({}) ", expr_to_string(cond));
            write_block(out, body, depth);
        }
        StmtKind::Return(e) => match e {
            Some(e) => {
                let _ = write!(out, "return {};", expr_to_string(e));
            }
            None => out.push_str("return;"),
        },
        StmtKind::Block(b) => write_block(out, b, depth),
        StmtKind::Label { id, predicate } => {
            let _ = write!(out, "// label {id}: {}", expr_to_string(predicate));
        }
        StmtKind::Nop => out.push_str("__nop();"),
        StmtKind::Assert(e) => {
            let _ = write!(out, "__assert({});", expr_to_string(e));
        }
        StmtKind::SilentExit => out.push_str("__silent_exit();"),
        StmtKind::NondetGuard { id, body } => {
            let _ = write!(out, "if (__nondet_{id}) ");
            write_block(out, body, depth);
        }
        StmtKind::CoveredGuard { id, body } => {
            let _ = write!(out, "if (!__covered({id})) ");
            write_block(out, body, depth);
        }
        StmtKind::SetCovered(id) => {
            let _ = write!(out, "__set_covered({id});");
        }
    }
    out.push('\n');
}

/// Renders a whole program. Label statements appear as `// label <id>: <p>`
/// comment lines, so an annotated program prints in the informal notation and
/// re-parses as its stripped form.
pub fn program_to_string(p: &Program) -> String {
    let mut out = String::new();
    for (i, f) in p.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| format!("int {}{}", p.name, type_suffix(p.ty)))
            .collect();
        let _ = write!(out, "int {}({}) ", f.name, params.join(", "));
        write_block(&mut out, &f.body, 0);
        out.push('\n');
    }
    out
}
