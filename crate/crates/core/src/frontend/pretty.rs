//! Renders an AST back to MiniC source.

use super::ast::*;
use super::lexer::escape_bytes;
use std::fmt::Write;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for r in &p.records {
        let _ = writeln!(out, "struct {} {{", r.name);
        for (f, ty) in &r.fields {
            let _ = writeln!(out, "    {};", decl(ty, f));
        }
        out.push_str("};\n");
    }
    for g in &p.globals {
        out.push_str(&var_decl(g));
        out.push('\n');
    }
    for f in &p.functions {
        let params: Vec<_> = f.params.iter().map(|p| decl(&p.ty, &p.name)).collect();
        let _ = writeln!(out, "{}({}) {{", decl(&f.ret, &f.name), params.join(", "));
        block(&mut out, &f.body, 1);
        out.push_str("}\n");
    }
    out
}

fn decl(ty: &Type, name: &str) -> String {
    match ty {
        Type::File | Type::VoidPtr | Type::RecordPtr(_) => format!("{ty}{name}"),
        _ => format!("{ty} {name}"),
    }
}

fn var_decl(d: &VarDecl) -> String {
    match &d.init {
        Some(e) => format!("{} = {};", decl(&d.ty, &d.name), expr(e)),
        None => format!("{};", decl(&d.ty, &d.name)),
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn block(out: &mut String, b: &[Stmt], depth: usize) {
    for s in b {
        indent(out, depth);
        stmt(out, s, depth);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    match &s.kind {
        StmtKind::Decl(d) => {
            out.push_str(&var_decl(d));
            out.push('\n');
        }
        StmtKind::Assign { lhs, rhs } => {
            let _ = writeln!(out, "{lhs} = {};", expr(rhs));
        }
        StmtKind::Expr(e) => {
            let _ = writeln!(out, "{};", expr(e));
        }
        StmtKind::If { cond, then, els } => {
            let _ = writeln!(out, "if ({}) {{", expr(cond));
            block(out, then, depth + 1);
            indent(out, depth);
            match els {
                Some(b) => {
                    out.push_str("} else {\n");
                    block(out, b, depth + 1);
                    indent(out, depth);
                    out.push_str("}\n");
                }
                None => out.push_str("}\n"),
            }
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while ({}) {{", expr(cond));
            block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Return(Some(e)) => {
            let _ = writeln!(out, "return {};", expr(e));
        }
        StmtKind::Return(None) => out.push_str("return;\n"),
    }
}

pub fn expr(e: &Expr) -> String {
    expr_prec(e, 0)
}

fn expr_prec(e: &Expr, min: u8) -> String {
    match &e.kind {
        ExprKind::Path(p) => p.to_string(),
        ExprKind::Null => "NULL".into(),
        ExprKind::Std(s) => s.name().into(),
        ExprKind::Call { callee, deref, args } => {
            let args: Vec<_> = args.iter().map(expr).collect();
            if *deref {
                format!("(*{callee})({})", args.join(", "))
            } else {
                format!("{callee}({})", args.join(", "))
            }
        }
        ExprKind::Int(n) => n.to_string(),
        ExprKind::Char(c) => format!("'{}'", escape_bytes(&[*c], b'\'')),
        ExprKind::Str(s) => format!("\"{}\"", escape_bytes(s, b'"')),
        ExprKind::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let s = format!("{} {} {}", expr_prec(lhs, p), op.symbol(), expr_prec(rhs, p + 1));
            if p < min {
                format!("({s})")
            } else {
                s
            }
        }
        ExprKind::Unary { op, operand } => {
            let sym = match op {
                UnOp::Not => "!",
                UnOp::Neg => "-",
            };
            format!("{sym}{}", expr_prec(operand, 5))
        }
        ExprKind::Cast { ty, operand } => format!("({ty}){}", expr_prec(operand, 5)),
        ExprKind::New(r) => format!("new {r}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    /// Structural equality ignoring node ids and positions.
    fn shape(p: &Program) -> String {
        print_program(p)
    }

    #[test]
    fn round_trip_is_stable() {
        let src = r#"
struct S { FILE *f; int n; };
FILE *g = NULL;
int count(FILE *f, fn(FILE *) -> int cb) {
    int n = 0;
    while (fgetc(f) != EOF) { n = n + 1; }
    if (n > 2 * (3 - 1)) { fputs("big\n", stderr); } else if (!n) { return -1; } else { (*cb)(f); }
    return (int) n;
}
"#;
        let a = parse(src).unwrap();
        let printed = print_program(&a);
        let b = parse(&printed).unwrap();
        assert_eq!(shape(&a), shape(&b));
        assert_eq!(printed, print_program(&b));
    }

    #[test]
    fn parenthesizes_by_precedence() {
        let p = parse("void main() { int x; x = (1 + 2) * 3; x = 1 - (2 - 3); }").unwrap();
        let out = print_program(&p);
        assert!(out.contains("x = (1 + 2) * 3;"), "{out}");
        assert!(out.contains("x = 1 - (2 - 3);"), "{out}");
    }
}
