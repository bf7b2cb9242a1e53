//! Renders a target program as Rust-style source text.

use super::target::*;
use super::types::bound_name;
use crate::frontend::lexer::escape_bytes;
use std::fmt::Write;

const PRELUDE: &str = "use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::process::{Child, Command, Stdio};
use streamlift_rt::*;
";

pub fn print_program(p: &TargetProgram) -> String {
    let mut out = String::from(PRELUDE);
    for t in &p.traits {
        let supers: Vec<_> = t.bound.names();
        let _ = writeln!(out, "\ntrait {}: {} {{}}", t.name, supers.join(" + "));
        let _ = writeln!(out, "impl<T: {} + ?Sized> {} for T {{}}", supers.join(" + "), t.name);
    }
    for r in &p.records {
        let _ = writeln!(out, "\nstruct {} {{", r.name);
        for (f, ty) in &r.fields {
            let _ = writeln!(out, "    {f}: {},", ty_str(ty));
        }
        out.push_str("}\n");
    }
    if !p.globals.is_empty() {
        out.push('\n');
    }
    for g in &p.globals {
        match &g.init {
            Some(e) => {
                let _ = writeln!(out, "static mut {}: {} = {};", g.name, ty_str(&g.ty), expr(e));
            }
            None => {
                let _ = writeln!(out, "static mut {}: {};", g.name, ty_str(&g.ty));
            }
        }
    }
    for f in &p.functions {
        out.push('\n');
        out.push_str(&print_function(f));
    }
    out
}

pub fn print_function(f: &TFunc) -> String {
    let mut out = String::new();
    let params: Vec<_> = f.params.iter().map(|p| format!("{}: {}", p.name, ty_str(&p.ty))).collect();
    let ret = match &f.ret {
        TType::Unit => String::new(),
        t => format!(" -> {}", ty_str(t)),
    };
    let _ = writeln!(out, "fn {}({}){} {{", f.name, params.join(", "), ret);
    block(&mut out, &f.body, 1);
    out.push_str("}\n");
    out
}

pub fn ty_str(t: &TType) -> String {
    match t {
        TType::Int => "i32".into(),
        TType::Str => "String".into(),
        TType::Unit => "()".into(),
        TType::VoidPtr => "*mut c_void".into(),
        TType::IntPtr => "*mut i32".into(),
        TType::Record(n) => n.clone(),
        TType::RecordPtr(n) => format!("*mut {n}"),
        TType::Func(ps, r) => {
            let ps: Vec<_> = ps.iter().map(ty_str).collect();
            match &**r {
                TType::Unit => format!("fn({})", ps.join(", ")),
                r => format!("fn({}) -> {}", ps.join(", "), ty_str(r)),
            }
        }
        TType::LibcFile => "*mut FILE".into(),
        TType::Stream(t) => t.to_string(),
        TType::Tuple(ts) => format!("({})", ts.iter().map(ty_str).collect::<Vec<_>>().join(", ")),
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn block(out: &mut String, b: &[TStmt], depth: usize) {
    for s in b {
        indent(out, depth);
        stmt(out, s, depth);
    }
}

pub fn stmt_str(s: &TStmt) -> String {
    let mut out = String::new();
    stmt(&mut out, s, 0);
    out
}

fn stmt(out: &mut String, s: &TStmt, depth: usize) {
    match s {
        TStmt::Let { name, ty, init } => {
            let ty = ty.as_ref().map(|t| format!(": {}", ty_str(t))).unwrap_or_default();
            match init {
                Some(e) => {
                    let _ = writeln!(out, "let {name}{ty} = {};", expr(e));
                }
                None => {
                    let _ = writeln!(out, "let {name}{ty};");
                }
            }
        }
        TStmt::LetTuple { names, init } => {
            let names: Vec<_> = names.iter().map(|n| n.as_deref().unwrap_or("_")).collect();
            let _ = writeln!(out, "let ({}) = {};", names.join(", "), expr(init));
        }
        TStmt::Assign { lhs, rhs } => {
            let _ = writeln!(out, "{} = {};", expr(lhs), expr(rhs));
        }
        TStmt::Compound { op, lhs, rhs } => {
            let _ = match op {
                CompoundOp::Or => writeln!(out, "{} |= {};", expr(lhs), expr(rhs)),
                CompoundOp::AndNot => writeln!(out, "{} &= !{};", expr(lhs), expr_prec(rhs, 9)),
            };
        }
        TStmt::Expr(e) => {
            let _ = writeln!(out, "{}", expr_stmt(e));
        }
        TStmt::If { cond, then, els } => {
            let _ = writeln!(out, "if {} {{", expr(cond));
            block(out, then, depth + 1);
            let mut els = els.as_deref();
            loop {
                indent(out, depth);
                match els {
                    Some([TStmt::If { cond, then, els: next }]) => {
                        let _ = writeln!(out, "}} else if {} {{", expr(cond));
                        block(out, then, depth + 1);
                        els = next.as_deref();
                    }
                    Some(b) => {
                        out.push_str("} else {\n");
                        block(out, b, depth + 1);
                        indent(out, depth);
                        out.push_str("}\n");
                        break;
                    }
                    None => {
                        out.push_str("}\n");
                        break;
                    }
                }
            }
        }
        TStmt::While { cond, body } => {
            let _ = writeln!(out, "while {} {{", expr(cond));
            block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        TStmt::Return(Some(e)) => {
            let _ = writeln!(out, "return {};", expr(e));
        }
        TStmt::Return(None) => out.push_str("return;\n"),
    }
}

/// An expression in statement position: results of stream operations are discarded.
fn expr_stmt(e: &TExpr) -> String {
    match e {
        TExpr::Io { recv, op, args, guard } => match guard.as_deref() {
            Some(Guard { var, record: true, clear: 0 }) if op.is_write() => {
                format!("if {}.is_err() {{ {} |= 2; }}", io_call(recv, op, args), expr(var))
            }
            Some(g) => format!("{}{};", io_call(recv, op, args), guard_suffix(g)),
            None => format!("{};", io_call(recv, op, args)),
        },
        _ => format!("{};", expr(e)),
    }
}

pub fn expr(e: &TExpr) -> String {
    expr_prec(e, 0)
}

fn guard_suffix(g: &Guard) -> String {
    let var = expr_prec(&TExpr::AddrOf { raw: false, expr: Box::new(g.var.clone()) }, 0);
    match (g.record, g.clear) {
        (true, 0) => format!(".flag({var})"),
        (true, m) => format!(".flag_clear({var}, {m})"),
        (false, m) => format!(".clear_on_ok({var}, {m})"),
    }
}

/// Postfix-safe rendering of a receiver.
fn recv_str(e: &TExpr) -> String {
    match e {
        TExpr::Deref(_) | TExpr::AddrOf { .. } | TExpr::Binary { .. } | TExpr::Not(_) | TExpr::Neg(_) | TExpr::Cast { .. } => {
            format!("({})", expr(e))
        }
        _ => expr(e),
    }
}

fn rust_format(fmt: &[u8]) -> String {
    let mut s = String::new();
    let mut i = 0;
    while i < fmt.len() {
        match fmt[i] {
            b'%' if i + 1 < fmt.len() => {
                match fmt[i + 1] {
                    b'%' => s.push('%'),
                    _ => s.push_str("{}"),
                }
                i += 2;
                continue;
            }
            b'{' => s.push_str("{{"),
            b'}' => s.push_str("}}"),
            _ => s.push_str(&escape_bytes(&fmt[i..=i], b'"')),
        }
        i += 1;
    }
    s
}

fn directives(fmt: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < fmt.len() {
        if fmt[i] == b'%' {
            if fmt[i + 1] != b'%' {
                out.push(fmt[i + 1]);
            }
            i += 2;
        } else {
            i += 1;
        }
    }
    out
}

fn byte_arg(e: &TExpr) -> String {
    match e {
        TExpr::Char(c) => format!("b'{}'", escape_bytes(&[*c], b'\'')),
        _ => format!("{} as u8", expr_prec(e, 6)),
    }
}

fn io_call(recv: &TExpr, op: &IoOp, args: &[TExpr]) -> String {
    let r = recv_str(recv);
    let a: Vec<String> = args.iter().map(expr).collect();
    match op {
        IoOp::ReadByte => format!("{r}.read_byte()"),
        IoOp::ReadItems => format!("{r}.read_items({})", a.join(", ")),
        IoOp::ReadLineInto => format!("{r}.read_line_into({})", a.join(", ")),
        IoOp::ReadLine => format!("{r}.read_line({})", a.join(", ")),
        IoOp::Scan(fmt) => {
            let mut parts = vec![r, format!("\"{}\"", escape_bytes(fmt, b'"'))];
            parts.extend(a);
            format!("scan!({})", parts.join(", "))
        }
        IoOp::WriteItems => format!("{r}.write_items({})", a.join(", ")),
        IoOp::WriteByte => format!("{r}.write_all(&[{}])", byte_arg(&args[0])),
        IoOp::WriteStr => match &args[0] {
            TExpr::Str(s) => format!("{r}.write_all(b\"{}\")", escape_bytes(s, b'"')),
            s => format!("{r}.write_all({}.as_bytes())", expr_prec(s, 6)),
        },
        IoOp::Print(fmt) => {
            let mut parts = vec![r, format!("\"{}\"", rust_format(fmt))];
            let dirs = directives(fmt);
            for (i, x) in args.iter().enumerate() {
                parts.push(match dirs.get(i) {
                    Some(b'c') => format!("{} as u8 as char", expr_prec(x, 6)),
                    _ => expr(x),
                });
            }
            format!("write!({})", parts.join(", "))
        }
        IoOp::Flush => format!("{r}.flush()"),
        IoOp::Seek => {
            let off = &a[0];
            match &args[1] {
                TExpr::Int(0) => format!("{r}.seek(SeekFrom::Start({off} as u64))"),
                TExpr::Int(1) => format!("{r}.seek(SeekFrom::Current({off} as i64))"),
                TExpr::Int(2) => format!("{r}.seek(SeekFrom::End({off} as i64))"),
                w => format!("{r}.seek(seek_from({off}, {}))", expr(w)),
            }
        }
        IoOp::Tell => format!("{r}.stream_position()"),
        IoOp::Rewind => format!("{r}.rewind()"),
    }
}

fn open_str(m: OpenMode, path: &str) -> String {
    match m {
        OpenMode::Read => format!("File::open({path})"),
        OpenMode::Write => format!("File::create({path})"),
        OpenMode::Append => format!("OpenOptions::new().append(true).create(true).open({path})"),
        OpenMode::ReadUpdate => format!("OpenOptions::new().read(true).write(true).open({path})"),
        OpenMode::WriteUpdate => {
            format!("OpenOptions::new().read(true).write(true).create(true).truncate(true).open({path})")
        }
        OpenMode::AppendUpdate => format!("OpenOptions::new().read(true).append(true).create(true).open({path})"),
    }
}

fn args_str(args: &[TExpr]) -> String {
    args.iter().map(expr).collect::<Vec<_>>().join(", ")
}

fn expr_prec(e: &TExpr, min: u8) -> String {
    match e {
        TExpr::Int(n) if *n < 0 && min > 5 => format!("({n})"),
        TExpr::Int(n) => n.to_string(),
        TExpr::Char(c) => {
            let s = format!("b'{}' as i32", escape_bytes(&[*c], b'\''));
            if min > 5 {
                format!("({s})")
            } else {
                s
            }
        }
        TExpr::Str(s) => format!("\"{}\"", escape_bytes(s, b'"')),
        TExpr::Unit => "()".into(),
        TExpr::NoneLit => "None".into(),
        TExpr::NullPtr => "ptr::null_mut()".into(),
        TExpr::Var(n) => n.clone(),
        TExpr::Field(base, f) => format!("(*{}).{f}", expr_prec(base, 9)),
        TExpr::Deref(x) => {
            let s = format!("*{}", expr_prec(x, 9));
            if min > 7 {
                format!("({s})")
            } else {
                s
            }
        }
        TExpr::AddrOf { raw, expr: x } => {
            let s = format!("{}{}", if *raw { "&raw mut " } else { "&mut " }, expr_prec(x, 8));
            if min > 7 {
                format!("({s})")
            } else {
                s
            }
        }
        TExpr::Builtin { f, args } => {
            let a = args_str(args);
            match f {
                Builtin::Drop => format!("drop({a})"),
                Builtin::Some => format!("Some({a})"),
                Builtin::BoxNew => format!("Box::new({a})"),
                Builtin::BoxIntoRaw => format!("Box::into_raw({a})"),
                Builtin::BufReaderNew => format!("BufReader::new({a})"),
                Builtin::BufWriterNew => format!("BufWriter::new({a})"),
                Builtin::Std(s) => format!("{}()", s.name()),
                Builtin::Open(m) => open_str(*m, &a),
                Builtin::Spawn(PipeMode::Read) => {
                    format!("Command::new(\"sh\").arg(\"-c\").arg({a}).stdout(Stdio::piped()).spawn()")
                }
                Builtin::Spawn(PipeMode::Write) => {
                    format!("Command::new(\"sh\").arg(\"-c\").arg({a}).stdin(Stdio::piped()).spawn()")
                }
                Builtin::NewRecord(r) => format!("Box::into_raw(Box::new({r}::default()))"),
            }
        }
        TExpr::Method { recv, m } => format!("{}.{}()", recv_str(recv), m.name()),
        TExpr::MapSome { expr: x, binder, body } => format!("{}.map(|{binder}| {})", recv_str(x), expr(body)),
        TExpr::ChildPipe { child, write } => {
            let pipe = if *write { "stdin" } else { "stdout" };
            format!("{}.{pipe}.as_mut().unwrap()", recv_str(child))
        }
        TExpr::Io { recv, op, args, guard } => {
            let call = io_call(recv, op, args);
            match guard.as_deref() {
                Some(g) => format!("{call}{}", guard_suffix(g)),
                None => format!("{call}.value()"),
            }
        }
        TExpr::Libc { name, args } => format!("{name}({})", args_str(args)),
        TExpr::LibcStd(s) => s.name().to_string(),
        TExpr::Call { func, args } => format!("{func}({})", args_str(args)),
        TExpr::CallIndirect { var, args } => format!("({})({})", expr(var), args_str(args)),
        TExpr::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let s = format!("{} {} {}", expr_prec(lhs, p), op.symbol(), expr_prec(rhs, p + 1));
            if p < min {
                format!("({s})")
            } else {
                s
            }
        }
        TExpr::Not(x) => format!("!{}", expr_prec(x, 7)),
        TExpr::Neg(x) => format!("-{}", expr_prec(x, 7)),
        TExpr::Cast { expr: x, ty } => {
            let s = format!("{} as {}", expr_prec(x, 6), ty_str(ty));
            if min > 5 {
                format!("({s})")
            } else {
                s
            }
        }
        TExpr::Tuple(xs) => format!("({})", args_str(xs)),
        TExpr::Block { stmts, tail } => {
            let mut s = String::from("{ ");
            for st in stmts {
                s.push_str(stmt_str(st).trim_end());
                s.push(' ');
            }
            s.push_str(&expr(tail));
            s.push_str(" }");
            s
        }
    }
}

/// Combined-bound trait names a type mentions.
pub fn combined_name(b: super::types::Bound) -> Option<String> {
    (b.len() > 1).then(|| bound_name(b))
}
