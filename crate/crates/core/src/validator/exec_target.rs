//! Interpreter for transformed programs. Typed streams run on the same runtime
//! as libc streams, with `Option`, boxes and buffers treated as transparent.

use super::exec_source::std_handle;
use super::machine::{arith, Machine, DEFAULT_FUEL};
use super::stdio::{trap, Place, Status, Trap, Val};
use super::trace::Trace;
use super::vfs::VfsState;
use crate::api::{self, ApiFn, LibFn};
use crate::transform::target::*;
use std::collections::BTreeMap;

enum Flow {
    Next,
    Return(Val),
}

struct Interp<'a> {
    prog: &'a TargetProgram,
    m: Machine,
}

pub fn run(prog: &TargetProgram, vfs: &VfsState) -> Trace {
    run_with_fuel(prog, vfs, DEFAULT_FUEL)
}

pub fn run_with_fuel(prog: &TargetProgram, vfs: &VfsState, fuel: u64) -> Trace {
    let mut it = Interp { prog, m: Machine::new(vfs, fuel) };
    let r = it.main();
    Trace::finish(it.m, r)
}

fn io_api(op: &IoOp) -> ApiFn {
    match op {
        IoOp::ReadByte => ApiFn::Fgetc,
        IoOp::ReadItems => ApiFn::Fread,
        IoOp::ReadLineInto => ApiFn::Fgets,
        IoOp::ReadLine => ApiFn::Getline,
        IoOp::Scan(_) => ApiFn::Fscanf,
        IoOp::WriteItems => ApiFn::Fwrite,
        IoOp::WriteByte => ApiFn::Fputc,
        IoOp::WriteStr => ApiFn::Fputs,
        IoOp::Print(_) => ApiFn::Fprintf,
        IoOp::Flush => ApiFn::Fflush,
        IoOp::Seek => ApiFn::Fseek,
        IoOp::Tell => ApiFn::Ftell,
        IoOp::Rewind => ApiFn::Rewind,
    }
}

impl Interp<'_> {
    fn main(&mut self) -> Result<Val, Trap> {
        for g in &self.prog.globals {
            self.m.push_frame()?;
            let v = match &g.init {
                Some(e) => self.expr(e)?,
                None => self.default(&g.ty),
            };
            self.m.pop_frame();
            self.m.globals.insert(g.name.clone(), v);
        }
        let Some(main) = self.prog.func("main") else { return trap("no main function") };
        let tys = main.params.iter().map(|p| p.ty.clone()).collect::<Vec<_>>();
        let args = tys.iter().map(|t| self.default(t)).collect();
        self.call_user("main", args)
    }

    fn default(&mut self, ty: &TType) -> Val {
        match ty {
            TType::Int => Val::Int(0),
            TType::Str => Val::Str(Vec::new()),
            TType::Unit => Val::Unit,
            TType::Record(n) => self.new_record(n),
            _ => Val::Null,
        }
    }

    fn new_record(&mut self, name: &str) -> Val {
        let fields = self.prog.record(name).map(|r| r.fields.clone()).unwrap_or_default();
        let mut map = BTreeMap::new();
        for (f, ty) in fields {
            let v = match ty {
                TType::Record(ref n) if n == name => Val::Null,
                ref t => self.default(t),
            };
            map.insert(f, v);
        }
        self.m.alloc(map)
    }

    fn call_user(&mut self, name: &str, args: Vec<Val>) -> Result<Val, Trap> {
        self.m.tick()?;
        let Some(f) = self.prog.func(name) else { return trap(format!("no function {name}")) };
        self.m.push_frame()?;
        for (p, v) in f.params.iter().zip(args) {
            self.m.bind(&p.name, v);
        }
        let r = self.block(&f.body);
        self.m.pop_frame();
        match r? {
            Flow::Return(v) => Ok(v),
            Flow::Next => Ok(Val::Unit),
        }
    }

    fn block(&mut self, b: &[TStmt]) -> Result<Flow, Trap> {
        for s in b {
            if let Flow::Return(v) = self.stmt(s)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, s: &TStmt) -> Result<Flow, Trap> {
        self.m.tick()?;
        match s {
            TStmt::Let { name, ty, init } => {
                let v = match (init, ty) {
                    (Some(e), _) => self.expr(e)?,
                    (None, Some(t)) => self.default(t),
                    (None, None) => Val::Unit,
                };
                self.m.bind(name, v);
            }
            TStmt::LetTuple { names, init } => {
                let v = self.expr(init)?;
                let Val::Tuple(items) = v else { return trap(format!("destructuring {v:?}")) };
                if items.len() != names.len() {
                    return trap("tuple arity mismatch");
                }
                for (n, v) in names.iter().zip(items) {
                    if let Some(n) = n {
                        self.m.bind(n, v);
                    }
                }
            }
            TStmt::Assign { lhs, rhs } => {
                let v = self.expr(rhs)?;
                let p = self.place(lhs)?;
                self.m.write(&p, v)?;
            }
            TStmt::Compound { op, lhs, rhs } => {
                let r = self.expr(rhs)?.int()?;
                let p = self.place(lhs)?;
                let l = self.m.read(&p)?.int()?;
                let v = match op {
                    CompoundOp::Or => l | r,
                    CompoundOp::AndNot => l & !r,
                };
                self.m.write(&p, Val::Int(v))?;
            }
            TStmt::Expr(e) => {
                self.expr(e)?;
            }
            TStmt::If { cond, then, els } => {
                if self.expr(cond)?.truthy() {
                    return self.block(then);
                } else if let Some(b) = els {
                    return self.block(b);
                }
            }
            TStmt::While { cond, body } => {
                while self.expr(cond)?.truthy() {
                    self.m.tick()?;
                    if let Flow::Return(v) = self.block(body)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            TStmt::Return(e) => {
                let v = match e {
                    Some(e) => self.expr(e)?,
                    None => Val::Unit,
                };
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn place(&mut self, e: &TExpr) -> Result<Place, Trap> {
        match e {
            TExpr::Var(n) => Ok(self.m.var_place(n)),
            TExpr::Field(r, f) => {
                let rec = self.expr(r)?;
                self.m.field_place(&rec, f)
            }
            TExpr::Deref(inner) => match self.expr(inner)? {
                Val::Ref(p) => Ok(p),
                v => trap(format!("dereference of {v:?}")),
            },
            _ => trap("not a place"),
        }
    }

    fn stream(&mut self, e: &TExpr) -> Result<usize, Trap> {
        match self.expr(e)? {
            Val::Stream(h) => Ok(h),
            Val::Null => trap("operation on a null stream"),
            v => trap(format!("expected a stream, found {v:?}")),
        }
    }

    fn expr(&mut self, e: &TExpr) -> Result<Val, Trap> {
        Ok(match e {
            TExpr::Int(n) => Val::Int(*n),
            TExpr::Char(c) => Val::Int(*c as i64),
            TExpr::Str(s) => Val::Str(s.clone()),
            TExpr::Unit => Val::Unit,
            TExpr::NoneLit | TExpr::NullPtr => Val::Null,
            TExpr::Var(_) | TExpr::Field(..) => {
                let p = self.place(e)?;
                self.m.read(&p)?
            }
            TExpr::Deref(inner) => match self.expr(inner)? {
                Val::Ref(p) => self.m.read(&p)?,
                v => v,
            },
            TExpr::AddrOf { expr, .. } => {
                if !matches!(**expr, TExpr::Var(_) | TExpr::Field(..) | TExpr::Deref(_)) {
                    // borrowing a temporary, e.g. `&mut stdout()`
                    return self.expr(expr);
                }
                let p = self.place(expr)?;
                match self.m.read(&p)? {
                    Val::Int(_) | Val::Str(_) => Val::Ref(p),
                    v => v,
                }
            }
            TExpr::Builtin { f, args } => self.builtin(f, args)?,
            TExpr::Method { recv, m } => {
                let v = self.expr(recv)?;
                match m {
                    Method::AsMut | Method::Ok | Method::AsMutPtr => v,
                    Method::Unwrap if v == Val::Null => return trap("unwrap of None"),
                    Method::Unwrap => v,
                    Method::IsNone => Val::Int((v == Val::Null) as i64),
                    Method::IsSome => Val::Int((v != Val::Null) as i64),
                    Method::Wait => match v {
                        Val::Stream(h) => Val::Int(self.m.rt.wait(h)?),
                        v => return trap(format!("wait on {v:?}")),
                    },
                }
            }
            TExpr::MapSome { expr, binder, body } => {
                let v = self.expr(expr)?;
                if v == Val::Null {
                    Val::Null
                } else {
                    let saved = self.m.frames.last().and_then(|f| f.get(binder).cloned());
                    self.m.bind(binder, v);
                    let r = self.expr(body);
                    match saved {
                        Some(s) => self.m.bind(binder, s),
                        None => {
                            self.m.frames.last_mut().expect("inside a frame").remove(binder);
                        }
                    }
                    r?
                }
            }
            TExpr::ChildPipe { child, .. } => self.expr(child)?,
            TExpr::Io { recv, op, args, guard } => self.io(recv, op, args, guard.as_deref())?,
            TExpr::Libc { name, args } => {
                let Some(lib) = LibFn::lookup(name, std::slice::from_ref(name)) else {
                    return trap(format!("unknown library function {name}"));
                };
                let vals = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
                self.libc(&lib, vals)?
            }
            TExpr::LibcStd(s) => std_handle(*s),
            TExpr::Call { func, args } => {
                let vals = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
                self.call_user(func, vals)?
            }
            TExpr::CallIndirect { var, args } => {
                let target = self.expr(var)?;
                let Val::Func(name) = target else { return trap(format!("call through {target:?}")) };
                let vals = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
                if self.prog.func(&name).is_some() {
                    self.call_user(&name, vals)?
                } else {
                    match LibFn::lookup(&name, std::slice::from_ref(&name)) {
                        Some(lib) => self.libc(&lib, vals)?,
                        None => return trap(format!("unknown function {name}")),
                    }
                }
            }
            TExpr::Binary { op, lhs, rhs } => {
                let l = self.expr(lhs)?;
                let r = self.expr(rhs)?;
                arith(op.symbol(), &l, &r)?
            }
            TExpr::Not(x) => Val::Int(!self.expr(x)?.truthy() as i64),
            TExpr::Neg(x) => Val::Int(self.expr(x)?.int()?.wrapping_neg()),
            TExpr::Cast { expr, .. } => self.expr(expr)?,
            TExpr::Tuple(items) => Val::Tuple(items.iter().map(|i| self.expr(i)).collect::<Result<_, _>>()?),
            TExpr::Block { stmts, tail } => {
                for s in stmts {
                    if let Flow::Return(_) = self.stmt(s)? {
                        return trap("return inside an expression block");
                    }
                }
                self.expr(tail)?
            }
        })
    }

    fn builtin(&mut self, f: &Builtin, args: &[TExpr]) -> Result<Val, Trap> {
        let mut vals = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
        let first = if vals.is_empty() { Val::Unit } else { vals.swap_remove(0) };
        Ok(match f {
            Builtin::Drop => {
                if let Val::Stream(h) = first {
                    self.m.rt.close(h, true)?;
                }
                Val::Unit
            }
            Builtin::Some | Builtin::BoxNew | Builtin::BoxIntoRaw | Builtin::BufReaderNew | Builtin::BufWriterNew => first,
            Builtin::Std(s) => std_handle(*s),
            Builtin::Open(mode) => self.m.rt.open(first.bytes()?, mode.libc().as_bytes()),
            Builtin::Spawn(mode) => {
                let m: &[u8] = match mode {
                    PipeMode::Read => b"r",
                    PipeMode::Write => b"w",
                };
                self.m.rt.spawn(first.bytes()?, m)
            }
            Builtin::NewRecord(n) => self.new_record(n),
        })
    }

    /// Calls a library function, reading through references and writing outputs back.
    fn libc(&mut self, lib: &LibFn, vals: Vec<Val>) -> Result<Val, Trap> {
        self.m.tick()?;
        let mut refs = Vec::with_capacity(vals.len());
        let mut plain = Vec::with_capacity(vals.len());
        for v in vals {
            match v {
                Val::Ref(p) => {
                    plain.push(self.m.read(&p)?);
                    refs.push(Some(p));
                }
                v => {
                    plain.push(v);
                    refs.push(None);
                }
            }
        }
        let r = self.m.rt.libc(lib, &plain)?;
        for (i, v) in r.outs {
            if let Some(Some(p)) = refs.get(i) {
                self.m.write(p, v)?;
            }
        }
        Ok(r.ret)
    }

    fn io(&mut self, recv: &TExpr, op: &IoOp, args: &[TExpr], guard: Option<&Guard>) -> Result<Val, Trap> {
        self.m.tick()?;
        let f = io_api(op);
        let h = self.stream(recv)?;
        let mut targs = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
        // Rebuild the libc argument list around the stream and format.
        let mut lib: Vec<Option<usize>> = (0..targs.len()).map(Some).collect();
        let sa = api::spec(f).stream_arg.expect("operations take a stream");
        lib.insert(sa.min(lib.len()), None);
        let fmt = match op {
            IoOp::Scan(s) | IoOp::Print(s) => {
                lib.insert(1, None);
                Some(s.clone())
            }
            _ => None,
        };
        let mut refs = vec![None; targs.len()];
        for (i, v) in targs.iter_mut().enumerate() {
            if let Val::Ref(p) = v {
                refs[i] = Some(p.clone());
                *v = self.m.read(p)?;
            }
        }
        let plain: Vec<Val> = lib
            .iter()
            .enumerate()
            .map(|(i, slot)| match slot {
                Some(t) => targs[*t].clone(),
                None if i == sa => Val::Stream(h),
                None => Val::Str(fmt.clone().unwrap_or_default()),
            })
            .collect();
        let r = self.m.rt.api(f, h, &plain)?;
        for (i, v) in r.outs {
            if let Some(Some(t)) = lib.get(i) {
                if let Some(p) = &refs[*t] {
                    self.m.write(p, v)?;
                }
            }
        }
        if let Some(g) = guard {
            let p = self.place(&g.var)?;
            let mut e = self.m.read(&p)?.int()?;
            if r.status == Status::Ok {
                e &= !g.clear;
            }
            if g.record {
                match r.status {
                    Status::Eof => e |= 1,
                    Status::Err => e |= 2,
                    Status::Ok => {}
                }
            }
            self.m.write(&p, Val::Int(e))?;
        }
        Ok(r.ret)
    }
}
