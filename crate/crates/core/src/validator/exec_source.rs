//! Reference interpreter for MiniC with libc stream semantics.

use super::machine::{arith, Machine, DEFAULT_FUEL};
use super::stdio::{trap, Place, Trap, Val, STDERR, STDIN, STDOUT};
use super::trace::Trace;
use super::vfs::VfsState;
use crate::api::{ArgKind, LibFn};
use crate::frontend::ast::*;
use crate::frontend::resolve::{CallKind, PathRes, SymbolTable, VarRef};
use std::collections::BTreeMap;

enum Flow {
    Next,
    Return(Val),
}

struct Interp<'a> {
    prog: &'a Program,
    st: &'a SymbolTable,
    m: Machine,
}

pub fn run(prog: &Program, st: &SymbolTable, vfs: &VfsState) -> Trace {
    run_with_fuel(prog, st, vfs, DEFAULT_FUEL)
}

pub fn run_with_fuel(prog: &Program, st: &SymbolTable, vfs: &VfsState, fuel: u64) -> Trace {
    let mut it = Interp { prog, st, m: Machine::new(vfs, fuel) };
    let r = it.main();
    Trace::finish(it.m, r)
}

pub fn std_handle(s: StdStream) -> Val {
    Val::Stream(match s {
        StdStream::Stdin => STDIN,
        StdStream::Stdout => STDOUT,
        StdStream::Stderr => STDERR,
    })
}

impl Interp<'_> {
    fn main(&mut self) -> Result<Val, Trap> {
        for g in &self.prog.globals {
            let v = match &g.init {
                Some(e) => self.literal(e)?,
                None => self.default(&g.ty),
            };
            self.m.globals.insert(g.name.clone(), v);
        }
        let Some(main) = self.st.func_id("main") else { return trap("no main function") };
        let args = self.prog.functions[main.0 as usize].params.iter().map(|p| p.ty.clone()).collect::<Vec<_>>();
        let args = args.iter().map(|t| self.default(t)).collect();
        self.call_user(main.0 as usize, args)
    }

    fn literal(&mut self, e: &Expr) -> Result<Val, Trap> {
        Ok(match &e.kind {
            ExprKind::Int(n) => Val::Int(*n),
            ExprKind::Char(c) => Val::Int(*c as i64),
            ExprKind::Str(s) => Val::Str(s.clone()),
            ExprKind::Null => Val::Null,
            ExprKind::Std(s) => std_handle(*s),
            _ => return trap("non-constant global initializer"),
        })
    }

    fn default(&mut self, ty: &Type) -> Val {
        match ty {
            Type::Int => Val::Int(0),
            Type::Str => Val::Str(Vec::new()),
            Type::Record(n) => self.new_record(n),
            _ => Val::Null,
        }
    }

    fn new_record(&mut self, name: &str) -> Val {
        let fields = self.st.record_id(name).map(|r| self.st.records[r.0 as usize].fields.clone()).unwrap_or_default();
        let mut map = BTreeMap::new();
        for (f, ty) in fields {
            let v = match ty {
                Type::Int => Val::Int(0),
                Type::Str => Val::Str(Vec::new()),
                Type::Record(ref n) if n != name => self.new_record(n),
                _ => Val::Null,
            };
            map.insert(f, v);
        }
        self.m.alloc(map)
    }

    fn call_user(&mut self, fi: usize, args: Vec<Val>) -> Result<Val, Trap> {
        self.m.tick()?;
        let f = &self.prog.functions[fi];
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

    fn block(&mut self, b: &[Stmt]) -> Result<Flow, Trap> {
        for s in b {
            if let Flow::Return(v) = self.stmt(s)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, s: &Stmt) -> Result<Flow, Trap> {
        self.m.tick()?;
        match &s.kind {
            StmtKind::Decl(d) => {
                let v = match &d.init {
                    Some(e) => self.expr(e)?,
                    None => self.default(&d.ty),
                };
                self.m.bind(&d.name, v);
            }
            StmtKind::Assign { lhs, rhs } => {
                let v = self.expr(rhs)?;
                let p = self.place(lhs)?;
                self.m.write(&p, v)?;
            }
            StmtKind::Expr(e) => {
                self.expr(e)?;
            }
            StmtKind::If { cond, then, els } => {
                if self.expr(cond)?.truthy() {
                    return self.block(then);
                } else if let Some(b) = els {
                    return self.block(b);
                }
            }
            StmtKind::While { cond, body } => {
                while self.expr(cond)?.truthy() {
                    self.m.tick()?;
                    if let Flow::Return(v) = self.block(body)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.expr(e)?,
                    None => Val::Unit,
                };
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn var_place(&self, v: VarRef) -> Place {
        match v {
            VarRef::Global(g) => Place::Global(self.st.globals[g as usize].name.clone()),
            VarRef::Local(f, i) => Place::Local(self.m.top(), self.st.func(f).locals[i as usize].name.clone()),
        }
    }

    fn place(&mut self, p: &Path) -> Result<Place, Trap> {
        let Some(PathRes::Var { var, .. }) = self.st.paths.get(&p.id) else {
            return trap(format!("`{p}` is not a variable"));
        };
        let mut place = self.var_place(*var);
        for f in &p.fields {
            let rec = self.m.read(&place)?;
            place = self.m.field_place(&rec, f)?;
        }
        Ok(place)
    }

    fn expr(&mut self, e: &Expr) -> Result<Val, Trap> {
        Ok(match &e.kind {
            ExprKind::Path(p) => match self.st.paths.get(&p.id) {
                Some(PathRes::Var { .. }) => {
                    let pl = self.place(p)?;
                    self.m.read(&pl)?
                }
                Some(PathRes::Func(_)) | Some(PathRes::Lib(_)) => Val::Func(p.root.clone()),
                None => return trap(format!("unresolved `{p}`")),
            },
            ExprKind::Null => Val::Null,
            ExprKind::Std(s) => std_handle(*s),
            ExprKind::Int(n) => Val::Int(*n),
            ExprKind::Char(c) => Val::Int(*c as i64),
            ExprKind::Str(s) => Val::Str(s.clone()),
            ExprKind::Binary { op, lhs, rhs } => {
                let l = self.expr(lhs)?;
                let r = self.expr(rhs)?;
                arith(op.symbol(), &l, &r)?
            }
            ExprKind::Unary { op, operand } => {
                let v = self.expr(operand)?;
                match op {
                    UnOp::Not => Val::Int(!v.truthy() as i64),
                    UnOp::Neg => Val::Int(v.int()?.wrapping_neg()),
                }
            }
            ExprKind::Cast { operand, .. } => self.expr(operand)?,
            ExprKind::New(r) => self.new_record(r),
            ExprKind::Call { args, .. } => self.call(e, args)?,
        })
    }

    fn call(&mut self, e: &Expr, args: &[Expr]) -> Result<Val, Trap> {
        match self.st.calls.get(&e.id) {
            Some(CallKind::User(f)) => {
                let vals = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
                self.call_user(f.0 as usize, vals)
            }
            Some(CallKind::Lib(lib)) => {
                let lib = lib.clone();
                self.call_lib(&lib, args)
            }
            Some(CallKind::Indirect(v)) => {
                let pl = self.var_place(*v);
                let target = self.m.read(&pl)?;
                let Val::Func(name) = target else { return trap(format!("call through {target:?}")) };
                if let Some(f) = self.st.func_id(&name) {
                    let vals = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
                    return self.call_user(f.0 as usize, vals);
                }
                match LibFn::lookup(&name, std::slice::from_ref(&name)) {
                    Some(lib) => self.call_lib(&lib, args),
                    None => trap(format!("unknown function {name}")),
                }
            }
            None => trap("unresolved call"),
        }
    }

    fn call_lib(&mut self, lib: &LibFn, args: &[Expr]) -> Result<Val, Trap> {
        self.m.tick()?;
        let params = lib.params();
        let scan = lib.name() == "fscanf";
        let mut vals = Vec::with_capacity(args.len());
        let mut places = Vec::with_capacity(args.len());
        for (i, a) in args.iter().enumerate() {
            let out = matches!(params.get(i), Some(ArgKind::OutStr)) || (scan && i >= params.len());
            let pl = match (out, a.as_path()) {
                (true, Some(p)) => Some(self.place(p)?),
                _ => None,
            };
            vals.push(match &pl {
                Some(p) => self.m.read(p)?,
                None => self.expr(a)?,
            });
            places.push(pl);
        }
        let r = self.m.rt.libc(lib, &vals)?;
        for (i, v) in r.outs {
            if let Some(Some(p)) = places.get(i) {
                self.m.write(p, v)?;
            }
        }
        Ok(r.ret)
    }
}
