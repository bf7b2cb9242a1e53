use super::ast::*;
use super::ResolveError;
use crate::api::{ArgKind, LibFn, RetKind};
use crate::loc::{FuncId, Location, RecordId};
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone)]
pub struct VarInfo {
    pub name: String,
    pub ty: Type,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct RecordInfo {
    pub name: String,
    pub fields: Vec<(String, Type)>,
}

#[derive(Debug, Clone)]
pub struct FuncInfo {
    pub name: String,
    pub nparams: usize,
    pub ret: Type,
    pub locals: Vec<VarInfo>,
    pub address_taken: bool,
    pub pos: Pos,
}

impl FuncInfo {
    pub fn param_types(&self) -> impl Iterator<Item = &Type> {
        self.locals[..self.nparams].iter().map(|v| &v.ty)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarRef {
    Global(u32),
    Local(FuncId, u32),
}

impl VarRef {
    pub fn location(self) -> Location {
        match self {
            VarRef::Global(g) => Location::Global(g),
            VarRef::Local(f, i) => Location::Local(f, i),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathRes {
    Var {
        var: VarRef,
        /// Record and field index of each projection.
        fields: Vec<(RecordId, u32)>,
        ty: Type,
    },
    Func(FuncId),
    Lib(LibFn),
}

impl PathRes {
    /// `loc(x) = x`, `loc(e.f) = record(e).f`.
    pub fn location(&self) -> Option<Location> {
        match self {
            PathRes::Var { var, fields, .. } => Some(match fields.last() {
                Some(&(r, f)) => Location::Field(r, f),
                None => var.location(),
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CallKind {
    Lib(LibFn),
    User(FuncId),
    /// Call through a function-valued variable.
    Indirect(VarRef),
}

#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    pub records: Vec<RecordInfo>,
    pub globals: Vec<VarInfo>,
    pub functions: Vec<FuncInfo>,
    pub paths: HashMap<NodeId, PathRes>,
    pub calls: HashMap<NodeId, CallKind>,
    pub expr_types: HashMap<NodeId, Type>,
    /// Local slot of each declaration statement.
    pub decls: HashMap<NodeId, u32>,
    /// Library functions whose name is used as a value.
    pub lib_as_value: BTreeSet<String>,
    pub nonposix: Vec<String>,
}

impl SymbolTable {
    pub fn func_id(&self, name: &str) -> Option<FuncId> {
        self.functions.iter().position(|f| f.name == name).map(|i| FuncId(i as u32))
    }

    pub fn func(&self, f: FuncId) -> &FuncInfo {
        &self.functions[f.0 as usize]
    }

    pub fn record_id(&self, name: &str) -> Option<RecordId> {
        self.records.iter().position(|r| r.name == name).map(|i| RecordId(i as u32))
    }

    pub fn path(&self, p: &Path) -> &PathRes {
        &self.paths[&p.id]
    }

    pub fn path_location(&self, p: &Path) -> Option<Location> {
        self.paths.get(&p.id).and_then(PathRes::location)
    }

    pub fn expr_type(&self, e: &Expr) -> &Type {
        &self.expr_types[&e.id]
    }

    /// Stream-valued expressions, including NULL used where a stream is expected.
    pub fn is_stream_expr(&self, e: &Expr) -> bool {
        self.expr_types.get(&e.id).is_some_and(Type::is_stream)
    }

    pub fn var_type(&self, v: VarRef) -> &Type {
        match v {
            VarRef::Global(g) => &self.globals[g as usize].ty,
            VarRef::Local(f, i) => &self.func(f).locals[i as usize].ty,
        }
    }

    pub fn location_type(&self, l: Location) -> Type {
        match l {
            Location::Global(g) => self.globals[g as usize].ty.clone(),
            Location::Local(f, i) => self.func(f).locals[i as usize].ty.clone(),
            Location::Ret(f) => self.func(f).ret.clone(),
            Location::Anon(..) => Type::File,
            Location::Field(r, i) => self.records[r.0 as usize].fields[i as usize].1.clone(),
        }
    }

    /// Stable human-readable name: `x`, `main::x`, `S.f`, `foo::<ret>`, `main::<tmp@3:5>`.
    pub fn location_name(&self, l: Location) -> String {
        match l {
            Location::Global(g) => self.globals[g as usize].name.clone(),
            Location::Local(f, i) => format!("{}::{}", self.func(f).name, self.func(f).locals[i as usize].name),
            Location::Ret(f) => format!("{}::<ret>", self.func(f).name),
            Location::Anon(f, n) => format!("{}::<tmp{}>", self.func(f).name, n.0),
            Location::Field(r, i) => {
                let rec = &self.records[r.0 as usize];
                format!("{}.{}", rec.name, rec.fields[i as usize].0)
            }
        }
    }

    /// Every named slot of type `FILE *`, in a fixed order.
    pub fn stream_locations(&self) -> Vec<Location> {
        let mut out = Vec::new();
        for (i, g) in self.globals.iter().enumerate() {
            if g.ty.is_stream() {
                out.push(Location::Global(i as u32));
            }
        }
        for (fi, f) in self.functions.iter().enumerate() {
            let fid = FuncId(fi as u32);
            for (i, v) in f.locals.iter().enumerate() {
                if v.ty.is_stream() {
                    out.push(Location::Local(fid, i as u32));
                }
            }
            if f.ret.is_stream() {
                out.push(Location::Ret(fid));
            }
        }
        for (ri, r) in self.records.iter().enumerate() {
            for (i, (_, ty)) in r.fields.iter().enumerate() {
                if ty.is_stream() {
                    out.push(Location::Field(RecordId(ri as u32), i as u32));
                }
            }
        }
        out
    }
}

/// Binds names, classifies calls, types expressions and sets `address_taken`.
pub fn resolve(prog: &mut Program, nonposix: &[String]) -> Result<SymbolTable, Vec<ResolveError>> {
    let mut r = Resolver { st: SymbolTable { nonposix: nonposix.to_vec(), ..Default::default() }, errors: vec![], cur: None };
    r.declare_items(prog);
    for g in &prog.globals {
        if let Some(init) = &g.init {
            let constant = matches!(
                init.kind,
                ExprKind::Int(_) | ExprKind::Char(_) | ExprKind::Str(_) | ExprKind::Null | ExprKind::Std(_)
            );
            if !constant {
                r.err(ResolveError::Invalid {
                    message: "global initializer must be a literal, NULL or a standard stream".into(),
                    pos: init.pos,
                });
                continue;
            }
            r.expr(init);
            r.check_assign(&g.ty, init);
        }
    }
    for (fi, f) in prog.functions.iter().enumerate() {
        r.function(FuncId(fi as u32), f);
    }
    if !r.errors.is_empty() {
        return Err(r.errors);
    }
    for (fi, f) in prog.functions.iter_mut().enumerate() {
        f.address_taken = r.st.functions[fi].address_taken;
    }
    Ok(r.st)
}

struct Resolver {
    st: SymbolTable,
    errors: Vec<ResolveError>,
    cur: Option<FuncId>,
}

impl Resolver {
    fn err(&mut self, e: ResolveError) {
        self.errors.push(e);
    }

    fn check_reserved(&mut self, name: &str, pos: Pos) -> bool {
        if LibFn::lookup(name, &self.st.nonposix).is_some() {
            self.err(ResolveError::Reserved { name: name.to_string(), pos });
            true
        } else {
            false
        }
    }

    fn check_type(&mut self, ty: &Type, pos: Pos) {
        match ty {
            Type::Record(n) | Type::RecordPtr(n) => {
                if self.st.record_id(n).is_none() {
                    self.err(ResolveError::Undeclared { name: format!("struct {n}"), pos });
                }
            }
            Type::Func(ps, r) => {
                for p in ps {
                    self.check_type(p, pos);
                }
                self.check_type(r, pos);
            }
            _ => {}
        }
    }

    fn declare_items(&mut self, prog: &Program) {
        for rec in &prog.records {
            if self.st.record_id(&rec.name).is_some() {
                self.err(ResolveError::Duplicate { name: format!("struct {}", rec.name), pos: rec.pos });
                continue;
            }
            self.st.records.push(RecordInfo { name: rec.name.clone(), fields: rec.fields.clone() });
        }
        for rec in &prog.records {
            let mut seen = BTreeSet::new();
            for (f, ty) in &rec.fields {
                if !seen.insert(f.as_str()) {
                    self.err(ResolveError::Duplicate { name: format!("{}.{}", rec.name, f), pos: rec.pos });
                }
                self.check_type(ty, rec.pos);
                if matches!(ty, Type::Void) {
                    self.err(ResolveError::Invalid { message: format!("field `{f}` has type void"), pos: rec.pos });
                }
            }
        }
        for f in &prog.functions {
            if self.check_reserved(&f.name, f.pos) {
                continue;
            }
            if self.st.func_id(&f.name).is_some() {
                self.err(ResolveError::Duplicate { name: f.name.clone(), pos: f.pos });
                continue;
            }
            let mut locals = Vec::new();
            for p in &f.params {
                self.check_type(&p.ty, f.pos);
                if locals.iter().any(|v: &VarInfo| v.name == p.name) {
                    self.err(ResolveError::Duplicate { name: p.name.clone(), pos: f.pos });
                }
                locals.push(VarInfo { name: p.name.clone(), ty: p.ty.clone(), pos: f.pos });
            }
            self.check_type(&f.ret, f.pos);
            self.st.functions.push(FuncInfo {
                name: f.name.clone(),
                nparams: f.params.len(),
                ret: f.ret.clone(),
                locals,
                address_taken: false,
                pos: f.pos,
            });
        }
        for g in &prog.globals {
            if self.check_reserved(&g.name, g.pos) {
                continue;
            }
            if self.st.globals.iter().any(|v| v.name == g.name) || self.st.func_id(&g.name).is_some() {
                self.err(ResolveError::Duplicate { name: g.name.clone(), pos: g.pos });
                continue;
            }
            self.check_type(&g.ty, g.pos);
            self.st.globals.push(VarInfo { name: g.name.clone(), ty: g.ty.clone(), pos: g.pos });
        }
    }

    fn lookup_var(&self, name: &str) -> Option<VarRef> {
        if let Some(f) = self.cur {
            if let Some(i) = self.st.func(f).locals.iter().position(|v| v.name == name) {
                return Some(VarRef::Local(f, i as u32));
            }
        }
        self.st.globals.iter().position(|v| v.name == name).map(|i| VarRef::Global(i as u32))
    }

    fn function(&mut self, fid: FuncId, f: &FunctionDef) {
        if self.st.functions.len() <= fid.0 as usize || self.st.functions[fid.0 as usize].name != f.name {
            // declaration was rejected
            return;
        }
        self.cur = Some(fid);
        self.block(&f.body);
        self.cur = None;
    }

    fn block(&mut self, b: &[Stmt]) {
        for s in b {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Decl(d) => {
                if let Some(init) = &d.init {
                    self.expr(init);
                }
                self.check_type(&d.ty, d.pos);
                if matches!(d.ty, Type::Void) {
                    self.err(ResolveError::Invalid { message: format!("variable `{}` has type void", d.name), pos: d.pos });
                }
                if self.check_reserved(&d.name, d.pos) {
                    return;
                }
                let f = self.cur.expect("inside function");
                let clash = self.st.func(f).locals.iter().any(|v| v.name == d.name) || self.st.func_id(&d.name).is_some();
                if clash {
                    self.err(ResolveError::Duplicate { name: d.name.clone(), pos: d.pos });
                    return;
                }
                let locals = &mut self.st.functions[f.0 as usize].locals;
                locals.push(VarInfo { name: d.name.clone(), ty: d.ty.clone(), pos: d.pos });
                self.st.decls.insert(s.id, (locals.len() - 1) as u32);
                if let Some(init) = &d.init {
                    self.check_assign(&d.ty, init);
                }
            }
            StmtKind::Assign { lhs, rhs } => {
                self.expr(rhs);
                if let Some(ty) = self.path(lhs) {
                    if matches!(ty, Type::Record(_)) {
                        self.err(ResolveError::Invalid { message: "record values cannot be assigned".into(), pos: lhs.pos });
                    }
                    self.check_assign(&ty, rhs);
                } else if self.st.paths.get(&lhs.id).is_some_and(|r| !matches!(r, PathRes::Var { .. })) {
                    self.err(ResolveError::Invalid { message: format!("cannot assign to function `{}`", lhs.root), pos: lhs.pos });
                }
            }
            StmtKind::Expr(e) => self.expr(e),
            StmtKind::If { cond, then, els } => {
                self.expr(cond);
                self.block(then);
                if let Some(b) = els {
                    self.block(b);
                }
            }
            StmtKind::While { cond, body } => {
                self.expr(cond);
                self.block(body);
            }
            StmtKind::Return(e) => {
                let f = self.cur.expect("inside function");
                let ret = self.st.func(f).ret.clone();
                match e {
                    Some(e) => {
                        self.expr(e);
                        if ret == Type::Void {
                            self.err(ResolveError::Invalid { message: "void function returns a value".into(), pos: s.pos });
                        } else {
                            self.check_assign(&ret, e);
                        }
                    }
                    None if ret != Type::Void => {
                        self.err(ResolveError::Invalid { message: "missing return value".into(), pos: s.pos })
                    }
                    None => {}
                }
            }
        }
    }

    /// Stream slots only take stream values (or NULL) and vice versa.
    fn check_assign(&mut self, lhs: &Type, rhs: &Expr) {
        let Some(rt) = self.st.expr_types.get(&rhs.id).cloned() else { return };
        let null = matches!(rhs.kind, ExprKind::Null);
        let ok = match lhs {
            Type::File => rt.is_stream() || null,
            _ if rt.is_stream() => matches!(lhs, Type::VoidPtr | Type::Int) && matches!(rhs.kind, ExprKind::Cast { .. }),
            _ => true,
        };
        if !ok {
            self.err(ResolveError::Invalid { message: format!("cannot assign a value of type `{rt}` to `{lhs}`"), pos: rhs.pos });
        }
    }

    fn path(&mut self, p: &Path) -> Option<Type> {
        let res = if let Some(var) = self.lookup_var(&p.root) {
            let mut ty = self.st.var_type(var).clone();
            let mut fields = Vec::new();
            for f in &p.fields {
                let Some(rname) = ty.record_name().map(str::to_string) else {
                    self.err(ResolveError::NotARecord { field: f.clone(), pos: p.pos });
                    return None;
                };
                let rid = self.st.record_id(&rname)?;
                let rec = &self.st.records[rid.0 as usize];
                let Some(fi) = rec.fields.iter().position(|(n, _)| n == f) else {
                    self.err(ResolveError::NoSuchField { record: rname, field: f.clone(), pos: p.pos });
                    return None;
                };
                ty = rec.fields[fi].1.clone();
                fields.push((rid, fi as u32));
            }
            PathRes::Var { var, fields, ty }
        } else if let Some(fid) = self.st.func_id(&p.root) {
            self.st.functions[fid.0 as usize].address_taken = true;
            PathRes::Func(fid)
        } else if let Some(lib) = LibFn::lookup(&p.root, &self.st.nonposix) {
            self.st.lib_as_value.insert(p.root.clone());
            PathRes::Lib(lib)
        } else {
            self.err(ResolveError::Undeclared { name: p.root.clone(), pos: p.pos });
            return None;
        };
        if !matches!(res, PathRes::Var { .. }) && !p.fields.is_empty() {
            self.err(ResolveError::NotARecord { field: p.fields[0].clone(), pos: p.pos });
            return None;
        }
        let ty = match &res {
            PathRes::Var { ty, .. } => ty.clone(),
            PathRes::Func(f) => {
                let info = self.st.func(*f);
                Type::Func(info.param_types().cloned().collect(), Box::new(info.ret.clone()))
            }
            PathRes::Lib(_) => Type::Func(vec![], Box::new(Type::Int)),
        };
        self.st.paths.insert(p.id, res.clone());
        match res {
            PathRes::Var { .. } => Some(ty),
            _ => {
                self.st.expr_types.insert(p.id, ty);
                None
            }
        }
    }

    fn expr(&mut self, e: &Expr) {
        let ty = match &e.kind {
            ExprKind::Path(p) => match self.path(p) {
                Some(t) => t,
                None => match self.st.expr_types.get(&p.id) {
                    Some(t) => t.clone(),
                    None => return,
                },
            },
            ExprKind::Null => Type::VoidPtr,
            ExprKind::Std(_) => Type::File,
            ExprKind::Int(_) | ExprKind::Char(_) => Type::Int,
            ExprKind::Str(_) => Type::Str,
            ExprKind::Binary { lhs, rhs, .. } => {
                self.expr(lhs);
                self.expr(rhs);
                Type::Int
            }
            ExprKind::Unary { operand, .. } => {
                self.expr(operand);
                Type::Int
            }
            ExprKind::Cast { ty, operand } => {
                self.expr(operand);
                self.check_type(ty, e.pos);
                ty.clone()
            }
            ExprKind::New(r) => {
                if self.st.record_id(r).is_none() {
                    self.err(ResolveError::Undeclared { name: format!("struct {r}"), pos: e.pos });
                }
                Type::RecordPtr(r.clone())
            }
            ExprKind::Call { callee, deref, args } => {
                for a in args {
                    self.expr(a);
                }
                match self.call(e, callee, *deref, args) {
                    Some(t) => t,
                    None => return,
                }
            }
        };
        self.st.expr_types.insert(e.id, ty);
    }

    fn call(&mut self, e: &Expr, callee: &str, deref: bool, args: &[Expr]) -> Option<Type> {
        let arity = |this: &mut Self, want: usize, variadic: bool| {
            if args.len() < want || (!variadic && args.len() != want) {
                this.err(ResolveError::Invalid {
                    message: format!("`{callee}` expects {want} argument(s), got {}", args.len()),
                    pos: e.pos,
                });
            }
        };
        if let Some(var) = self.lookup_var(callee) {
            let Type::Func(params, ret) = self.st.var_type(var).clone() else {
                self.err(ResolveError::NotCallable { name: callee.to_string(), pos: e.pos });
                return None;
            };
            arity(self, params.len(), false);
            self.st.calls.insert(e.id, CallKind::Indirect(var));
            return Some(*ret);
        }
        if deref {
            self.err(ResolveError::NotCallable { name: callee.to_string(), pos: e.pos });
            return None;
        }
        if let Some(fid) = self.st.func_id(callee) {
            let info = self.st.func(fid);
            let (n, ret) = (info.nparams, info.ret.clone());
            let ptys: Vec<Type> = info.param_types().cloned().collect();
            arity(self, n, false);
            for (a, pt) in args.iter().zip(&ptys) {
                self.check_assign(pt, a);
            }
            self.st.calls.insert(e.id, CallKind::User(fid));
            return Some(ret);
        }
        let Some(lib) = LibFn::lookup(callee, &self.st.nonposix) else {
            self.err(ResolveError::Undeclared { name: callee.to_string(), pos: e.pos });
            return None;
        };
        let params = lib.params();
        arity(self, params.len(), lib.variadic());
        for (i, a) in args.iter().enumerate() {
            let kind = params.get(i).copied();
            let streamish = self.st.is_stream_expr(a) || matches!(a.kind, ExprKind::Null);
            match kind {
                Some(ArgKind::Stream) if !streamish => self.err(ResolveError::Invalid {
                    message: format!("argument {} of `{callee}` must be a stream", i + 1),
                    pos: a.pos,
                }),
                Some(ArgKind::OutStr) if a.as_path().is_none() => self.err(ResolveError::Invalid {
                    message: format!("argument {} of `{callee}` must be a variable or field", i + 1),
                    pos: a.pos,
                }),
                None if callee == "fscanf" && a.as_path().is_none() => self.err(ResolveError::Invalid {
                    message: "fscanf targets must be variables or fields".into(),
                    pos: a.pos,
                }),
                _ => {}
            }
        }
        let ret = match lib.ret() {
            RetKind::Int => Type::Int,
            RetKind::Stream => Type::File,
            RetKind::Void => Type::Void,
        };
        self.st.calls.insert(e.id, CallKind::Lib(lib));
        Some(ret)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::api::{default_nonposix, ApiFn};
    use crate::frontend::{load, FrontendError};

    fn ok(src: &str) -> (Program, SymbolTable) {
        load(src, &default_nonposix()).unwrap_or_else(|e| panic!("{e}"))
    }

    fn errs(src: &str) -> Vec<ResolveError> {
        match load(src, &default_nonposix()) {
            Err(FrontendError::Resolve(e)) => e,
            other => panic!("expected resolution errors, got {other:?}"),
        }
    }

    #[test]
    fn undeclared_variable() {
        let e = errs("void main() { x = 1; }");
        assert!(matches!(&e[0], ResolveError::Undeclared { name, .. } if name == "x"));
    }

    #[test]
    fn function_as_argument_is_address_taken() {
        let (p, st) = ok("void g(FILE *f) { } void apply(fn(FILE *) -> void h) { } void main() { apply(g); }");
        let g = st.func_id("g").unwrap();
        assert!(st.func(g).address_taken);
        assert!(p.functions[0].address_taken);
        assert!(!st.func(st.func_id("apply").unwrap()).address_taken);
    }

    #[test]
    fn call_classification() {
        let (p, st) = ok("int h(FILE *f) { return 0; } void main() { string s; FILE *f; fn(FILE *) -> int fp; f = stdin; fread(s, 1, 1, f); (*fp)(f); h(f); }");
        let kinds: Vec<_> = p.functions[1].body[4..]
            .iter()
            .map(|s| match &s.kind {
                StmtKind::Expr(e) => st.calls[&e.id].clone(),
                _ => panic!(),
            })
            .collect();
        assert_eq!(kinds[0], CallKind::Lib(LibFn::Api(ApiFn::Fread)));
        assert!(matches!(kinds[1], CallKind::Indirect(_)));
        assert_eq!(kinds[2], CallKind::User(st.func_id("h").unwrap()));
    }

    #[test]
    fn fields_share_one_location() {
        let (p, st) = ok("struct S { FILE *f; }; void main() { struct S *a; struct S *b; a = new S; b = new S; a->f = stdin; b.f = stdout; }");
        let body = &p.functions[0].body;
        let locs: Vec<_> = body
            .iter()
            .filter_map(|s| match &s.kind {
                StmtKind::Assign { lhs, .. } if !lhs.fields.is_empty() => st.path_location(lhs),
                _ => None,
            })
            .collect();
        assert_eq!(locs.len(), 2);
        assert_eq!(locs[0], locs[1]);
        assert_eq!(st.location_name(locs[0]), "S.f");
    }

    #[test]
    fn field_on_non_record_and_non_function_call() {
        let e = errs("void main() { int x; x.f = 1; x(); }");
        assert!(e.iter().any(|e| matches!(e, ResolveError::NotARecord { .. })));
        assert!(e.iter().any(|e| matches!(e, ResolveError::NotCallable { .. })));
    }

    #[test]
    fn api_names_are_reserved() {
        let e = errs("int fopen(int x) { return x; }");
        assert!(matches!(e[0], ResolveError::Reserved { .. }));
    }

    #[test]
    fn duplicates_rejected() {
        let e = errs("void f() { } void f() { }");
        assert!(matches!(e[0], ResolveError::Duplicate { .. }));
        let e = errs("void f() { int a; int a; }");
        assert!(matches!(e[0], ResolveError::Duplicate { .. }));
    }
}
