//! Rewrites a resolved MiniC program into the target language.

use super::decide::{ClassId, Layout};
use super::errplan::ErrPlan;
use super::target::*;
use super::types::*;
use crate::api::{self, ApiFn, ApiRole, ArgKind, LibFn};
use crate::frontend::ast::*;
use crate::frontend::resolve::{CallKind, PathRes, SymbolTable, VarRef};
use crate::ir::{Callee, Instr, IrProgram};
use crate::loc::{FuncId, Location};
use crate::sets::Capability;
use crate::streamsets::StreamFacts;
use crate::support::{api_call_location, SupportVerdict};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)
    }
}

/// What an expression evaluates to, as far as streams are concerned.
#[derive(Debug, Clone, Copy, PartialEq)]
enum VTy {
    Loc(TargetType),
    /// A new owned value; `result` when it still needs unwrapping.
    Fresh { base: BaseType, result: bool },
    Null,
    Libc,
    Plain,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub total: usize,
    pub replaced: usize,
}

/// A rewritten call: statements to run first, then the value.
struct Parts {
    pre: Vec<TStmt>,
    value: TExpr,
    vty: VTy,
    /// Replacement used when the result is discarded.
    stmt_form: Option<Vec<TStmt>>,
}

impl Parts {
    fn value(value: TExpr, vty: VTy) -> Parts {
        Parts { pre: vec![], value, vty, stmt_form: None }
    }

    fn into_expr(self) -> (TExpr, VTy) {
        if self.pre.is_empty() {
            (self.value, self.vty)
        } else {
            (TExpr::Block { stmts: self.pre, tail: Box::new(self.value) }, self.vty)
        }
    }

    fn into_stmts(self) -> Vec<TStmt> {
        if let Some(s) = self.stmt_form {
            return s;
        }
        let mut out = self.pre;
        if !matches!(self.value, TExpr::Unit | TExpr::Int(_) | TExpr::Var(_)) {
            out.push(TStmt::Expr(self.value));
        }
        out
    }
}

struct FnCx {
    fid: FuncId,
    /// Flag variable per class and whether it arrives as a pointer parameter.
    storage: BTreeMap<ClassId, (String, bool)>,
    widen: Vec<ClassId>,
    void: bool,
    tmp_r: String,
    tmp_e: String,
    tmp_s: String,
}

impl FnCx {
    fn place(&self, k: ClassId) -> Option<TExpr> {
        self.storage.get(&k).map(|(n, param)| {
            if *param {
                TExpr::Deref(Box::new(TExpr::var(n)))
            } else {
                TExpr::var(n)
            }
        })
    }

    fn pointer(&self, k: ClassId) -> Option<TExpr> {
        self.storage.get(&k).map(|(n, param)| if *param { TExpr::var(n) } else { TExpr::var(n).addr_of(true) })
    }
}

pub struct Rewriter<'a> {
    pub st: &'a SymbolTable,
    pub ir: &'a IrProgram,
    pub facts: &'a StreamFacts,
    pub verdict: &'a SupportVerdict,
    pub layout: &'a Layout,
    pub plan: &'a ErrPlan,
    pub diags: Vec<Diagnostic>,
    pub counts: Counts,
}

fn fresh_name(base: &str, taken: &BTreeSet<String>) -> String {
    let mut n = base.to_string();
    while taken.contains(&n) {
        n.push('_');
    }
    n
}

fn bool_like(e: &TExpr) -> bool {
    match e {
        TExpr::Binary { op, .. } => op.precedence() == 1,
        TExpr::Not(_) => true,
        TExpr::Method { m, .. } => matches!(m, Method::IsNone | Method::IsSome),
        _ => false,
    }
}

fn map_binop(op: BinOp) -> TBinOp {
    match op {
        BinOp::Eq => TBinOp::Eq,
        BinOp::Ne => TBinOp::Ne,
        BinOp::Lt => TBinOp::Lt,
        BinOp::Le => TBinOp::Le,
        BinOp::Gt => TBinOp::Gt,
        BinOp::Ge => TBinOp::Ge,
        BinOp::Add => TBinOp::Add,
        BinOp::Sub => TBinOp::Sub,
        BinOp::Mul => TBinOp::Mul,
        BinOp::Div => TBinOp::Div,
        BinOp::Rem => TBinOp::Rem,
    }
}

fn map_some(x: TExpr, body: impl FnOnce(TExpr) -> TExpr) -> TExpr {
    TExpr::MapSome { expr: Box::new(x), binder: "v".into(), body: Box::new(body(TExpr::var("v"))) }
}

/// Traits a value stored in `shape` must offer.
fn needed(shape: Shape) -> Bound {
    shape.provides()
}

/// Checks a format string against the supported directives.
pub fn check_format(fmt: &[u8]) -> Result<usize, String> {
    let mut n = 0;
    let mut i = 0;
    while i < fmt.len() {
        if fmt[i] == b'%' {
            match fmt.get(i + 1) {
                Some(b'%') => {}
                Some(b'd' | b's' | b'c') => n += 1,
                Some(c) => return Err(format!("unsupported format directive `%{}`", *c as char)),
                None => return Err("dangling `%` in format".into()),
            }
            i += 2;
        } else {
            i += 1;
        }
    }
    Ok(n)
}

impl<'a> Rewriter<'a> {
    fn diag(&mut self, pos: Pos, message: impl Into<String>) {
        self.diags.push(Diagnostic { pos, message: message.into() });
    }

    fn supported(&self, l: Location) -> bool {
        self.verdict.is_supported(l)
    }

    fn type_of(&mut self, l: Location, pos: Pos) -> TargetType {
        match self.layout.get(l) {
            Some(t) => t,
            None => {
                let name = self.st.location_name(l);
                self.diag(pos, format!("no target type for `{name}`"));
                TargetType::new(Shape::PtrDyn(Bound::empty()))
            }
        }
    }

    fn loc_vty(&mut self, l: Location, pos: Pos) -> VTy {
        if self.supported(l) {
            VTy::Loc(self.type_of(l, pos))
        } else {
            VTy::Libc
        }
    }

    fn closes(&self, l: Location) -> bool {
        self.facts.caps(l).contains(Capability::Close)
    }

    // ---- types ----

    fn var_ty(&mut self, l: Location, ty: &Type) -> TType {
        if ty.is_stream() {
            if self.supported(l) {
                TType::Stream(self.type_of(l, Pos::default()))
            } else {
                TType::LibcFile
            }
        } else {
            self.plain_ty(ty)
        }
    }

    fn plain_ty(&mut self, ty: &Type) -> TType {
        match ty {
            Type::Int => TType::Int,
            Type::Str => TType::Str,
            Type::File => TType::LibcFile,
            Type::Void => TType::Unit,
            Type::VoidPtr => TType::VoidPtr,
            Type::RecordPtr(r) => TType::RecordPtr(r.clone()),
            Type::Record(r) => TType::Record(r.clone()),
            Type::Func(ps, r) => {
                let model = (0..self.st.functions.len() as u32)
                    .map(FuncId)
                    .find(|f| self.st.func(*f).address_taken && self.st.func(*f).nparams == ps.len());
                let params = ps
                    .iter()
                    .enumerate()
                    .map(|(i, p)| match model {
                        Some(g) if p.is_stream() => self.var_ty(Location::Local(g, i as u32), p),
                        _ => self.plain_ty(p),
                    })
                    .collect();
                let ret = match model {
                    Some(g) if r.is_stream() => self.var_ty(Location::Ret(g), r),
                    _ => self.plain_ty(r),
                };
                TType::Func(params, Box::new(ret))
            }
        }
    }

    // ---- coercions ----

    fn fresh_into(&mut self, x: TExpr, src: BaseType, result: bool, t: TargetType) -> TExpr {
        let shape = t.shape;
        let body = move |v: TExpr| -> TExpr {
            let wrapped = match (src, shape.base()) {
                (BaseType::FileT, Some(BaseType::BufReaderFile)) => TExpr::builtin(Builtin::BufReaderNew, vec![v]),
                (BaseType::FileT, Some(BaseType::BufWriterFile)) => TExpr::builtin(Builtin::BufWriterNew, vec![v]),
                (BaseType::FileT, None) if needed(shape).contains(Trait::BufRead) => {
                    TExpr::builtin(Builtin::BufReaderNew, vec![v])
                }
                _ => v,
            };
            match shape {
                Shape::OwnedBase(_) | Shape::GenericParam(_) => wrapped,
                Shape::OwnedDyn(_) => TExpr::builtin(Builtin::BoxNew, vec![wrapped]),
                Shape::PtrBase(_) | Shape::PtrDyn(_) => {
                    TExpr::builtin(Builtin::BoxIntoRaw, vec![TExpr::builtin(Builtin::BoxNew, vec![wrapped])])
                }
            }
        };
        match (t.nullable, result) {
            (true, true) => {
                let probe = body(TExpr::var("v"));
                let ok = x.method(Method::Ok);
                if probe == TExpr::var("v") {
                    ok
                } else {
                    map_some(ok, body)
                }
            }
            (true, false) => TExpr::builtin(Builtin::Some, vec![body(x)]),
            (false, true) => body(x.method(Method::Unwrap)),
            (false, false) => body(x),
        }
    }

    fn loc_into(&mut self, x: TExpr, rt: TargetType, t: TargetType, pos: Pos) -> TExpr {
        let c = match coerce_rvalue(t.shape, rt.shape) {
            Ok(c) => c,
            Err(e) => {
                self.diag(pos, format!("cannot convert {rt} to {t}: {e}"));
                return x;
            }
        };
        let plain = |x: TExpr| -> TExpr {
            match c {
                RvCoercion::Identity => x,
                RvCoercion::BufReaderWrap => TExpr::builtin(Builtin::BufReaderNew, vec![x]),
                RvCoercion::BufWriterWrap => TExpr::builtin(Builtin::BufWriterNew, vec![x]),
                RvCoercion::AddrOf => x.addr_of(true),
                RvCoercion::BoxNew => TExpr::builtin(Builtin::BoxNew, vec![x]),
                RvCoercion::BoxToRaw => x.method(Method::AsMutPtr),
            }
        };
        match (rt.nullable, t.nullable) {
            (false, false) => plain(x),
            (false, true) => TExpr::builtin(Builtin::Some, vec![plain(x)]),
            (true, false) => plain(x.method(Method::Unwrap)),
            (true, true) => match c {
                RvCoercion::Identity => x,
                RvCoercion::AddrOf => {
                    map_some(x.method(Method::AsMut), |v| TExpr::Deref(Box::new(v)).addr_of(true))
                }
                RvCoercion::BoxToRaw => map_some(x.method(Method::AsMut), |v| v.method(Method::AsMutPtr)),
                _ => map_some(x, plain),
            },
        }
    }

    fn coerce(&mut self, x: TExpr, v: VTy, t: TargetType, pos: Pos) -> TExpr {
        match v {
            VTy::Null => {
                if !t.nullable {
                    self.diag(pos, format!("NULL stored into non-optional {t}"));
                }
                TExpr::NoneLit
            }
            VTy::Fresh { base, result } => self.fresh_into(x, base, result, t),
            VTy::Loc(rt) => self.loc_into(x, rt, t, pos),
            VTy::Libc | VTy::Plain => {
                self.diag(pos, "untranslated stream flows into a translated location");
                x
            }
        }
    }

    /// Argument for a generic parameter of type `t`.
    fn arg_into(&mut self, x: TExpr, v: VTy, t: TargetType, close: bool, pos: Pos) -> TExpr {
        match v {
            VTy::Null => TExpr::NoneLit,
            VTy::Fresh { base, result } => {
                let w = self.fresh_into(x, base, result, t);
                match (close, t.nullable) {
                    (true, _) => w,
                    (false, true) => w.method(Method::AsMut),
                    (false, false) => w.addr_of(false),
                }
            }
            VTy::Loc(at) => match coerce_arg(close, at.shape) {
                Ok(ArgCoercion::Move) | Ok(ArgCoercion::Identity) => x,
                Ok(ArgCoercion::MutRef) if at.nullable => x.method(Method::AsMut),
                Ok(ArgCoercion::MutRef) => x.addr_of(false),
                Ok(ArgCoercion::BoxAsMut) => x.method(Method::AsMut),
                Err(e) => {
                    self.diag(pos, format!("cannot pass {at}: {e}"));
                    x
                }
            },
            VTy::Libc | VTy::Plain => {
                self.diag(pos, "untranslated stream passed to a translated parameter");
                x
            }
        }
    }

    /// Value of `e` stored into `dest`.
    fn convert(&mut self, cx: &FnCx, e: &Expr, dest: Location) -> TExpr {
        if !self.supported(dest) {
            return self.natural(cx, e, true).0;
        }
        let t = self.type_of(dest, e.pos);
        let (x, v) = self.natural(cx, e, false);
        self.coerce(x, v, t, e.pos)
    }

    fn stream_arg_into(&mut self, cx: &FnCx, a: &Expr, param: Location) -> TExpr {
        if !self.supported(param) {
            return self.natural(cx, a, true).0;
        }
        let t = self.type_of(param, a.pos);
        let (x, v) = self.natural(cx, a, false);
        if matches!(t.shape, Shape::GenericParam(_)) {
            let close = self.closes(param);
            self.arg_into(x, v, t, close, a.pos)
        } else {
            self.coerce(x, v, t, a.pos)
        }
    }

    fn receiver(&mut self, x: TExpr, v: VTy, op: &IoOp, pos: Pos) -> TExpr {
        let (r, base) = match v {
            VTy::Loc(t) => (if t.nullable { x.method(Method::AsMut).method(Method::Unwrap) } else { x }, t.shape.base()),
            VTy::Fresh { base, result } => {
                let v0 = if result { x.method(Method::Unwrap) } else { x };
                let w = if base == BaseType::FileT && op.required() == Trait::BufRead {
                    TExpr::builtin(Builtin::BufReaderNew, vec![v0])
                } else {
                    v0
                };
                (w, Some(base))
            }
            _ => {
                self.diag(pos, "stream operation on a value that is not a stream");
                (x, None)
            }
        };
        if base == Some(BaseType::ChildT) {
            TExpr::ChildPipe { child: Box::new(r), write: op.is_write() }
        } else {
            r
        }
    }

    // ---- places and expressions ----

    fn var_name(&self, v: VarRef) -> String {
        match v {
            VarRef::Global(g) => self.st.globals[g as usize].name.clone(),
            VarRef::Local(f, i) => self.st.func(f).locals[i as usize].name.clone(),
        }
    }

    fn place(&self, p: &Path) -> TExpr {
        let mut e = match self.st.paths.get(&p.id) {
            Some(PathRes::Var { var, .. }) => TExpr::Var(self.var_name(*var)),
            _ => TExpr::Var(p.root.clone()),
        };
        for f in &p.fields {
            e = TExpr::Field(Box::new(e), f.clone());
        }
        e
    }

    fn expr(&mut self, cx: &FnCx, e: &Expr) -> TExpr {
        self.natural(cx, e, true).0
    }

    /// The value of `e` with no destination in mind. `libc` selects the untouched
    /// rendering for stream primitives.
    fn natural(&mut self, cx: &FnCx, e: &Expr, libc: bool) -> (TExpr, VTy) {
        match &e.kind {
            ExprKind::Path(p) => {
                let x = self.place(p);
                match self.st.paths.get(&p.id) {
                    Some(PathRes::Var { ty, .. }) if ty.is_stream() => {
                        let l = self.st.path_location(p).expect("variable path has a location");
                        let v = self.loc_vty(l, e.pos);
                        (x, v)
                    }
                    _ => (x, VTy::Plain),
                }
            }
            ExprKind::Null if libc => (TExpr::NullPtr, VTy::Libc),
            ExprKind::Null => (TExpr::NoneLit, VTy::Null),
            ExprKind::Std(s) if libc => (TExpr::LibcStd(*s), VTy::Libc),
            ExprKind::Std(s) => {
                let base = match s {
                    StdStream::Stdin => BaseType::StdinT,
                    StdStream::Stdout => BaseType::StdoutT,
                    StdStream::Stderr => BaseType::StderrT,
                };
                (TExpr::builtin(Builtin::Std(*s), vec![]), VTy::Fresh { base, result: false })
            }
            ExprKind::Call { .. } => self.call(cx, e).into_expr(),
            ExprKind::Int(n) => (TExpr::Int(*n), VTy::Plain),
            ExprKind::Char(c) => (TExpr::Char(*c), VTy::Plain),
            ExprKind::Str(s) => (TExpr::Str(s.clone()), VTy::Plain),
            ExprKind::Binary { op, lhs, rhs } => {
                if op.is_equality() {
                    let side = match (&lhs.kind, &rhs.kind) {
                        (_, ExprKind::Null) if self.st.is_stream_expr(lhs) => Some(&**lhs),
                        (ExprKind::Null, _) if self.st.is_stream_expr(rhs) => Some(&**rhs),
                        _ => None,
                    };
                    if let Some(s) = side {
                        return (self.null_test(cx, s, *op == BinOp::Eq), VTy::Plain);
                    }
                }
                let l = self.expr(cx, lhs);
                let r = self.expr(cx, rhs);
                (TExpr::binary(map_binop(*op), l, r), VTy::Plain)
            }
            ExprKind::Unary { op: UnOp::Not, operand } if self.st.is_stream_expr(operand) => {
                (self.null_test(cx, operand, true), VTy::Plain)
            }
            ExprKind::Unary { op, operand } => {
                let x = Box::new(self.expr(cx, operand));
                (if *op == UnOp::Not { TExpr::Not(x) } else { TExpr::Neg(x) }, VTy::Plain)
            }
            ExprKind::Cast { ty, operand } => {
                let x = self.expr(cx, operand);
                let ty = self.plain_ty(ty);
                let v = if ty == TType::LibcFile { VTy::Libc } else { VTy::Plain };
                (TExpr::Cast { expr: Box::new(x), ty }, v)
            }
            ExprKind::New(r) => (TExpr::builtin(Builtin::NewRecord(r.clone()), vec![]), VTy::Plain),
        }
    }

    /// `s == NULL` (or `!=` when `is_null` is false).
    fn null_test(&mut self, cx: &FnCx, s: &Expr, is_null: bool) -> TExpr {
        let (x, v) = self.natural(cx, s, false);
        match v {
            VTy::Loc(t) if t.nullable => x.method(if is_null { Method::IsNone } else { Method::IsSome }),
            VTy::Loc(_) | VTy::Fresh { result: false, .. } => TExpr::Int(if is_null { 0 } else { 1 }),
            VTy::Fresh { result: true, .. } => {
                x.method(Method::Ok).method(if is_null { Method::IsNone } else { Method::IsSome })
            }
            VTy::Null => TExpr::Int(if is_null { 1 } else { 0 }),
            VTy::Libc | VTy::Plain => {
                let x = self.natural(cx, s, true).0;
                TExpr::binary(if is_null { TBinOp::Eq } else { TBinOp::Ne }, x, TExpr::NullPtr)
            }
        }
    }

    fn cond(&mut self, cx: &FnCx, e: &Expr) -> TExpr {
        if self.st.is_stream_expr(e) {
            return self.null_test(cx, e, false);
        }
        let x = self.expr(cx, e);
        if bool_like(&x) {
            x
        } else {
            TExpr::binary(TBinOp::Ne, x, TExpr::Int(0))
        }
    }

    // ---- calls ----

    fn call(&mut self, cx: &FnCx, e: &Expr) -> Parts {
        let ExprKind::Call { callee, args, .. } = &e.kind else { unreachable!("call expected") };
        match self.st.calls.get(&e.id).cloned() {
            Some(CallKind::Lib(LibFn::Api(f))) => self.api_call(cx, e, f, args),
            Some(CallKind::Lib(lib)) => Parts::value(self.libc_call(cx, &lib, args), VTy::Libc),
            Some(CallKind::User(g)) => self.user_call(cx, e, g, args),
            Some(CallKind::Indirect(var)) => self.indirect_call(cx, e, var, args),
            None => {
                self.diag(e.pos, format!("unresolved call to `{callee}`"));
                Parts::value(TExpr::Unit, VTy::Plain)
            }
        }
    }

    fn libc_call(&mut self, cx: &FnCx, lib: &LibFn, args: &[Expr]) -> TExpr {
        let params = lib.params();
        let targets_out = lib.name() == "fscanf";
        let args = args
            .iter()
            .enumerate()
            .map(|(i, a)| match (params.get(i), a.as_path()) {
                (Some(ArgKind::OutStr), Some(p)) => self.place(p).addr_of(false),
                (None, Some(p)) if targets_out => self.place(p).addr_of(false),
                _ => self.expr(cx, a),
            })
            .collect();
        TExpr::Libc { name: lib.name().to_string(), args }
    }

    fn call_label_loc(&self, e: &Expr) -> Option<Location> {
        let l = self.ir.call_labels.get(&e.id)?;
        api_call_location(self.ir.instr(*l)).and_then(|(_, loc)| loc)
    }

    fn instrumented(&self, e: &Expr) -> bool {
        self.ir.call_labels.get(&e.id).is_some_and(|l| self.plan.instrument.contains(l))
    }

    fn api_call(&mut self, cx: &FnCx, e: &Expr, f: ApiFn, args: &[Expr]) -> Parts {
        let spec = api::spec(f);
        self.counts.total += 1;
        let loc = self.call_label_loc(e);
        let Some(loc) = loc.filter(|l| self.supported(*l)) else {
            let lib = LibFn::Api(f);
            return Parts::value(self.libc_call(cx, &lib, args), VTy::Libc);
        };
        self.counts.replaced += 1;
        let k = self.plan.class_of(&self.layout.classes, loc);
        match spec.role {
            ApiRole::Ctor(_) => self.construct(cx, e, f, args),
            ApiRole::Close => self.close(cx, e, f, &args[0]),
            ApiRole::Check => {
                let bit = if f == ApiFn::Feof { 1 } else { 2 };
                let v = match cx.place(k) {
                    Some(p) => TExpr::binary(TBinOp::BitAnd, p, TExpr::Int(bit)),
                    None => TExpr::Int(0),
                };
                Parts::value(v, VTy::Plain)
            }
            ApiRole::Clear => {
                let stmts: Vec<TStmt> =
                    cx.place(k).map(|p| TStmt::Assign { lhs: p, rhs: TExpr::Int(0) }).into_iter().collect();
                Parts { pre: stmts.clone(), value: TExpr::Unit, vty: VTy::Plain, stmt_form: Some(stmts) }
            }
            ApiRole::Op => self.op(cx, e, f, args, k),
        }
    }

    fn construct(&mut self, cx: &FnCx, e: &Expr, f: ApiFn, args: &[Expr]) -> Parts {
        let mode = match &args[1].kind {
            ExprKind::Str(m) => Some(m.clone()),
            _ => None,
        };
        let target = mode.as_ref().and_then(|m| match f {
            ApiFn::Fopen => OpenMode::parse(m).map(|o| (Builtin::Open(o), BaseType::FileT)),
            _ => match m.as_slice() {
                b"r" => Some((Builtin::Spawn(PipeMode::Read), BaseType::ChildT)),
                b"w" => Some((Builtin::Spawn(PipeMode::Write), BaseType::ChildT)),
                _ => None,
            },
        });
        let Some((b, base)) = target else {
            let shown = mode.map(|m| String::from_utf8_lossy(&m).into_owned()).unwrap_or_else(|| "<non-literal>".into());
            self.diag(e.pos, format!("unknown mode \"{shown}\" in {}", api::spec(f).name));
            return Parts::value(self.libc_call(cx, &LibFn::Api(f), args), VTy::Libc);
        };
        let path = self.expr(cx, &args[0]);
        Parts::value(TExpr::builtin(b, vec![path]), VTy::Fresh { base, result: true })
    }

    fn close(&mut self, cx: &FnCx, e: &Expr, f: ApiFn, arg: &Expr) -> Parts {
        let (x, v) = self.natural(cx, arg, false);
        let (owned, base, nullable) = match v {
            VTy::Loc(t) => (t.shape.is_owning(), t.shape.base(), t.nullable),
            VTy::Fresh { base, .. } => (true, Some(base), false),
            _ => (false, None, false),
        };
        if !owned {
            self.diag(e.pos, format!("{} on a non-owning stream", api::spec(f).name));
        }
        let x = match v {
            VTy::Fresh { base, result } => self.fresh_into(x, base, result, TargetType::new(Shape::OwnedBase(base))),
            _ => x,
        };
        let drop = TStmt::Expr(TExpr::builtin(Builtin::Drop, vec![x.clone()]));
        if f == ApiFn::Pclose && base == Some(BaseType::ChildT) {
            let r = if nullable { x.method(Method::AsMut).method(Method::Unwrap) } else { x };
            let wait = r.method(Method::Wait);
            let stmt_form = vec![TStmt::Expr(wait.clone()), drop.clone()];
            let pre = vec![TStmt::Let { name: cx.tmp_s.clone(), ty: None, init: Some(wait) }, drop];
            return Parts { pre, value: TExpr::var(&cx.tmp_s), vty: VTy::Plain, stmt_form: Some(stmt_form) };
        }
        Parts { pre: vec![drop], value: TExpr::Int(0), vty: VTy::Plain, stmt_form: None }
    }

    fn op(&mut self, cx: &FnCx, e: &Expr, f: ApiFn, args: &[Expr], k: ClassId) -> Parts {
        let spec = api::spec(f);
        let sa = spec.stream_arg.expect("operations take a stream");
        let out = |this: &Self, a: &Expr| -> TExpr {
            match a.as_path() {
                Some(p) => this.place(p).addr_of(false),
                None => TExpr::Unit,
            }
        };
        let fmt_of = |this: &mut Self, a: &Expr| -> Vec<u8> {
            match &a.kind {
                ExprKind::Str(s) => {
                    if let Err(m) = check_format(s) {
                        this.diag(a.pos, m);
                    }
                    s.clone()
                }
                _ => {
                    this.diag(a.pos, format!("{} needs a literal format", spec.name));
                    Vec::new()
                }
            }
        };
        let (op, targs): (IoOp, Vec<TExpr>) = match f {
            ApiFn::Fread => (IoOp::ReadItems, vec![out(self, &args[0]), self.expr(cx, &args[1]), self.expr(cx, &args[2])]),
            ApiFn::Fgetc | ApiFn::Getc => (IoOp::ReadByte, vec![]),
            ApiFn::Fgets => (IoOp::ReadLineInto, vec![out(self, &args[0]), self.expr(cx, &args[1])]),
            ApiFn::Getline => (IoOp::ReadLine, vec![out(self, &args[0])]),
            ApiFn::Fscanf => {
                let fmt = fmt_of(self, &args[1]);
                (IoOp::Scan(fmt), args[2..].iter().map(|a| out(self, a)).collect())
            }
            ApiFn::Fwrite => {
                (IoOp::WriteItems, vec![self.expr(cx, &args[0]), self.expr(cx, &args[1]), self.expr(cx, &args[2])])
            }
            ApiFn::Fputc | ApiFn::Putc => (IoOp::WriteByte, vec![self.expr(cx, &args[0])]),
            ApiFn::Fputs => (IoOp::WriteStr, vec![self.expr(cx, &args[0])]),
            ApiFn::Fprintf => {
                let fmt = fmt_of(self, &args[1]);
                (IoOp::Print(fmt), args[2..].iter().map(|a| self.expr(cx, a)).collect())
            }
            ApiFn::Fflush => (IoOp::Flush, vec![]),
            ApiFn::Fseek => (IoOp::Seek, vec![self.expr(cx, &args[1]), self.expr(cx, &args[2])]),
            ApiFn::Ftell => (IoOp::Tell, vec![]),
            ApiFn::Rewind => (IoOp::Rewind, vec![]),
            _ => unreachable!("not an operation: {}", spec.name),
        };
        let (x, v) = self.natural(cx, &args[sa], false);
        let recv = self.receiver(x, v, &op, e.pos);
        let clear = match f {
            ApiFn::Fseek => 1,
            ApiFn::Rewind => 3,
            _ => 0,
        };
        let record = self.instrumented(e);
        let guard = match cx.place(k) {
            Some(var) if record || clear != 0 => Some(Box::new(Guard { var, record, clear })),
            _ => None,
        };
        Parts::value(TExpr::Io { recv: Box::new(recv), op, args: targs, guard }, VTy::Plain)
    }

    fn user_call(&mut self, cx: &FnCx, e: &Expr, g: FuncId, args: &[Expr]) -> Parts {
        let info = self.st.func(g);
        let mut targs = Vec::with_capacity(args.len());
        for (i, a) in args.iter().enumerate() {
            if info.locals[i].ty.is_stream() {
                targs.push(self.stream_arg_into(cx, a, Location::Local(g, i as u32)));
            } else {
                targs.push(self.expr(cx, a));
            }
        }
        for k in self.plan.params_of(g) {
            match cx.pointer(k) {
                Some(p) => targs.push(p),
                None => {
                    self.diag(e.pos, format!("no error variable to pass to `{}`", info.name));
                    targs.push(TExpr::NullPtr);
                }
            }
        }
        let call = TExpr::Call { func: info.name.clone(), args: targs };
        let vty = if info.ret.is_stream() { self.loc_vty(Location::Ret(g), e.pos) } else { VTy::Plain };
        let widened = self.plan.widened(g);
        if widened.is_empty() {
            return Parts::value(call, vty);
        }
        let mut names = Vec::new();
        let mut merges = Vec::new();
        for (j, k) in widened.iter().enumerate() {
            let n = if widened.len() == 1 { cx.tmp_e.clone() } else { format!("{}{j}", cx.tmp_e) };
            match cx.place(*k) {
                Some(p) => {
                    merges.push(TStmt::Compound { op: CompoundOp::Or, lhs: p, rhs: TExpr::var(&n) });
                    names.push(Some(n));
                }
                None => names.push(None),
            }
        }
        let mut stmt_form = vec![TStmt::LetTuple { names: [vec![None], names.clone()].concat(), init: call.clone() }];
        stmt_form.extend(merges.iter().cloned());
        let mut pre = vec![TStmt::LetTuple { names: [vec![Some(cx.tmp_r.clone())], names].concat(), init: call }];
        pre.extend(merges);
        Parts { pre, value: TExpr::var(&cx.tmp_r), vty, stmt_form: Some(stmt_form) }
    }

    fn indirect_call(&mut self, cx: &FnCx, e: &Expr, var: VarRef, args: &[Expr]) -> Parts {
        let model = match self.ir.call_labels.get(&e.id).map(|l| self.ir.instr(*l)) {
            Some(Instr::Call { callee: Callee::Indirect { targets, .. }, .. }) => targets.first().copied(),
            _ => None,
        };
        let ptys: Vec<Type> = match self.st.var_type(var) {
            Type::Func(ps, _) => ps.clone(),
            _ => vec![],
        };
        let mut targs = Vec::new();
        for (i, a) in args.iter().enumerate() {
            let stream = ptys.get(i).is_some_and(Type::is_stream);
            targs.push(match model {
                Some(g) if stream => self.stream_arg_into(cx, a, Location::Local(g, i as u32)),
                _ => self.expr(cx, a),
            });
        }
        let ret_stream = matches!(self.st.var_type(var), Type::Func(_, r) if r.is_stream());
        let vty = match model {
            Some(g) if ret_stream => self.loc_vty(Location::Ret(g), e.pos),
            _ if ret_stream => VTy::Libc,
            _ => VTy::Plain,
        };
        let callee = TExpr::Var(self.var_name(var));
        Parts::value(TExpr::CallIndirect { var: Box::new(callee), args: targs }, vty)
    }

    // ---- statements ----

    fn block(&mut self, cx: &FnCx, b: &[Stmt]) -> Vec<TStmt> {
        let mut out = Vec::new();
        for s in b {
            self.stmt(cx, s, &mut out);
        }
        out
    }

    fn widened_return(&self, cx: &FnCx, v: TExpr) -> TExpr {
        let mut items = vec![v];
        for k in &cx.widen {
            items.push(cx.place(*k).unwrap_or(TExpr::Int(0)));
        }
        TExpr::Tuple(items)
    }

    fn stmt(&mut self, cx: &FnCx, s: &Stmt, out: &mut Vec<TStmt>) {
        match &s.kind {
            StmtKind::Decl(d) => {
                let slot = Location::Local(cx.fid, self.st.decls[&s.id]);
                let ty = self.var_ty(slot, &d.ty);
                let init = d.init.as_ref().map(|i| {
                    if d.ty.is_stream() {
                        self.convert(cx, i, slot)
                    } else {
                        self.expr(cx, i)
                    }
                });
                let name = self.st.func(cx.fid).locals[self.st.decls[&s.id] as usize].name.clone();
                out.push(TStmt::Let { name, ty: Some(ty), init });
            }
            StmtKind::Assign { lhs, rhs } => {
                let rhs = match self.st.path_location(lhs) {
                    Some(l) if self.st.location_type(l).is_stream() => self.convert(cx, rhs, l),
                    _ => self.expr(cx, rhs),
                };
                out.push(TStmt::Assign { lhs: self.place(lhs), rhs });
            }
            StmtKind::Expr(e) => match &e.kind {
                ExprKind::Call { .. } => out.extend(self.call(cx, e).into_stmts()),
                _ => out.push(TStmt::Expr(self.expr(cx, e))),
            },
            StmtKind::If { cond, then, els } => {
                let cond = self.cond(cx, cond);
                let then = self.block(cx, then);
                let els = els.as_ref().map(|b| self.block(cx, b));
                out.push(TStmt::If { cond, then, els });
            }
            StmtKind::While { cond, body } => {
                let cond = self.cond(cx, cond);
                let body = self.block(cx, body);
                out.push(TStmt::While { cond, body });
            }
            StmtKind::Return(v) => {
                let v = v.as_ref().map(|e| {
                    if self.st.func(cx.fid).ret.is_stream() {
                        self.convert(cx, e, Location::Ret(cx.fid))
                    } else {
                        self.expr(cx, e)
                    }
                });
                if cx.widen.is_empty() {
                    out.push(TStmt::Return(v));
                } else {
                    let v = self.widened_return(cx, v.unwrap_or(TExpr::Unit));
                    out.push(TStmt::Return(Some(v)));
                }
            }
        }
    }

    // ---- program ----

    fn user_names(&self, f: FuncId) -> BTreeSet<String> {
        let mut taken: BTreeSet<String> = self.st.func(f).locals.iter().map(|v| v.name.clone()).collect();
        taken.extend(self.st.globals.iter().map(|g| g.name.clone()));
        taken.extend(self.st.functions.iter().map(|g| g.name.clone()));
        taken
    }

    fn function(&mut self, f: &FunctionDef, fid: FuncId) -> TFunc {
        let taken = self.user_names(fid);
        let classes = self.plan.classes_in(fid);
        let mut storage = BTreeMap::new();
        let mut used = taken.clone();
        for (j, k) in classes.iter().enumerate() {
            let base = if classes.len() == 1 { "e".to_string() } else { format!("e{j}") };
            let n = fresh_name(&base, &used);
            used.insert(n.clone());
            storage.insert(*k, (n, self.plan.has_param(fid, *k)));
        }
        let cx = FnCx {
            fid,
            storage,
            widen: self.plan.widened(fid),
            void: f.ret == Type::Void,
            tmp_r: fresh_name("_r", &used),
            tmp_e: fresh_name("_e", &used),
            tmp_s: fresh_name("_s", &used),
        };
        let info = self.st.func(fid);
        let mut params = Vec::new();
        for i in 0..info.nparams {
            let l = Location::Local(fid, i as u32);
            let ty = self.var_ty(l, &info.locals[i].ty);
            params.push(TParam { name: info.locals[i].name.clone(), ty });
        }
        for k in self.plan.params_of(fid) {
            params.push(TParam { name: cx.storage[&k].0.clone(), ty: TType::IntPtr });
        }
        let mut ret = self.var_ty(Location::Ret(fid), &f.ret);
        if !cx.widen.is_empty() {
            let mut items = vec![ret];
            items.extend(cx.widen.iter().map(|_| TType::Int));
            ret = TType::Tuple(items);
        }
        let mut body = Vec::new();
        for (n, param) in cx.storage.values() {
            if !param {
                body.push(TStmt::Let { name: n.clone(), ty: None, init: Some(TExpr::Int(0)) });
            }
        }
        body.extend(self.block(&cx, &f.body));
        if !cx.widen.is_empty() && cx.void && !matches!(body.last(), Some(TStmt::Return(_))) {
            let v = self.widened_return(&cx, TExpr::Unit);
            body.push(TStmt::Return(Some(v)));
        }
        TFunc { name: f.name.clone(), params, ret, body }
    }

    pub fn program(&mut self, prog: &Program) -> TargetProgram {
        let mut out = TargetProgram::default();
        for (ri, r) in prog.records.iter().enumerate() {
            let rid = crate::loc::RecordId(ri as u32);
            let fields = r
                .fields
                .iter()
                .enumerate()
                .map(|(i, (n, ty))| (n.clone(), self.var_ty(Location::Field(rid, i as u32), ty)))
                .collect();
            out.records.push(TRecord { name: r.name.clone(), fields });
        }
        let global_cx = FnCx {
            fid: FuncId(u32::MAX),
            storage: BTreeMap::new(),
            widen: vec![],
            void: true,
            tmp_r: "_r".into(),
            tmp_e: "_e".into(),
            tmp_s: "_s".into(),
        };
        for (gi, g) in prog.globals.iter().enumerate() {
            let l = Location::Global(gi as u32);
            let ty = self.var_ty(l, &g.ty);
            let init = g.init.as_ref().map(|e| {
                if g.ty.is_stream() {
                    self.convert(&global_cx, e, l)
                } else {
                    self.expr(&global_cx, e)
                }
            });
            out.globals.push(TGlobal { name: g.name.clone(), ty, init });
        }
        for (fi, f) in prog.functions.iter().enumerate() {
            let tf = self.function(f, FuncId(fi as u32));
            out.functions.push(tf);
        }
        let mut bounds: BTreeSet<Vec<&'static str>> = BTreeSet::new();
        let mut traits = Vec::new();
        for t in self.layout.types.values() {
            if let Shape::OwnedDyn(b) | Shape::PtrDyn(b) | Shape::GenericParam(b) = t.shape {
                if b.len() > 1 && bounds.insert(b.names()) {
                    traits.push(CombinedTrait { name: bound_name(b), bound: b });
                }
            }
        }
        traits.sort_by(|a, b| a.name.cmp(&b.name));
        out.traits = traits;
        out
    }
}
