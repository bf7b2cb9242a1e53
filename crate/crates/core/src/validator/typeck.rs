//! Static checks on transformed programs: trait bounds, stream categories,
//! moves of owned streams and name binding.

use crate::transform::print::ty_str;
use crate::transform::target::*;
use crate::transform::types::{BaseType, Bound, Shape, TargetType, Trait};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TypeErrorKind {
    MissingBound,
    UseAfterMove,
    CategoryMismatch,
    UnknownName,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct TypeDiagnostic {
    pub kind: TypeErrorKind,
    pub func: String,
    pub message: String,
}

impl fmt::Display for TypeDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}: {}", self.func, self.kind, self.message)
    }
}

/// Static type of a target expression, as far as the checks need it.
#[derive(Debug, Clone, PartialEq)]
enum Ty {
    Stream { shape: Shape, nullable: bool, result: bool },
    /// A `&mut` borrow of a stream.
    Borrow(Shape),
    /// `Box<T>` of a concrete stream, before any unsizing.
    Boxed(Shape),
    Null,
    Libc,
    Plain(TType),
    Unknown,
}

fn stream(shape: Shape) -> Ty {
    Ty::Stream { shape, nullable: false, result: false }
}

fn of_ttype(t: &TType) -> Ty {
    match t {
        TType::Stream(t) => Ty::Stream { shape: t.shape, nullable: t.nullable, result: false },
        TType::LibcFile => Ty::Libc,
        t => Ty::Plain(t.clone()),
    }
}

/// Pointer to a value of `shape`.
fn pointer_to(shape: Shape) -> Shape {
    match shape {
        Shape::OwnedBase(b) | Shape::PtrBase(b) => Shape::PtrBase(b),
        Shape::OwnedDyn(b) | Shape::PtrDyn(b) | Shape::GenericParam(b) => Shape::PtrDyn(b),
    }
}

fn shape_fits(dst: Shape, src: Shape) -> bool {
    match (dst, src) {
        (Shape::OwnedBase(a), Shape::OwnedBase(b)) | (Shape::PtrBase(a), Shape::PtrBase(b)) => a == b,
        (Shape::OwnedDyn(b), Shape::OwnedDyn(_)) | (Shape::PtrDyn(b), Shape::PtrDyn(_) | Shape::PtrBase(_)) => {
            b.is_subset(src.provides())
        }
        (Shape::GenericParam(b), _) => b.is_subset(src.provides()),
        // Generic values stand in for whatever the caller passed.
        (_, Shape::GenericParam(_)) => true,
        _ => false,
    }
}

fn owning(t: &TType) -> bool {
    matches!(t, TType::Stream(TargetType { shape, .. }) if shape.is_owning())
}

/// Move state of locals; `None` when control cannot reach this point.
type MoveState = Option<BTreeSet<String>>;

fn join(a: &MoveState, b: &MoveState) -> MoveState {
    match (a, b) {
        (None, x) | (x, None) => x.clone(),
        (Some(x), Some(y)) => Some(x.union(y).cloned().collect()),
    }
}

struct Checker<'a> {
    prog: &'a TargetProgram,
    func: String,
    locals: BTreeMap<String, TType>,
    binders: BTreeMap<String, Ty>,
    diags: BTreeSet<TypeDiagnostic>,
    /// Variables already reported as used after a move.
    reported: BTreeSet<String>,
    ret: TType,
}

pub fn check(prog: &TargetProgram) -> Vec<TypeDiagnostic> {
    let mut all = BTreeSet::new();
    for f in &prog.functions {
        let mut c = Checker {
            prog,
            func: f.name.clone(),
            locals: BTreeMap::new(),
            binders: BTreeMap::new(),
            diags: BTreeSet::new(),
            reported: BTreeSet::new(),
            ret: f.ret.clone(),
        };
        for p in &f.params {
            c.locals.insert(p.name.clone(), p.ty.clone());
        }
        collect_lets(&f.body, &mut c.locals);
        let mut st: MoveState = Some(BTreeSet::new());
        c.block(&f.body, &mut st);
        all.extend(c.diags);
    }
    for g in &prog.globals {
        if let (TType::Stream(t), Some(init)) = (&g.ty, &g.init) {
            let mut c = Checker {
                prog,
                func: "<global>".into(),
                locals: BTreeMap::new(),
                binders: BTreeMap::new(),
                diags: BTreeSet::new(),
                reported: BTreeSet::new(),
                ret: TType::Unit,
            };
            let mut st = Some(BTreeSet::new());
            let ty = c.expr(init, &mut st, false);
            c.assignable(&TType::Stream(*t), &ty, &g.name);
            all.extend(c.diags);
        }
    }
    all.into_iter().collect()
}

fn collect_lets(b: &[TStmt], out: &mut BTreeMap<String, TType>) {
    for s in b {
        match s {
            TStmt::Let { name, ty, init } => {
                out.entry(name.clone()).or_insert_with(|| ty.clone().unwrap_or(TType::Int));
                if let Some(e) = init {
                    collect_expr_lets(e, out);
                }
            }
            TStmt::LetTuple { names, init } => {
                for n in names.iter().flatten() {
                    out.entry(n.clone()).or_insert(TType::Int);
                }
                collect_expr_lets(init, out);
            }
            TStmt::If { then, els, .. } => {
                collect_lets(then, out);
                if let Some(b) = els {
                    collect_lets(b, out);
                }
            }
            TStmt::While { body, .. } => collect_lets(body, out),
            TStmt::Assign { rhs: e, .. } | TStmt::Expr(e) | TStmt::Return(Some(e)) => collect_expr_lets(e, out),
            _ => {}
        }
    }
}

fn collect_expr_lets(e: &TExpr, out: &mut BTreeMap<String, TType>) {
    if let TExpr::Block { stmts, .. } = e {
        collect_lets(stmts, out);
    }
}

impl Checker<'_> {
    fn diag(&mut self, kind: TypeErrorKind, message: String) {
        self.diags.insert(TypeDiagnostic { kind, func: self.func.clone(), message });
    }

    fn block(&mut self, b: &[TStmt], st: &mut MoveState) {
        for s in b {
            self.stmt(s, st);
        }
    }

    fn stmt(&mut self, s: &TStmt, st: &mut MoveState) {
        match s {
            TStmt::Let { name, ty, init } => {
                if let Some(e) = init {
                    let t = self.expr(e, st, true);
                    if let Some(dt) = ty {
                        self.assignable(dt, &t, name);
                    }
                }
                if let Some(m) = st {
                    m.remove(name);
                }
            }
            TStmt::LetTuple { names, init } => {
                if let Ty::Plain(TType::Tuple(items)) = self.expr(init, st, true) {
                    for (n, t) in names.iter().zip(items) {
                        if let Some(n) = n {
                            self.locals.insert(n.clone(), t);
                        }
                    }
                }
                if let Some(m) = st {
                    for n in names.iter().flatten() {
                        m.remove(n);
                    }
                }
            }
            TStmt::Assign { lhs, rhs } => {
                let t = self.expr(rhs, st, true);
                let dt = self.place_type(lhs, st);
                if let Some(dt) = dt {
                    self.assignable(&dt, &t, &crate::transform::print::expr(lhs));
                }
                if let (TExpr::Var(n), Some(m)) = (lhs, st.as_mut()) {
                    m.remove(n);
                }
            }
            TStmt::Compound { lhs, rhs, .. } => {
                self.expr(rhs, st, false);
                self.place_type(lhs, st);
            }
            TStmt::Expr(e) => {
                self.expr(e, st, false);
            }
            TStmt::If { cond, then, els } => {
                self.expr(cond, st, false);
                let mut a = st.clone();
                self.block(then, &mut a);
                let mut b = st.clone();
                if let Some(els) = els {
                    self.block(els, &mut b);
                }
                *st = join(&a, &b);
            }
            TStmt::While { cond, body } => {
                // Iterate to a fixpoint so moves late in the body reach its start.
                let mut head = st.clone();
                for _ in 0..8 {
                    let mut s2 = head.clone();
                    self.expr(cond, &mut s2, false);
                    let exit = s2.clone();
                    self.block(body, &mut s2);
                    let next = join(&head, &s2);
                    if next == head {
                        *st = exit;
                        return;
                    }
                    head = next;
                }
                let mut s2 = head;
                self.expr(cond, &mut s2, false);
                *st = s2;
            }
            TStmt::Return(e) => {
                if let Some(e) = e {
                    let t = self.expr(e, st, true);
                    let ret = self.ret.clone();
                    self.assignable(&ret, &t, "return value");
                }
                *st = None;
            }
        }
    }

    fn var_type(&self, n: &str) -> Option<TType> {
        if let Some(t) = self.locals.get(n) {
            return Some(t.clone());
        }
        if let Some(g) = self.prog.globals.iter().find(|g| g.name == n) {
            return Some(g.ty.clone());
        }
        self.prog.func(n).map(|f| TType::Func(f.params.iter().map(|p| p.ty.clone()).collect(), Box::new(f.ret.clone())))
    }

    fn field_type(&self, rec: &Ty, field: &str) -> Option<TType> {
        let name = match rec {
            Ty::Plain(TType::Record(n) | TType::RecordPtr(n)) => n,
            _ => return None,
        };
        let r = self.prog.record(name)?;
        r.fields.iter().find(|(f, _)| f == field).map(|(_, t)| t.clone())
    }

    fn place_type(&mut self, e: &TExpr, st: &mut MoveState) -> Option<TType> {
        match e {
            TExpr::Var(n) => {
                let t = self.var_type(n);
                if t.is_none() && !self.binders.contains_key(n) {
                    self.diag(TypeErrorKind::UnknownName, format!("`{n}` is not bound"));
                }
                t
            }
            TExpr::Field(r, f) => {
                let rt = self.expr(r, st, false);
                let t = self.field_type(&rt, f);
                if t.is_none() && !matches!(rt, Ty::Unknown) {
                    self.diag(TypeErrorKind::UnknownName, format!("no field `{f}`"));
                }
                t
            }
            TExpr::Deref(inner) => {
                self.expr(inner, st, false);
                None
            }
            _ => None,
        }
    }

    fn assignable(&mut self, dst: &TType, src: &Ty, what: &str) {
        let ok = match (dst, src) {
            (_, Ty::Unknown) => true,
            (TType::Stream(t), Ty::Null) => t.nullable,
            (TType::Stream(t), Ty::Stream { shape, nullable, result }) => {
                !result && *nullable == t.nullable && shape_fits(t.shape, *shape)
            }
            (TType::Stream(t), Ty::Boxed(inner)) => {
                !t.nullable && matches!(t.shape, Shape::OwnedDyn(b) if b.is_subset(inner.provides()))
            }
            (TType::Stream(t), Ty::Borrow(shape)) => matches!(t.shape, Shape::GenericParam(_)) && shape_fits(t.shape, *shape),
            (TType::Stream(_), Ty::Libc | Ty::Plain(_)) => false,
            (TType::LibcFile, Ty::Stream { .. } | Ty::Borrow(_) | Ty::Boxed(_)) => false,
            (TType::Tuple(items), Ty::Plain(TType::Tuple(srcs))) => items.len() == srcs.len(),
            _ => true,
        };
        if !ok {
            let shown = match src {
                Ty::Stream { shape, nullable, result } => {
                    let t = TargetType { shape: *shape, nullable: *nullable };
                    if *result {
                        format!("io::Result<{t}>")
                    } else {
                        t.to_string()
                    }
                }
                Ty::Borrow(s) => format!("&mut {s}"),
                Ty::Boxed(s) => format!("Box<{s}>"),
                Ty::Null => "None".into(),
                Ty::Libc => "*mut FILE".into(),
                Ty::Plain(t) => ty_str(t),
                Ty::Unknown => "_".into(),
            };
            self.diag(TypeErrorKind::CategoryMismatch, format!("{what}: expected {}, found {shown}", ty_str(dst)));
        }
    }

    fn use_var(&mut self, n: &str, st: &mut MoveState, moving: bool) {
        let Some(m) = st else { return };
        if m.contains(n) && self.reported.insert(n.to_string()) {
            self.diag(TypeErrorKind::UseAfterMove, format!("`{n}` used after it was moved"));
        }
        if moving && self.locals.get(n).is_some_and(owning) {
            m.insert(n.to_string());
        }
    }

    /// Type of `e`; `moving` marks positions that take ownership of a bare variable.
    fn expr(&mut self, e: &TExpr, st: &mut MoveState, moving: bool) -> Ty {
        match e {
            TExpr::Int(_) | TExpr::Char(_) => Ty::Plain(TType::Int),
            TExpr::Str(_) => Ty::Plain(TType::Str),
            TExpr::Unit => Ty::Plain(TType::Unit),
            TExpr::NoneLit | TExpr::NullPtr => Ty::Null,
            TExpr::Var(n) => {
                if let Some(t) = self.binders.get(n) {
                    return t.clone();
                }
                let t = self.place_type(e, st);
                self.use_var(n, st, moving);
                t.map_or(Ty::Unknown, |t| of_ttype(&t))
            }
            TExpr::Field(..) => self.place_type(e, st).map_or(Ty::Unknown, |t| of_ttype(&t)),
            TExpr::Deref(inner) => match self.expr(inner, st, false) {
                Ty::Stream { shape: Shape::PtrBase(b), nullable: false, .. } => stream(Shape::OwnedBase(b)),
                Ty::Stream { shape: Shape::PtrDyn(b), nullable: false, .. } => stream(Shape::OwnedDyn(b)),
                Ty::Plain(TType::IntPtr) => Ty::Plain(TType::Int),
                t @ Ty::Stream { .. } => t,
                _ => Ty::Unknown,
            },
            TExpr::AddrOf { raw, expr } => match self.expr(expr, st, false) {
                Ty::Stream { shape, nullable: false, .. } if *raw => stream(pointer_to(shape)),
                Ty::Stream { shape, nullable: false, .. } => Ty::Borrow(shape),
                Ty::Plain(TType::Int) if *raw => Ty::Plain(TType::IntPtr),
                _ => Ty::Unknown,
            },
            TExpr::Builtin { f, args } => self.builtin(f, args, st),
            TExpr::Method { recv, m } => {
                let takes = matches!(m, Method::Unwrap | Method::Ok);
                let t = self.expr(recv, st, takes);
                match (m, t) {
                    (Method::IsNone | Method::IsSome, _) => Ty::Plain(TType::Int),
                    (Method::Wait, Ty::Stream { shape: Shape::OwnedBase(BaseType::ChildT), .. }) => Ty::Plain(TType::Int),
                    (Method::Wait, Ty::Unknown) => Ty::Plain(TType::Int),
                    (Method::Wait, t) => {
                        self.diag(TypeErrorKind::MissingBound, format!("wait on {t:?}"));
                        Ty::Plain(TType::Int)
                    }
                    (Method::Unwrap, Ty::Stream { shape, nullable, result }) if nullable || result => {
                        stream(shape)
                    }
                    (Method::Ok, Ty::Stream { shape, result: true, .. }) => {
                        Ty::Stream { shape, nullable: true, result: false }
                    }
                    (Method::AsMut, t @ Ty::Stream { .. }) => t,
                    (Method::AsMutPtr, Ty::Stream { shape: Shape::OwnedDyn(b), nullable, .. }) => {
                        Ty::Stream { shape: Shape::PtrDyn(b), nullable, result: false }
                    }
                    (_, Ty::Unknown) => Ty::Unknown,
                    (m, t) => {
                        self.diag(TypeErrorKind::CategoryMismatch, format!("`{}` on {t:?}", m.name()));
                        Ty::Unknown
                    }
                }
            }
            TExpr::MapSome { expr, binder, body } => {
                let t = self.expr(expr, st, true);
                let inner = match t {
                    Ty::Stream { shape, nullable: true, result: false } => stream(shape),
                    Ty::Unknown => Ty::Unknown,
                    t => {
                        self.diag(TypeErrorKind::CategoryMismatch, format!("map over a non-optional {t:?}"));
                        Ty::Unknown
                    }
                };
                let saved = self.binders.insert(binder.clone(), inner);
                let out = self.expr(body, st, true);
                match saved {
                    Some(s) => self.binders.insert(binder.clone(), s),
                    None => self.binders.remove(binder),
                };
                match out {
                    Ty::Stream { shape, .. } => Ty::Stream { shape, nullable: true, result: false },
                    Ty::Boxed(inner) => Ty::Stream { shape: Shape::OwnedDyn(inner.provides()), nullable: true, result: false },
                    _ => Ty::Unknown,
                }
            }
            TExpr::ChildPipe { child, write } => match self.expr(child, st, false) {
                Ty::Stream { shape: Shape::OwnedBase(BaseType::ChildT) | Shape::PtrBase(BaseType::ChildT), nullable: false, .. } => {
                    let b = if *write { Bound::of(&[Trait::Write]) } else { Bound::of(&[Trait::Read]) };
                    stream(Shape::PtrDyn(b))
                }
                Ty::Unknown => Ty::Unknown,
                t => {
                    self.diag(TypeErrorKind::CategoryMismatch, format!("pipe of a non-child {t:?}"));
                    Ty::Unknown
                }
            },
            TExpr::Io { recv, op, args, guard } => {
                let rt = self.expr(recv, st, false);
                match rt {
                    Ty::Stream { shape, nullable: false, result: false } | Ty::Borrow(shape) => {
                        let need = op.required();
                        if !shape.provides().contains(need) {
                            self.diag(
                                TypeErrorKind::MissingBound,
                                format!("{shape} does not implement {need:?} needed by {op:?}"),
                            );
                        }
                    }
                    Ty::Unknown => {}
                    t => self.diag(TypeErrorKind::CategoryMismatch, format!("{op:?} on {t:?}")),
                }
                for a in args {
                    self.expr(a, st, false);
                }
                if let Some(g) = guard {
                    self.place_type(&g.var, st);
                }
                Ty::Plain(TType::Int)
            }
            TExpr::Libc { args, .. } => {
                for a in args {
                    let t = self.expr(a, st, false);
                    if matches!(t, Ty::Stream { .. } | Ty::Borrow(_)) {
                        self.diag(TypeErrorKind::CategoryMismatch, "typed stream passed to a libc function".into());
                    }
                }
                Ty::Unknown
            }
            TExpr::LibcStd(_) => Ty::Libc,
            TExpr::Call { func, args } => {
                let sig = self.prog.func(func).map(|f| (f.params.clone(), f.ret.clone()));
                let Some((params, ret)) = sig else {
                    self.diag(TypeErrorKind::UnknownName, format!("no function `{func}`"));
                    for a in args {
                        self.expr(a, st, true);
                    }
                    return Ty::Unknown;
                };
                if params.len() != args.len() {
                    self.diag(TypeErrorKind::CategoryMismatch, format!("`{func}` takes {} arguments", params.len()));
                }
                for (i, a) in args.iter().enumerate() {
                    let t = self.expr(a, st, true);
                    if let Some(p) = params.get(i) {
                        self.assignable(&p.ty, &t, &format!("argument {} of `{func}`", i + 1));
                    }
                }
                of_ttype(&ret)
            }
            TExpr::CallIndirect { var, args } => {
                let ft = self.expr(var, st, false);
                let (ps, ret) = match ft {
                    Ty::Plain(TType::Func(ps, r)) => (ps, *r),
                    _ => (vec![], TType::Unit),
                };
                for (i, a) in args.iter().enumerate() {
                    let t = self.expr(a, st, true);
                    if let Some(p) = ps.get(i) {
                        self.assignable(p, &t, &format!("argument {} of an indirect call", i + 1));
                    }
                }
                if ps.is_empty() {
                    Ty::Unknown
                } else {
                    of_ttype(&ret)
                }
            }
            TExpr::Binary { lhs, rhs, .. } => {
                self.expr(lhs, st, false);
                self.expr(rhs, st, false);
                Ty::Plain(TType::Int)
            }
            TExpr::Not(x) | TExpr::Neg(x) => {
                self.expr(x, st, false);
                Ty::Plain(TType::Int)
            }
            TExpr::Cast { expr, ty } => {
                self.expr(expr, st, false);
                of_ttype(ty)
            }
            TExpr::Tuple(items) => {
                let ts: Vec<TType> = items
                    .iter()
                    .map(|i| match self.expr(i, st, true) {
                        Ty::Plain(t) => t,
                        _ => TType::Unit,
                    })
                    .collect();
                Ty::Plain(TType::Tuple(ts))
            }
            TExpr::Block { stmts, tail } => {
                self.block(stmts, st);
                self.expr(tail, st, moving)
            }
        }
    }

    fn builtin(&mut self, f: &Builtin, args: &[TExpr], st: &mut MoveState) -> Ty {
        let ts: Vec<Ty> = args.iter().map(|a| self.expr(a, st, true)).collect();
        let first = ts.into_iter().next().unwrap_or(Ty::Unknown);
        match f {
            Builtin::Drop => Ty::Plain(TType::Unit),
            Builtin::Some => match first {
                Ty::Stream { shape, nullable: false, result: false } => Ty::Stream { shape, nullable: true, result: false },
                Ty::Boxed(inner) => Ty::Stream { shape: Shape::OwnedDyn(inner.provides()), nullable: true, result: false },
                Ty::Unknown => Ty::Unknown,
                t => {
                    self.diag(TypeErrorKind::CategoryMismatch, format!("Some of {t:?}"));
                    Ty::Unknown
                }
            },
            Builtin::BoxNew => match first {
                Ty::Stream { shape, nullable: false, result: false } => Ty::Boxed(shape),
                _ => Ty::Unknown,
            },
            Builtin::BoxIntoRaw => match first {
                Ty::Boxed(inner) => stream(pointer_to(inner)),
                Ty::Stream { shape: Shape::OwnedDyn(b), nullable: false, .. } => stream(Shape::PtrDyn(b)),
                _ => Ty::Unknown,
            },
            Builtin::BufReaderNew | Builtin::BufWriterNew => {
                let reader = matches!(f, Builtin::BufReaderNew);
                match first {
                    Ty::Stream { shape: Shape::OwnedBase(BaseType::FileT), nullable: false, result: false } => {
                        stream(Shape::OwnedBase(if reader { BaseType::BufReaderFile } else { BaseType::BufWriterFile }))
                    }
                    Ty::Unknown => Ty::Unknown,
                    t => {
                        self.diag(TypeErrorKind::CategoryMismatch, format!("buffering a non-file {t:?}"));
                        Ty::Unknown
                    }
                }
            }
            Builtin::Std(s) => stream(Shape::OwnedBase(match s {
                crate::frontend::ast::StdStream::Stdin => BaseType::StdinT,
                crate::frontend::ast::StdStream::Stdout => BaseType::StdoutT,
                crate::frontend::ast::StdStream::Stderr => BaseType::StderrT,
            })),
            Builtin::Open(_) => Ty::Stream { shape: Shape::OwnedBase(BaseType::FileT), nullable: false, result: true },
            Builtin::Spawn(_) => Ty::Stream { shape: Shape::OwnedBase(BaseType::ChildT), nullable: false, result: true },
            Builtin::NewRecord(n) => Ty::Plain(TType::RecordPtr(n.clone())),
        }
    }
}
