//! Per-location target types: the type decision plus the adjustments that keep
//! every assignment inside a legal coercion.

use super::types::{bound_of, coerce_rvalue, decide_shape, BaseType, Shape, TargetType};
use crate::api::{self, ApiRole, LibFn};
use crate::frontend::ast::{visit_block_exprs, Expr, ExprKind, Program, Stmt, StmtKind, UnOp};
use crate::frontend::SymbolTable;
use crate::ir::{Arg, Callee, Instr, IrProgram, Value};
use crate::loc::Location;
use crate::sets::Capability;
use crate::streamsets::{Constraint, StreamFacts};
use crate::support::SupportVerdict;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

pub type ClassId = usize;

/// Assignment-connected classes of locations.
#[derive(Debug, Clone, Default)]
pub struct Classes {
    map: BTreeMap<Location, ClassId>,
}

impl Classes {
    pub fn new(v: &SupportVerdict, universe: impl IntoIterator<Item = Location>) -> Self {
        let mut map = v.class_of.clone();
        let mut next = map.values().max().map_or(0, |m| m + 1);
        for l in universe {
            map.entry(l).or_insert_with(|| {
                next += 1;
                next - 1
            });
        }
        Classes { map }
    }

    pub fn of(&self, l: Location) -> ClassId {
        // Locations outside the universe never share a class with anything.
        self.map.get(&l).copied().unwrap_or(usize::MAX)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Layout {
    /// Types of supported locations (temporaries excluded).
    pub types: BTreeMap<Location, TargetType>,
    pub classes: Classes,
    pub nullable: BTreeSet<ClassId>,
}

impl Layout {
    pub fn get(&self, l: Location) -> Option<TargetType> {
        self.types.get(&l).copied()
    }

    pub fn dyn_count(&self) -> usize {
        self.types.values().filter(|t| t.shape.is_dyn()).count()
    }
}

pub fn is_param(st: &SymbolTable, l: Location) -> bool {
    match l {
        Location::Local(f, i) => {
            let info = st.func(f);
            (i as usize) < info.nparams && !info.address_taken
        }
        _ => false,
    }
}

fn is_taken_param(st: &SymbolTable, l: Location) -> bool {
    match l {
        Location::Local(f, i) => {
            let info = st.func(f);
            (i as usize) < info.nparams && info.address_taken
        }
        _ => false,
    }
}

/// A bare stream path used as a truth value or compared with NULL.
fn null_tested(st: &SymbolTable, e: &Expr) -> Option<Location> {
    match &e.kind {
        ExprKind::Path(p) => st.path_location(p).filter(|l| st.location_type(*l).is_stream()),
        _ => None,
    }
}

fn collect_null_tests(prog: &Program, st: &SymbolTable) -> Vec<Location> {
    let mut out = Vec::new();
    let mut visit = |e: &Expr| match &e.kind {
        ExprKind::Binary { op, lhs, rhs } if op.is_equality() => {
            let (l, r) = (&**lhs, &**rhs);
            let null = |x: &Expr| matches!(x.kind, ExprKind::Null);
            if null(r) {
                out.extend(null_tested(st, l));
            } else if null(l) {
                out.extend(null_tested(st, r));
            }
        }
        ExprKind::Unary { op: UnOp::Not, operand } => out.extend(null_tested(st, operand)),
        _ => {}
    };
    fn conds<'a>(b: &'a [Stmt], out: &mut Vec<&'a Expr>) {
        for s in b {
            match &s.kind {
                StmtKind::If { cond, then, els } => {
                    out.push(cond);
                    conds(then, out);
                    if let Some(b) = els {
                        conds(b, out);
                    }
                }
                StmtKind::While { cond, body } => {
                    out.push(cond);
                    conds(body, out);
                }
                _ => {}
            }
        }
    }
    for f in &prog.functions {
        visit_block_exprs(&f.body, &mut visit);
    }
    for f in &prog.functions {
        let mut cs = Vec::new();
        conds(&f.body, &mut cs);
        for c in cs {
            out.extend(null_tested(st, c));
        }
    }
    out
}

/// Locations that may hold NULL: assigned or passed NULL, compared with it, or
/// globals without a stream initializer.
fn nullable_locations(prog: &Program, st: &SymbolTable, ir: &IrProgram) -> Vec<Location> {
    let mut out = collect_null_tests(prog, st);
    for (gi, g) in st.globals.iter().enumerate() {
        if g.ty.is_stream() {
            let l = Location::Global(gi as u32);
            if !ir.global_inits.iter().any(|(x, v)| *x == l && matches!(v, Value::Std(_))) {
                out.push(l);
            }
        }
    }
    for (_, ins) in ir.labels() {
        match ins {
            Instr::Assign { lhs, rhs: Value::Null, .. } => out.push(*lhs),
            Instr::Call { callee, args, .. } => {
                let targets: Vec<_> = match callee {
                    Callee::User(g) => vec![*g],
                    Callee::Indirect { targets, .. } => targets.clone(),
                    Callee::Lib(_) => vec![],
                };
                for (i, a) in args.iter().enumerate() {
                    if *a == Arg::Null {
                        for g in &targets {
                            if i < st.func(*g).nparams {
                                out.push(Location::Local(*g, i as u32));
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Locations that directly receive a freshly created or standard stream.
fn value_sources(ir: &IrProgram) -> BTreeSet<Location> {
    let mut out: BTreeSet<Location> =
        ir.global_inits.iter().filter(|(_, v)| matches!(v, Value::Std(_))).map(|(l, _)| *l).collect();
    for (_, ins) in ir.labels() {
        match ins {
            Instr::Assign { lhs, rhs: Value::Std(_), .. } => {
                out.insert(*lhs);
            }
            Instr::Call { callee: Callee::Lib(LibFn::Api(f)), result: Some(r), .. } => {
                if let ApiRole::Ctor(_) = api::spec(*f).role {
                    out.insert(*r);
                }
            }
            _ => {}
        }
    }
    out
}

fn to_dyn(shape: Shape, caps: crate::sets::CapSet) -> Shape {
    if shape.is_dyn() || matches!(shape, Shape::GenericParam(_)) {
        return shape;
    }
    if caps.contains(Capability::Close) {
        Shape::OwnedDyn(bound_of(caps))
    } else {
        Shape::PtrDyn(bound_of(caps))
    }
}

fn with_base(shape: Shape, b: BaseType) -> Shape {
    match shape {
        Shape::OwnedBase(_) => Shape::OwnedBase(b),
        Shape::PtrBase(_) => Shape::PtrBase(b),
        s => s,
    }
}

pub fn layout(
    prog: &Program,
    st: &SymbolTable,
    ir: &IrProgram,
    cs: &[Constraint],
    facts: &StreamFacts,
    verdict: &SupportVerdict,
) -> Layout {
    let mut universe: BTreeSet<Location> = facts.map.keys().copied().collect();
    universe.extend(st.stream_locations());
    let classes = Classes::new(verdict, universe.iter().copied());
    let nullable: BTreeSet<ClassId> = nullable_locations(prog, st, ir).into_iter().map(|l| classes.of(l)).collect();

    let named: Vec<Location> = universe
        .iter()
        .copied()
        .filter(|l| !matches!(l, Location::Anon(..)) && verdict.is_supported(*l))
        .collect();
    let mut shapes: BTreeMap<Location, Shape> = BTreeMap::new();
    for &l in &named {
        let f = facts.get(l);
        let mut s = decide_shape(f.origins, f.caps, is_param(st, l));
        if is_taken_param(st, l) {
            s = to_dyn(s, f.caps);
        }
        shapes.insert(l, s);
    }

    let pairs: Vec<(Location, Location)> = cs
        .iter()
        .filter_map(|c| match *c {
            Constraint::OriginFlow { from, to } => Some((to, from)),
            _ => None,
        })
        .filter(|(to, from)| shapes.contains_key(to) && shapes.contains_key(from))
        .collect();

    // Whatever a generic parameter flows into must be able to hold any implementor.
    let mut succ: BTreeMap<Location, Vec<Location>> = BTreeMap::new();
    for (to, from) in &pairs {
        succ.entry(*from).or_default().push(*to);
    }
    let mut queue: VecDeque<Location> =
        shapes.iter().filter(|(_, s)| matches!(s, Shape::GenericParam(_))).map(|(l, _)| *l).collect();
    let mut seen: BTreeSet<Location> = queue.iter().copied().collect();
    while let Some(l) = queue.pop_front() {
        for &t in succ.get(&l).into_iter().flatten() {
            if seen.insert(t) {
                let s = shapes[&t];
                shapes.insert(t, to_dyn(s, facts.caps(t)));
                queue.push_back(t);
            }
        }
    }

    // Base-typed left values adopt the base of what they receive, or fall back to dyn.
    let sources = value_sources(ir);
    let mut rhs_of: BTreeMap<Location, Vec<Location>> = BTreeMap::new();
    for (to, from) in &pairs {
        rhs_of.entry(*to).or_default().push(*from);
    }
    let limit = 4 * pairs.len() + 8;
    for round in 0.. {
        let mut changed = false;
        for (to, from) in &pairs {
            let (lt, rt) = (shapes[to], shapes[from]);
            let Some(lb) = lt.base() else { continue };
            let fits = match (lt, rt.base()) {
                (_, Some(rb)) if rb == lb => coerce_rvalue(lt, rt).is_ok(),
                (Shape::OwnedBase(_), Some(BaseType::FileT)) => {
                    matches!(rt, Shape::OwnedBase(_)) && matches!(lb, BaseType::BufReaderFile | BaseType::BufWriterFile)
                }
                _ => false,
            };
            if fits {
                continue;
            }
            let rhs_bases: BTreeSet<Option<BaseType>> = rhs_of[to].iter().map(|r| shapes[r].base()).collect();
            let adopt = match (rhs_bases.len(), rhs_bases.iter().next()) {
                (1, Some(Some(b))) if !sources.contains(to) && round < limit => Some(*b),
                _ => None,
            };
            let next = match adopt {
                Some(b) => with_base(lt, b),
                None => to_dyn(lt, facts.caps(*to)),
            };
            if next != lt {
                shapes.insert(*to, next);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let types = shapes
        .into_iter()
        .map(|(l, shape)| (l, TargetType { shape, nullable: nullable.contains(&classes.of(l)) }))
        .collect();
    Layout { types, classes, nullable }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::api::default_nonposix;
    use crate::frontend::load;
    use crate::ir::lower;
    use crate::streamsets::analyze;
    use crate::support::{assignment_pairs, propagate_unsupported};

    fn lay(src: &str) -> (SymbolTable, Layout) {
        let (p, st) = load(src, &default_nonposix()).unwrap();
        let ir = lower(&p, &st);
        let (cs, facts) = analyze(&ir, &st);
        let v = propagate_unsupported(&assignment_pairs(&cs), &Default::default(), &[]);
        let l = layout(&p, &st, &ir, &cs, &facts, &v);
        (st, l)
    }

    fn ty(st: &SymbolTable, l: &Layout, name: &str) -> TargetType {
        let loc = st.stream_locations().into_iter().find(|x| st.location_name(*x) == name).unwrap();
        l.get(loc).unwrap()
    }

    #[test]
    fn param_flow_goes_dyn() {
        let (st, l) = lay("void f(FILE *x) { FILE *y; y = x; fputc('a', y); }");
        assert!(matches!(ty(&st, &l, "f::x").shape, Shape::GenericParam(_)));
        assert!(matches!(ty(&st, &l, "f::y").shape, Shape::PtrDyn(_)));
    }

    #[test]
    fn pointer_adopts_owner_base() {
        let (st, l) = lay(
            "void main() { FILE *x; FILE *y; x = fopen(\"a\", \"r+\"); y = x; fgetc(y); fputc('a', x); fclose(x); }",
        );
        assert_eq!(ty(&st, &l, "main::x").shape, Shape::OwnedBase(BaseType::FileT));
        assert_eq!(ty(&st, &l, "main::y").shape, Shape::PtrBase(BaseType::FileT));
    }

    #[test]
    fn null_comparison_marks_class() {
        let (st, l) = lay("void main() { FILE *x; FILE *y; x = fopen(\"a\", \"r\"); y = x; if (y == NULL) { } fgetc(x); }");
        assert!(ty(&st, &l, "main::x").nullable);
        assert!(ty(&st, &l, "main::y").nullable);
    }
}
