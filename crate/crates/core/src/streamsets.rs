//! Origin and capability sets per location, by inclusion-constraint solving.

use crate::api::{self, ApiRole, ExtraFn, LibFn};
use crate::frontend::ast::StdStream;
use crate::frontend::SymbolTable;
use crate::ir::{Arg, Callee, Instr, IrProgram, Value};
use crate::loc::{FuncId, Location};
use crate::sets::{CapSet, Capability, Origin, OriginSet};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    /// `o ∈ O(l)`
    Member(Location, Origin),
    /// `c ∈ C(l)`
    Require(Location, Capability),
    /// `O(from) ⊆ O(to)`, generated by `to = from`.
    OriginFlow { from: Location, to: Location },
    /// `C(from) ⊆ C(to)`, generated by `from = to`.
    CapFlow { from: Location, to: Location },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Facts {
    pub origins: OriginSet,
    pub caps: CapSet,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StreamFacts {
    pub map: BTreeMap<Location, Facts>,
}

impl StreamFacts {
    pub fn get(&self, l: Location) -> Facts {
        self.map.get(&l).copied().unwrap_or_default()
    }

    pub fn origins(&self, l: Location) -> OriginSet {
        self.get(l).origins
    }

    pub fn caps(&self, l: Location) -> CapSet {
        self.get(l).caps
    }

    /// Drops entries with both sets empty so solutions compare by content.
    pub fn normalized(&self) -> BTreeMap<Location, Facts> {
        self.map.iter().filter(|(_, f)| !f.origins.is_empty() || !f.caps.is_empty()).map(|(l, f)| (*l, *f)).collect()
    }

    /// `{name: {origins, caps}}` over the named stream slots.
    pub fn to_json(&self, st: &SymbolTable) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for l in st.stream_locations() {
            m.insert(st.location_name(l), serde_json::to_value(self.get(l)).expect("facts serialize"));
        }
        serde_json::Value::Object(m)
    }
}

pub fn std_origin(s: StdStream) -> Origin {
    match s {
        StdStream::Stdin => Origin::Stdin,
        StdStream::Stdout => Origin::Stdout,
        StdStream::Stderr => Origin::Stderr,
    }
}

fn assign(out: &mut Vec<Constraint>, to: Location, from: Location) {
    out.push(Constraint::OriginFlow { from, to });
    out.push(Constraint::CapFlow { from: to, to: from });
}

fn bind_call(out: &mut Vec<Constraint>, st: &SymbolTable, g: FuncId, args: &[Arg], result: Option<Location>) {
    let info = st.func(g);
    for (i, a) in args.iter().enumerate() {
        if let (Some(l), true) = (a.stream(), i < info.nparams && info.locals[i].ty.is_stream()) {
            assign(out, Location::Local(g, i as u32), l);
        }
    }
    if let (Some(r), true) = (result, info.ret.is_stream()) {
        assign(out, r, Location::Ret(g));
    }
}

/// Constraints in program order. Parameters and returns behave as assignments.
pub fn collect_constraints(ir: &IrProgram, st: &SymbolTable) -> Vec<Constraint> {
    let mut out = Vec::new();
    for (l, v) in &ir.global_inits {
        if let Value::Std(s) = v {
            out.push(Constraint::Member(*l, std_origin(*s)));
        }
    }
    for (_, ins) in ir.labels() {
        match ins {
            Instr::Assign { lhs, rhs, .. } => match rhs {
                Value::Loc(r) => assign(&mut out, *lhs, *r),
                Value::Std(s) => out.push(Constraint::Member(*lhs, std_origin(*s))),
                Value::Null | Value::Opaque => {}
            },
            Instr::Call { callee, args, result, .. } => match callee {
                Callee::Lib(LibFn::Api(f)) => {
                    let spec = api::spec(*f);
                    if let (ApiRole::Ctor(o), Some(r)) = (spec.role, result) {
                        out.push(Constraint::Member(*r, o));
                    }
                    if let Some(Arg::Stream(l)) = spec.stream_arg.and_then(|i| args.get(i)) {
                        for c in spec.caps.iter() {
                            out.push(Constraint::Require(*l, c));
                        }
                    }
                }
                Callee::Lib(LibFn::Extra(ExtraFn::Freopen)) => {
                    if let Some(r) = result {
                        out.push(Constraint::Member(*r, Origin::File));
                        if let Some(Arg::Stream(l)) = args.get(2) {
                            assign(&mut out, *r, *l);
                        }
                    }
                }
                Callee::Lib(LibFn::Extra(_)) => {}
                Callee::User(g) => bind_call(&mut out, st, *g, args, *result),
                Callee::Indirect { targets, .. } => {
                    for g in targets {
                        bind_call(&mut out, st, *g, args, *result);
                    }
                }
            },
            _ => {}
        }
    }
    out
}

/// Every location mentioned by the constraints or declared with stream type.
pub fn universe(cs: &[Constraint], st: &SymbolTable) -> Vec<Location> {
    let mut all: Vec<Location> = st.stream_locations();
    for c in cs {
        match *c {
            Constraint::Member(l, _) | Constraint::Require(l, _) => all.push(l),
            Constraint::OriginFlow { from, to } | Constraint::CapFlow { from, to } => {
                all.push(from);
                all.push(to);
            }
        }
    }
    all.sort_unstable();
    all.dedup();
    all
}

/// Least solution by worklist propagation along inclusion edges.
pub fn solve(cs: &[Constraint]) -> StreamFacts {
    let mut index: HashMap<Location, usize> = HashMap::new();
    let mut locs = Vec::new();
    let mut id = |l: Location, locs: &mut Vec<Location>| -> usize {
        *index.entry(l).or_insert_with(|| {
            locs.push(l);
            locs.len() - 1
        })
    };
    let mut o_edges: Vec<Vec<usize>> = Vec::new();
    let mut c_edges: Vec<Vec<usize>> = Vec::new();
    let mut origins: Vec<OriginSet> = Vec::new();
    let mut caps: Vec<CapSet> = Vec::new();
    let grow = |n: usize, o: &mut Vec<Vec<usize>>, c: &mut Vec<Vec<usize>>, os: &mut Vec<OriginSet>, cs: &mut Vec<CapSet>| {
        while o.len() < n {
            o.push(Vec::new());
            c.push(Vec::new());
            os.push(OriginSet::empty());
            cs.push(CapSet::empty());
        }
    };
    for c in cs {
        match *c {
            Constraint::Member(l, o) => {
                let i = id(l, &mut locs);
                grow(locs.len(), &mut o_edges, &mut c_edges, &mut origins, &mut caps);
                origins[i].insert(o);
            }
            Constraint::Require(l, k) => {
                let i = id(l, &mut locs);
                grow(locs.len(), &mut o_edges, &mut c_edges, &mut origins, &mut caps);
                caps[i].insert(k);
            }
            Constraint::OriginFlow { from, to } => {
                let (a, b) = (id(from, &mut locs), id(to, &mut locs));
                grow(locs.len(), &mut o_edges, &mut c_edges, &mut origins, &mut caps);
                o_edges[a].push(b);
            }
            Constraint::CapFlow { from, to } => {
                let (a, b) = (id(from, &mut locs), id(to, &mut locs));
                grow(locs.len(), &mut o_edges, &mut c_edges, &mut origins, &mut caps);
                c_edges[a].push(b);
            }
        }
    }
    propagate(&o_edges, &mut origins);
    propagate(&c_edges, &mut caps);
    let map = locs.iter().enumerate().map(|(i, l)| (*l, Facts { origins: origins[i], caps: caps[i] })).collect();
    StreamFacts { map }
}

fn propagate<T: crate::sets::Member>(edges: &[Vec<usize>], sets: &mut [crate::sets::Set<T>]) {
    let mut queued = vec![false; sets.len()];
    let mut work: Vec<usize> = (0..sets.len()).filter(|&i| !sets[i].is_empty()).collect();
    for &i in &work {
        queued[i] = true;
    }
    while let Some(n) = work.pop() {
        queued[n] = false;
        let cur = sets[n];
        for &m in &edges[n] {
            if sets[m].absorb(cur) && !queued[m] {
                queued[m] = true;
                work.push(m);
            }
        }
    }
}

pub fn analyze(ir: &IrProgram, st: &SymbolTable) -> (Vec<Constraint>, StreamFacts) {
    let cs = collect_constraints(ir, st);
    let mut facts = solve(&cs);
    for l in universe(&cs, st) {
        facts.map.entry(l).or_default();
    }
    (cs, facts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::api::default_nonposix;
    use crate::frontend::load;
    use crate::ir::lower;

    fn run(src: &str) -> (SymbolTable, Vec<Constraint>, StreamFacts) {
        let (p, st) = load(src, &default_nonposix()).unwrap();
        let ir = lower(&p, &st);
        let (cs, f) = analyze(&ir, &st);
        (st, cs, f)
    }

    fn loc(st: &SymbolTable, name: &str) -> Location {
        st.stream_locations().into_iter().find(|l| st.location_name(*l) == name).unwrap()
    }

    #[test]
    fn fopen_then_fseek() {
        let (st, cs, _) = run("void main() { FILE *x; x = fopen(\"a\", \"r\"); fseek(x, 0, SEEK_SET); }");
        let x = loc(&st, "main::x");
        assert_eq!(cs, vec![Constraint::Member(x, Origin::File), Constraint::Require(x, Capability::Seek)]);
    }

    #[test]
    fn branch_assignment_generates_both_inclusions() {
        let (st, cs, _) = run("void main(int b) { FILE *x; FILE *z; if (b) { z = x; } }");
        let (x, z) = (loc(&st, "main::x"), loc(&st, "main::z"));
        assert_eq!(cs, vec![Constraint::OriginFlow { from: x, to: z }, Constraint::CapFlow { from: z, to: x }]);
    }

    #[test]
    fn null_assignment_is_silent() {
        let (_, cs, f) = run("void main() { FILE *p; p = NULL; }");
        assert!(cs.is_empty());
        assert!(f.normalized().is_empty());
    }

    #[test]
    fn parameters_and_returns_flow() {
        let (st, _, f) = run(
            "FILE *mk() { return stdin; } void use(FILE *g) { fgetc(g); } void main() { FILE *a; a = mk(); use(a); }",
        );
        let a = loc(&st, "main::a");
        assert_eq!(f.origins(a), OriginSet::of(&[Origin::Stdin]));
        assert_eq!(f.caps(a), CapSet::of(&[Capability::Read]));
        assert_eq!(f.caps(loc(&st, "mk::<ret>")), CapSet::of(&[Capability::Read]));
    }

    #[test]
    fn empty_system() {
        assert!(solve(&[]).map.is_empty());
    }
}
