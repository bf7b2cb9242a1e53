//! Unsupported-location classification and class-wide propagation.

use crate::api::{self, ApiFn, ExtraFn, LibFn};
use crate::errsrc::{SourceMap, SourceResult};
use crate::frontend::ast::{visit_block_exprs, BinOp, ExprKind, Program};
use crate::frontend::SymbolTable;
use crate::ir::{Arg, Callee, Instr, IrProgram, Value};
use crate::loc::Location;
use crate::sets::{origin_provides, Capability};
use crate::streamsets::{Constraint, StreamFacts};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Reason {
    Setbuf,
    Ungetc,
    Freopen,
    ImproperCapabilities,
    CyclicCloseCapability,
    Comparison,
    Casts,
    Variadic,
    ApiFunctionAsPointer,
    ErrorSourcesUnfound,
    NonPosix,
}

impl Reason {
    pub const ALL: [Reason; 11] = [
        Reason::Setbuf,
        Reason::Ungetc,
        Reason::Freopen,
        Reason::ImproperCapabilities,
        Reason::CyclicCloseCapability,
        Reason::Comparison,
        Reason::Casts,
        Reason::Variadic,
        Reason::ApiFunctionAsPointer,
        Reason::ErrorSourcesUnfound,
        Reason::NonPosix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Reason::Setbuf => "setbuf",
            Reason::Ungetc => "ungetc",
            Reason::Freopen => "freopen",
            Reason::ImproperCapabilities => "improper_capabilities",
            Reason::CyclicCloseCapability => "cyclic_close_capability",
            Reason::Comparison => "comparison",
            Reason::Casts => "casts",
            Reason::Variadic => "variadic",
            Reason::ApiFunctionAsPointer => "api_function_as_pointer",
            Reason::ErrorSourcesUnfound => "error_sources_unfound",
            Reason::NonPosix => "non_posix",
        }
    }
}

pub type Seeds = BTreeMap<Location, BTreeSet<Reason>>;

/// Assignment pairs `(lhs, rhs)`, including parameter and return bindings.
pub fn assignment_pairs(cs: &[Constraint]) -> Vec<(Location, Location)> {
    cs.iter()
        .filter_map(|c| match *c {
            Constraint::OriginFlow { from, to } => Some((to, from)),
            _ => None,
        })
        .collect()
}

pub fn detect_seed_reasons(
    prog: &Program,
    st: &SymbolTable,
    ir: &IrProgram,
    cs: &[Constraint],
    facts: &StreamFacts,
    sources: &SourceMap,
) -> Seeds {
    let mut seeds: Seeds = BTreeMap::new();
    let mut seed = |l: Location, r: Reason| {
        seeds.entry(l).or_default().insert(r);
    };
    let lib_value_used = !st.lib_as_value.is_empty();
    let mut cast_nodes: HashMap<crate::frontend::ast::NodeId, Location> = HashMap::new();
    for (_, ins) in ir.labels() {
        match ins {
            Instr::Call { callee, result, .. } => {
                let streams: Vec<(usize, Location)> = ins.call_stream_args();
                match callee {
                    Callee::Lib(LibFn::Extra(e)) => {
                        let r = match e {
                            ExtraFn::Setbuf | ExtraFn::Setvbuf => Reason::Setbuf,
                            ExtraFn::Ungetc => Reason::Ungetc,
                            ExtraFn::Freopen => Reason::Freopen,
                            ExtraFn::NonPosix(_) => Reason::NonPosix,
                        };
                        for (_, l) in &streams {
                            seed(*l, r);
                        }
                        if let Some(res) = result {
                            seed(*res, r);
                        }
                    }
                    Callee::Lib(LibFn::Api(f)) => {
                        let spec = api::spec(*f);
                        if spec.variadic {
                            for (i, l) in &streams {
                                if *i >= spec.params.len() {
                                    seed(*l, Reason::Variadic);
                                }
                            }
                        }
                    }
                    Callee::Indirect { .. } if lib_value_used => {
                        for (_, l) in &streams {
                            seed(*l, Reason::ApiFunctionAsPointer);
                        }
                        if let Some(res) = result {
                            seed(*res, Reason::ApiFunctionAsPointer);
                        }
                    }
                    _ => {}
                }
            }
            Instr::Assign { node, lhs, rhs: Value::Opaque } => {
                cast_nodes.insert(*node, *lhs);
            }
            _ => {}
        }
    }
    for f in &prog.functions {
        visit_block_exprs(&f.body, &mut |e| match &e.kind {
            ExprKind::Binary { op: BinOp::Eq | BinOp::Ne, lhs, rhs } => {
                let both = [lhs, rhs].iter().all(|x| st.is_stream_expr(x) && !matches!(x.kind, ExprKind::Null));
                if both {
                    for x in [lhs, rhs] {
                        if let Some(l) = x.as_path().and_then(|p| st.path_location(p)) {
                            seed(l, Reason::Comparison);
                        }
                    }
                }
            }
            ExprKind::Cast { ty, operand } => {
                if st.is_stream_expr(operand) && !ty.is_stream() {
                    if let Some(l) = operand.as_path().and_then(|p| st.path_location(p)) {
                        seed(l, Reason::Casts);
                    }
                } else if ty.is_stream() && !st.is_stream_expr(operand) {
                    if let Some(l) = cast_nodes.get(&e.id) {
                        seed(*l, Reason::Casts);
                    }
                }
            }
            _ => {}
        });
    }
    for c in sources.checks.values() {
        if c.result == SourceResult::Failed {
            seed(c.var, Reason::ErrorSourcesUnfound);
        }
    }
    for (l, f) in &facts.map {
        if f.origins.iter().any(|o| !f.caps.is_subset(origin_provides(o))) {
            seed(*l, Reason::ImproperCapabilities);
        }
    }
    for comp in cyclic_components(cs) {
        if comp.iter().any(|l| facts.caps(*l).contains(Capability::Close)) {
            for l in comp {
                seed(l, Reason::CyclicCloseCapability);
            }
        }
    }
    seeds
}

/// Strongly connected components of the cap-flow graph with at least two members or a self-loop.
pub fn cyclic_components(cs: &[Constraint]) -> Vec<Vec<Location>> {
    let mut ids: BTreeMap<Location, usize> = BTreeMap::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for c in cs {
        if let Constraint::CapFlow { from, to } = *c {
            let n = ids.len();
            let a = *ids.entry(from).or_insert(n);
            let n = ids.len();
            let b = *ids.entry(to).or_insert(n);
            edges.push((a, b));
        }
    }
    let n = ids.len();
    let mut adj = vec![Vec::new(); n];
    let mut self_loop = vec![false; n];
    for &(a, b) in &edges {
        adj[a].push(b);
        if a == b {
            self_loop[a] = true;
        }
    }
    let locs: Vec<Location> = {
        let mut v = vec![Location::Global(0); n];
        for (l, i) in &ids {
            v[*i] = *l;
        }
        v
    };
    tarjan(&adj)
        .into_iter()
        .filter(|c| c.len() >= 2 || self_loop[c[0]])
        .map(|c| {
            let mut v: Vec<Location> = c.into_iter().map(|i| locs[i]).collect();
            v.sort();
            v
        })
        .collect()
}

/// Iterative Tarjan SCC.
fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut ei)) = call.last_mut() {
            if *ei < adj[v].len() {
                let w = adj[v][*ei];
                *ei += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("scc stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    out.push(comp);
                }
            }
        }
    }
    out
}

/// Union-find with path compression and union by rank. Counts pointer hops.
#[derive(Debug, Clone, Default)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    pub steps: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), rank: vec![0; n], steps: 0 }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
            self.steps += 1;
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SupportVerdict {
    /// Reasons of unsupported locations; `true` marks a directly triggered reason.
    pub reasons: BTreeMap<Location, BTreeMap<Reason, bool>>,
    /// Class representative index for every location seen in the assignment graph or seeds.
    pub class_of: BTreeMap<Location, usize>,
    pub uf_steps: usize,
}

impl SupportVerdict {
    pub fn is_supported(&self, l: Location) -> bool {
        !self.reasons.contains_key(&l)
    }

    pub fn reasons_of(&self, l: Location) -> BTreeSet<Reason> {
        self.reasons.get(&l).map(|m| m.keys().copied().collect()).unwrap_or_default()
    }

    /// Locations with the same class, or only itself when never assigned.
    pub fn class(&self, l: Location) -> Option<usize> {
        self.class_of.get(&l).copied()
    }

    pub fn seeds(&self) -> Seeds {
        let mut out = Seeds::new();
        for (l, rs) in &self.reasons {
            for (r, s) in rs {
                if *s {
                    out.entry(*l).or_default().insert(*r);
                }
            }
        }
        out
    }
}

pub fn propagate_unsupported(pairs: &[(Location, Location)], seeds: &Seeds, extra: &[Location]) -> SupportVerdict {
    let mut ids: BTreeMap<Location, usize> = BTreeMap::new();
    let all = pairs.iter().flat_map(|(a, b)| [*a, *b]).chain(seeds.keys().copied()).chain(extra.iter().copied());
    for l in all {
        let n = ids.len();
        ids.entry(l).or_insert(n);
    }
    let mut uf = UnionFind::new(ids.len());
    for (a, b) in pairs {
        uf.union(ids[a], ids[b]);
    }
    let mut class_reasons: HashMap<usize, BTreeSet<Reason>> = HashMap::new();
    for (l, rs) in seeds {
        let root = uf.find(ids[l]);
        class_reasons.entry(root).or_default().extend(rs.iter().copied());
    }
    let mut reasons = BTreeMap::new();
    let mut class_of = BTreeMap::new();
    for (l, i) in &ids {
        let root = uf.find(*i);
        class_of.insert(*l, root);
        if let Some(rs) = class_reasons.get(&root) {
            let own = seeds.get(l);
            let m: BTreeMap<Reason, bool> = rs.iter().map(|r| (*r, own.is_some_and(|o| o.contains(r)))).collect();
            reasons.insert(*l, m);
        }
    }
    SupportVerdict { reasons, class_of, uf_steps: uf.steps }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ReasonCount {
    pub affected: usize,
    pub unique: usize,
}

/// The location an API call operates on: its stream argument, or the slot a constructor fills.
pub fn api_call_location(ins: &Instr) -> Option<(ApiFn, Option<Location>)> {
    let Instr::Call { callee: Callee::Lib(LibFn::Api(f)), args, result, .. } = ins else { return None };
    let spec = api::spec(*f);
    let loc = match spec.stream_arg {
        Some(i) => match args.get(i) {
            Some(Arg::Stream(l)) => Some(*l),
            _ => None,
        },
        None => *result,
    };
    Some((*f, loc))
}

/// Per-reason counts over API calls left on unsupported locations.
pub fn reason_histogram(ir: &IrProgram, v: &SupportVerdict) -> BTreeMap<Reason, ReasonCount> {
    let mut h: BTreeMap<Reason, ReasonCount> = Reason::ALL.iter().map(|r| (*r, ReasonCount::default())).collect();
    for (_, ins) in ir.labels() {
        let Some((_, Some(l))) = api_call_location(ins) else { continue };
        let rs = v.reasons_of(l);
        for r in &rs {
            let c = h.get_mut(r).expect("all reasons present");
            c.affected += 1;
            if rs.len() == 1 {
                c.unique += 1;
            }
        }
    }
    h
}

pub fn histogram_json(h: &BTreeMap<Reason, ReasonCount>) -> serde_json::Value {
    let mut m = serde_json::Map::new();
    for (r, c) in h {
        m.insert(r.name().to_string(), serde_json::to_value(c).expect("counts serialize"));
    }
    serde_json::Value::Object(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(i: u32) -> Location {
        Location::Global(i)
    }

    #[test]
    fn propagation_reaches_both_sides() {
        let pairs = vec![(g(0), g(1)), (g(0), g(2))];
        let mut seeds = Seeds::new();
        seeds.insert(g(1), [Reason::Setbuf].into());
        let v = propagate_unsupported(&pairs, &seeds, &[]);
        for i in 0..3 {
            assert!(!v.is_supported(g(i)));
        }
        assert!(v.reasons[&g(1)][&Reason::Setbuf]);
        assert!(!v.reasons[&g(2)][&Reason::Setbuf]);
    }

    #[test]
    fn no_seeds_all_supported() {
        let v = propagate_unsupported(&[(g(0), g(1))], &Seeds::new(), &[]);
        assert!(v.reasons.is_empty());
    }

    #[test]
    fn rerun_is_identity() {
        let pairs = vec![(g(0), g(1)), (g(3), g(2))];
        let mut seeds = Seeds::new();
        seeds.insert(g(2), [Reason::Casts, Reason::Comparison].into());
        let v1 = propagate_unsupported(&pairs, &seeds, &[]);
        let v2 = propagate_unsupported(&pairs, &v1.seeds(), &[]);
        assert_eq!(v1.reasons, v2.reasons);
    }

    #[test]
    fn cycle_detection() {
        let cs = vec![
            Constraint::CapFlow { from: g(0), to: g(1) },
            Constraint::CapFlow { from: g(1), to: g(0) },
            Constraint::CapFlow { from: g(2), to: g(3) },
            Constraint::CapFlow { from: g(4), to: g(4) },
        ];
        let comps = cyclic_components(&cs);
        assert_eq!(comps, vec![vec![g(0), g(1)], vec![g(4)]]);
    }
}
