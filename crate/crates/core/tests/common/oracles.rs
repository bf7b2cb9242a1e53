//! Independent reference implementations the library is checked against.

use std::collections::{BTreeMap, BTreeSet};
use streamlift::api::{self, ApiRole};
use streamlift::frontend::ast::StdStream;
use streamlift::ir::{Arg, Callee, Instr, Value};
use streamlift::sets::{Capability, Origin};
use streamlift::transform::types::{BaseType, Bound, Shape, Trait};
use streamlift::{CapSet, Constraint, Facts, IrProgram, Label, LibFn, Location, OriginSet, SymbolTable};

/// Round-robin Kleene iteration: apply every constraint until nothing changes.
pub fn naive_solve(cs: &[Constraint]) -> BTreeMap<Location, Facts> {
    let mut m: BTreeMap<Location, Facts> = BTreeMap::new();
    loop {
        let mut changed = false;
        for c in cs {
            match *c {
                Constraint::Member(l, o) => {
                    let f = m.entry(l).or_default();
                    if !f.origins.contains(o) {
                        f.origins.insert(o);
                        changed = true;
                    }
                }
                Constraint::Require(l, k) => {
                    let f = m.entry(l).or_default();
                    if !f.caps.contains(k) {
                        f.caps.insert(k);
                        changed = true;
                    }
                }
                Constraint::OriginFlow { from, to } => {
                    let src = m.get(&from).map(|f| f.origins).unwrap_or_default();
                    let dst = m.entry(to).or_default();
                    let joined = dst.origins.union(src);
                    if joined != dst.origins {
                        dst.origins = joined;
                        changed = true;
                    }
                }
                Constraint::CapFlow { from, to } => {
                    let src = m.get(&from).map(|f| f.caps).unwrap_or_default();
                    let dst = m.entry(to).or_default();
                    let joined = dst.caps.union(src);
                    if joined != dst.caps {
                        dst.caps = joined;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    m.retain(|_, f| !f.origins.is_empty() || !f.caps.is_empty());
    m
}

fn bound(caps: CapSet) -> Bound {
    let mut ts = Vec::new();
    if caps.contains(Capability::BufRead) {
        ts.push(Trait::BufRead);
    } else if caps.contains(Capability::Read) {
        ts.push(Trait::Read);
    }
    if caps.contains(Capability::Write) {
        ts.push(Trait::Write);
    }
    if caps.contains(Capability::Seek) {
        ts.push(Trait::Seek);
    }
    Bound::of(&ts)
}

/// The type decision written out as a table of cases.
pub fn decision_table(origins: OriginSet, caps: CapSet, is_param: bool) -> Shape {
    let close = caps.contains(Capability::Close);
    let reads = caps.contains(Capability::Read) || caps.contains(Capability::BufRead);
    let writes = caps.contains(Capability::Write);
    if is_param {
        return Shape::GenericParam(bound(caps));
    }
    let single: Vec<Origin> = origins.iter().collect();
    let base = match single.as_slice() {
        [Origin::Stdin] => BaseType::StdinT,
        [Origin::Stdout] => BaseType::StdoutT,
        [Origin::Stderr] => BaseType::StderrT,
        [Origin::Pipe] => BaseType::ChildT,
        [Origin::File] if !writes => BaseType::BufReaderFile,
        [Origin::File] if !reads => BaseType::BufWriterFile,
        [Origin::File] => BaseType::FileT,
        _ if close => return Shape::OwnedDyn(bound(caps)),
        _ => return Shape::PtrDyn(bound(caps)),
    };
    if close {
        Shape::OwnedBase(base)
    } else {
        Shape::PtrBase(base)
    }
}

/// What the backward search tracks: a location, or a standard stream however it is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Tracked {
    Loc(Location),
    Std(StdStream),
}

fn std_temps(ir: &IrProgram) -> BTreeMap<Location, StdStream> {
    ir.labels()
        .filter_map(|(_, i)| match i {
            Instr::Assign { lhs: lhs @ Location::Anon(..), rhs: Value::Std(s), .. } => Some((*lhs, *s)),
            _ => None,
        })
        .collect()
}

/// Error sources by explicit enumeration of backward paths.
///
/// Each path is a sequence of (tracked stream, label) steps that never repeats a step. A path
/// ends at a failing operation on the tracked stream, at a function entry, or at the
/// definition of the tracked stream. `None` means the search failed. `budget` bounds the
/// number of path steps explored.
pub fn enumerate_sources(ir: &IrProgram, st: &SymbolTable, l0: Label, budget: &mut u64) -> Option<BTreeSet<Label>> {
    let temps = std_temps(ir);
    search(ir, st, &temps, l0, 0, &BTreeSet::new(), budget)
}

fn search(
    ir: &IrProgram,
    st: &SymbolTable,
    temps: &BTreeMap<Location, StdStream>,
    l0: Label,
    arg: usize,
    visited_sites: &BTreeSet<Label>,
    budget: &mut u64,
) -> Option<BTreeSet<Label>> {
    let key = |l: Location| temps.get(&l).map_or(Tracked::Loc(l), |s| Tracked::Std(*s));
    let Instr::Call { args, .. } = ir.instr(l0) else { return Some(BTreeSet::new()) };
    let Some(Arg::Stream(x0)) = args.get(arg).copied() else { return Some(BTreeSet::new()) };
    let mut sources = BTreeSet::new();
    let mut failed = false;
    let mut path = Vec::new();
    walk(ir, st, &key, (key(x0), l0), &mut path, &mut sources, &mut failed, budget);
    if failed {
        return None;
    }
    let f = l0.func;
    let fi = st.func(f);
    if let (true, Location::Local(g, i)) = (sources.is_empty(), x0) {
        if g == f && (i as usize) < fi.nparams && !fi.address_taken {
            let mut vs = visited_sites.clone();
            vs.insert(l0);
            for &site in ir.call_sites(f).expect("function") {
                if vs.contains(&site) {
                    continue;
                }
                let sub = search(ir, st, temps, site, i as usize, &vs, budget)?;
                if sub.is_empty() {
                    return None;
                }
                sources.extend(sub);
            }
        }
    }
    Some(sources)
}

#[allow(clippy::too_many_arguments)]
fn walk(
    ir: &IrProgram,
    st: &SymbolTable,
    key: &dyn Fn(Location) -> Tracked,
    step: (Tracked, Label),
    path: &mut Vec<(Tracked, Label)>,
    sources: &mut BTreeSet<Label>,
    failed: &mut bool,
    budget: &mut u64,
) {
    if *failed || path.contains(&step) {
        return;
    }
    *budget = budget.saturating_sub(1);
    if *budget == 0 {
        return;
    }
    let (x, l) = step;
    let shared = match x {
        Tracked::Std(_) => true,
        Tracked::Loc(loc) => matches!(loc, Location::Global(_) | Location::Field(..)),
    };
    let mut nexts: Vec<Tracked> = vec![x];
    let mut branches: Vec<(Tracked, Label)> = Vec::new();
    match ir.instr(l) {
        Instr::Call { callee, args, result, .. } => {
            let on_x: Vec<usize> = (0..args.len()).filter(|&i| matches!(args[i], Arg::Stream(y) if key(y) == x)).collect();
            if let Callee::User(g) = callee {
                if (shared || !on_x.is_empty()) && st.func(*g).address_taken {
                    *failed = true;
                    return;
                }
                if shared {
                    branches.push((x, ir.exit_label(*g)));
                }
                for &i in on_x.iter().filter(|&&i| i < st.func(*g).nparams) {
                    branches.push((Tracked::Loc(Location::Local(*g, i as u32)), ir.exit_label(*g)));
                }
            }
            if !on_x.is_empty() {
                match callee {
                    Callee::Lib(LibFn::Api(f)) => {
                        let spec = api::spec(*f);
                        if spec.failable && spec.stream_arg.is_some_and(|i| on_x.contains(&i)) {
                            sources.insert(l);
                            return;
                        }
                    }
                    Callee::Indirect { .. } => {
                        *failed = true;
                        return;
                    }
                    _ => {}
                }
            }
            if result.is_some_and(|r| Tracked::Loc(r) == x) {
                if let Callee::Lib(LibFn::Api(f)) = callee {
                    let spec = api::spec(*f);
                    if matches!(spec.role, ApiRole::Ctor(_)) && spec.failable {
                        sources.insert(l);
                    }
                }
                nexts.clear();
            }
        }
        Instr::Assign { lhs, rhs, .. } if Tracked::Loc(*lhs) == x => {
            nexts = match rhs {
                Value::Loc(y) => vec![key(*y)],
                Value::Std(s) => vec![Tracked::Std(*s)],
                _ => vec![],
            };
        }
        _ => {}
    }
    path.push(step);
    for b in branches {
        walk(ir, st, key, b, path, sources, failed, budget);
    }
    for nx in nexts {
        for p in ir.predecessors(l).expect("label") {
            walk(ir, st, key, (nx, p), path, sources, failed, budget);
        }
    }
    path.pop();
}
