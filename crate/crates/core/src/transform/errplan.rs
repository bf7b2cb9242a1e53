//! Where error flags live and how they travel between functions.

use super::decide::{ClassId, Classes};
use crate::api::{self, ApiRole, LibFn};
use crate::errsrc::{SourceMap, SourceResult};
use crate::frontend::ast::StdStream;
use crate::ir::{Arg, Callee, Instr, IrProgram, Label, Value};
use crate::loc::{FuncId, Location};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ErrPlan {
    /// Functions that hold a flag variable for a class.
    pub need: BTreeSet<(FuncId, ClassId)>,
    /// Classes whose flags a function receives from its callers.
    pub params: BTreeMap<FuncId, BTreeSet<ClassId>>,
    /// Classes whose flags a function hands back with its result.
    pub widen: BTreeMap<FuncId, BTreeSet<ClassId>>,
    /// Source operations that record failures.
    pub instrument: BTreeSet<Label>,
    /// Classes sharing one flag because they name the same standard stream.
    canon: BTreeMap<ClassId, ClassId>,
}

impl ErrPlan {
    /// Flag class of a location.
    pub fn class_of(&self, classes: &Classes, l: Location) -> ClassId {
        let k = classes.of(l);
        self.canon.get(&k).copied().unwrap_or(k)
    }

    pub fn has_param(&self, f: FuncId, k: ClassId) -> bool {
        self.params.get(&f).is_some_and(|s| s.contains(&k))
    }

    pub fn params_of(&self, f: FuncId) -> Vec<ClassId> {
        self.params.get(&f).map(|s| s.iter().copied().collect()).unwrap_or_default()
    }

    pub fn widened(&self, f: FuncId) -> Vec<ClassId> {
        self.widen.get(&f).map(|s| s.iter().copied().collect()).unwrap_or_default()
    }

    pub fn classes_in(&self, f: FuncId) -> Vec<ClassId> {
        self.need.range((f, 0)..=(f, ClassId::MAX)).map(|(_, k)| *k).collect()
    }
}

fn user_callee(ir: &IrProgram, l: Label) -> Option<FuncId> {
    match ir.instr(l) {
        Instr::Call { callee: Callee::User(g), .. } => Some(*g),
        _ => None,
    }
}

/// Stream location an API operation works on, if it is not a constructor.
pub fn op_stream(ins: &Instr) -> Option<Location> {
    let Instr::Call { callee: Callee::Lib(LibFn::Api(f)), args, .. } = ins else { return None };
    let spec = api::spec(*f);
    if matches!(spec.role, ApiRole::Ctor(_)) {
        return None;
    }
    match spec.stream_arg.and_then(|i| args.get(i)) {
        Some(Arg::Stream(l)) => Some(*l),
        _ => None,
    }
}

/// Classes holding the same standard stream share one flag; maps each merged class to its representative.
fn std_canon(ir: &IrProgram, classes: &Classes) -> BTreeMap<ClassId, ClassId> {
    let mut parent: BTreeMap<ClassId, ClassId> = BTreeMap::new();
    fn find(parent: &BTreeMap<ClassId, ClassId>, mut k: ClassId) -> ClassId {
        while let Some(&p) = parent.get(&k) {
            k = p;
        }
        k
    }
    let mut rep: BTreeMap<StdStream, ClassId> = BTreeMap::new();
    for (_, ins) in ir.labels() {
        if let Instr::Assign { lhs: lhs @ Location::Anon(..), rhs: Value::Std(s), .. } = ins {
            let k = find(&parent, classes.of(*lhs));
            let r = find(&parent, *rep.entry(*s).or_insert(k));
            if k != r {
                parent.insert(k.max(r), k.min(r));
            }
        }
    }
    parent.keys().map(|&k| (k, find(&parent, k))).collect()
}

pub fn plan(ir: &IrProgram, sources: &SourceMap, classes: &Classes, supported: impl Fn(Location) -> bool) -> ErrPlan {
    let mut p = ErrPlan { canon: std_canon(ir, classes), ..ErrPlan::default() };
    for c in sources.checks.values() {
        let SourceResult::Found(srcs) = &c.result else { continue };
        if !supported(c.var) {
            continue;
        }
        let k = p.class_of(classes, c.var);
        p.need.insert((c.check.func, k));
        for s in srcs {
            if let Some(l) = op_stream(ir.instr(*s)) {
                p.instrument.insert(*s);
                p.need.insert((s.func, p.class_of(classes, l)));
            }
        }
        for d in &c.descents {
            if let Some(g) = user_callee(ir, *d) {
                p.widen.entry(g).or_default().insert(k);
                p.need.insert((d.func, k));
            }
        }
        for a in &c.ascents {
            if let Some(h) = user_callee(ir, *a) {
                p.params.entry(h).or_default().insert(k);
                p.need.insert((a.func, k));
            }
        }
    }
    for (f, ks) in &p.params {
        for k in ks {
            p.need.insert((*f, *k));
        }
    }
    let mut callers = Vec::new();
    for (caller, _, callee) in &ir.call_edges {
        for k in p.params_of(*callee) {
            callers.push((*caller, k));
        }
    }
    p.need.extend(callers);
    p
}
