//! Error source analysis: which API calls can set the indicator a `feof`/`ferror` call reads.

use crate::api::{self, ApiFn, ApiRole, LibFn};
use crate::frontend::ast::StdStream;
use crate::frontend::SymbolTable;
use crate::ir::{Arg, Callee, Instr, IrProgram, Label, Value};
use crate::loc::Location;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceResult {
    Found(BTreeSet<Label>),
    Failed,
}

impl SourceResult {
    pub fn sources(&self) -> Option<&BTreeSet<Label>> {
        match self {
            SourceResult::Found(s) => Some(s),
            SourceResult::Failed => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub check: Label,
    pub var: Location,
    pub result: SourceResult,
    /// User call sites entered on the way to a found source.
    pub descents: BTreeSet<Label>,
    /// Caller call sites searched because the checked stream is a parameter.
    pub ascents: BTreeSet<Label>,
}

#[derive(Debug, Clone, Default)]
pub struct SourceMap {
    pub checks: BTreeMap<Label, CheckResult>,
    /// Distinct labels visited, summed over every search run.
    pub visited_labels: usize,
    pub runs: usize,
}

impl SourceMap {
    pub fn get(&self, check: Label) -> Option<&CheckResult> {
        self.checks.get(&check)
    }

    pub fn to_json(&self, ir: &IrProgram, st: &SymbolTable) -> serde_json::Value {
        let items: Vec<_> = self
            .checks
            .values()
            .map(|c| {
                let (status, sources) = match &c.result {
                    SourceResult::Found(s) => ("found", s.iter().map(|l| ir.label_name(st, *l)).collect::<Vec<_>>()),
                    SourceResult::Failed => ("failed", vec![]),
                };
                serde_json::json!({ "check": ir.label_name(st, c.check), "status": status, "sources": sources })
            })
            .collect();
        serde_json::Value::Array(items)
    }
}

/// A failing operation that sets an indicator on its stream argument.
pub fn is_source_api(f: ApiFn) -> bool {
    api::spec(f).failable
}

/// What the backward search follows: a location, or a standard stream however it is spelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Loc(Location),
    Std(StdStream),
}

impl Key {
    fn is_shared(self) -> bool {
        match self {
            Key::Loc(l) => l.is_shared(),
            Key::Std(_) => true,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Outcome {
    sources: BTreeSet<Label>,
    descents: BTreeSet<Label>,
    ascents: BTreeSet<Label>,
    /// The result depended on skipping an already-visited call site.
    cut: bool,
}

pub struct Analyzer<'a> {
    ir: &'a IrProgram,
    st: &'a SymbolTable,
    /// Argument temporaries holding `stdin`, `stdout` or `stderr`.
    std_temps: HashMap<Location, StdStream>,
    memo: HashMap<(Label, usize), Outcome>,
    pub visited_labels: usize,
    pub runs: usize,
}

impl<'a> Analyzer<'a> {
    pub fn new(ir: &'a IrProgram, st: &'a SymbolTable) -> Self {
        let std_temps = ir
            .labels()
            .filter_map(|(_, i)| match i {
                Instr::Assign { lhs: lhs @ Location::Anon(..), rhs: Value::Std(s), .. } => Some((*lhs, *s)),
                _ => None,
            })
            .collect();
        Analyzer { ir, st, std_temps, memo: HashMap::new(), visited_labels: 0, runs: 0 }
    }

    fn key(&self, l: Location) -> Key {
        match self.std_temps.get(&l) {
            Some(s) => Key::Std(*s),
            None => Key::Loc(l),
        }
    }

    /// Sources for the stream at argument `arg` of the call at `l0`; empty means failure.
    pub fn find_sources(&mut self, l0: Label, arg: usize, visited_call_sites: &BTreeSet<Label>) -> BTreeSet<Label> {
        self.run(l0, arg, visited_call_sites).sources
    }

    fn run(&mut self, l0: Label, arg: usize, visited_call_sites: &BTreeSet<Label>) -> Outcome {
        self.runs += 1;
        let ir = self.ir;
        let Instr::Call { args, .. } = ir.instr(l0) else { return Outcome::default() };
        let Some(Arg::Stream(x0)) = args.get(arg).copied() else { return Outcome::default() };

        let mut out = Outcome::default();
        let start = self.key(x0);
        // call-site chain arena: (parent, site)
        let mut chains: Vec<(usize, Label)> = vec![(usize::MAX, l0)];
        let mut worklist: Vec<(Key, Label, usize)> = vec![(start, l0, 0)];
        let mut visited: HashSet<(Key, Label)> = HashSet::new();
        let mut seen_labels: HashSet<Label> = HashSet::new();
        let record_chain = |chains: &Vec<(usize, Label)>, mut ch: usize, out: &mut BTreeSet<Label>| {
            while ch != 0 {
                out.insert(chains[ch].1);
                ch = chains[ch].0;
            }
        };
        while let Some((x, l, ch)) = worklist.pop() {
            if !visited.insert((x, l)) {
                continue;
            }
            seen_labels.insert(l);
            let mut next_x = Some(x);
            match ir.instr(l) {
                Instr::Call { callee, args, result, .. } => {
                    let positions: Vec<usize> = args
                        .iter()
                        .enumerate()
                        .filter(|(_, a)| matches!(a, Arg::Stream(y) if self.key(*y) == x))
                        .map(|(i, _)| i)
                        .collect();
                    // globals, fields and standard streams are visible to the callee without being passed
                    if let (Callee::User(g), true) = (callee, x.is_shared()) {
                        if self.st.func(*g).address_taken {
                            return Outcome::default();
                        }
                        chains.push((ch, l));
                        worklist.push((x, ir.exit_label(*g), chains.len() - 1));
                    }
                    if !positions.is_empty() {
                        match callee {
                            Callee::Lib(LibFn::Api(f))
                                if is_source_api(*f) && api::spec(*f).stream_arg.is_some_and(|i| positions.contains(&i)) =>
                            {
                                out.sources.insert(l);
                                record_chain(&chains, ch, &mut out.descents);
                                continue;
                            }
                            Callee::Lib(_) => {}
                            Callee::User(g) => {
                                if self.st.func(*g).address_taken {
                                    return Outcome::default();
                                }
                                let nparams = self.st.func(*g).nparams;
                                chains.push((ch, l));
                                let sub = chains.len() - 1;
                                for &i in positions.iter().filter(|&&i| i < nparams) {
                                    worklist.push((Key::Loc(Location::Local(*g, i as u32)), ir.exit_label(*g), sub));
                                }
                            }
                            Callee::Indirect { .. } => return Outcome::default(),
                        }
                    }
                    if result.is_some_and(|r| Key::Loc(r) == x) {
                        if let Callee::Lib(LibFn::Api(f)) = callee {
                            if matches!(api::spec(*f).role, ApiRole::Ctor(_)) && is_source_api(*f) {
                                out.sources.insert(l);
                                record_chain(&chains, ch, &mut out.descents);
                            }
                        }
                        next_x = None;
                    }
                }
                Instr::Assign { lhs, rhs, .. } if Key::Loc(*lhs) == x => {
                    next_x = match rhs {
                        Value::Loc(y) => Some(self.key(*y)),
                        Value::Std(s) => Some(Key::Std(*s)),
                        _ => None,
                    };
                }
                _ => {}
            }
            if let Some(nx) = next_x {
                for p in ir.predecessors(l).expect("label exists") {
                    worklist.push((nx, p, ch));
                }
            }
        }
        self.visited_labels += seen_labels.len();

        let f = l0.func;
        let is_param = matches!(x0, Location::Local(g, i) if g == f && (i as usize) < self.st.func(f).nparams);
        if out.sources.is_empty() && is_param && !self.st.func(f).address_taken {
            let Location::Local(_, pi) = x0 else { unreachable!() };
            let mut vcs = visited_call_sites.clone();
            vcs.insert(l0);
            for &site in ir.call_sites(f).expect("function exists") {
                if vcs.contains(&site) {
                    out.cut = true;
                    continue;
                }
                let key = (site, pi as usize);
                let sub = match self.memo.get(&key) {
                    Some(o) => o.clone(),
                    None => {
                        let o = self.run(site, pi as usize, &vcs);
                        if !o.cut {
                            self.memo.insert(key, o.clone());
                        }
                        o
                    }
                };
                if sub.sources.is_empty() {
                    return Outcome { cut: out.cut || sub.cut, ..Outcome::default() };
                }
                out.cut |= sub.cut;
                out.sources.extend(sub.sources);
                out.descents.extend(sub.descents);
                out.ascents.extend(sub.ascents);
                out.ascents.insert(site);
            }
        }
        if out.sources.is_empty() {
            out.descents.clear();
            out.ascents.clear();
        }
        out
    }
}

/// Runs the search for every `feof`/`ferror` call.
pub fn analyze_all(ir: &IrProgram, st: &SymbolTable) -> SourceMap {
    let mut a = Analyzer::new(ir, st);
    let mut checks = BTreeMap::new();
    for (l, ins) in ir.labels() {
        let Instr::Call { callee: Callee::Lib(LibFn::Api(f)), args, .. } = ins else { continue };
        if !api::spec(*f).is_check() {
            continue;
        }
        let Some(Arg::Stream(var)) = args.first().copied() else { continue };
        let o = a.run(l, 0, &BTreeSet::new());
        let result = if o.sources.is_empty() { SourceResult::Failed } else { SourceResult::Found(o.sources) };
        checks.insert(l, CheckResult { check: l, var, result, descents: o.descents, ascents: o.ascents });
    }
    SourceMap { checks, visited_labels: a.visited_labels, runs: a.runs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::api::default_nonposix;
    use crate::frontend::load;
    use crate::ir::lower;

    fn run(src: &str) -> (SymbolTable, IrProgram, SourceMap) {
        let (p, st) = load(src, &default_nonposix()).unwrap();
        let ir = lower(&p, &st);
        let sm = analyze_all(&ir, &st);
        (st, ir, sm)
    }

    fn api_label(ir: &IrProgram, st: &SymbolTable, func: &str, f: ApiFn) -> Label {
        ir.labels()
            .find(|(l, i)| {
                st.func(l.func).name == func && matches!(i, Instr::Call { callee: Callee::Lib(LibFn::Api(g)), .. } if *g == f)
            })
            .unwrap()
            .0
    }

    #[test]
    fn source_in_callee() {
        let (st, ir, sm) = run(
            "void bar(FILE *g) { string s; fread(s, 1, 1, g); }
             void foo(FILE *f) { bar(f); if (ferror(f)) { } }",
        );
        let check = api_label(&ir, &st, "foo", ApiFn::Ferror);
        let r = sm.get(check).unwrap();
        assert_eq!(r.result, SourceResult::Found([api_label(&ir, &st, "bar", ApiFn::Fread)].into()));
        assert_eq!(r.descents.len(), 1);
        assert!(r.ascents.is_empty());
    }

    #[test]
    fn source_in_caller() {
        let (st, ir, sm) = run(
            "void foo(FILE *f) { if (ferror(f)) { } }
             void bar() { string s; FILE *g = fopen(\"a\", \"r\"); fread(s, 1, 1, g); foo(g); }",
        );
        let check = api_label(&ir, &st, "foo", ApiFn::Ferror);
        let r = sm.get(check).unwrap();
        assert_eq!(r.result, SourceResult::Found([api_label(&ir, &st, "bar", ApiFn::Fread)].into()));
        assert_eq!(r.ascents.len(), 1);
    }

    #[test]
    fn conditional_source_stops_before_callers() {
        let (st, ir, sm) = run(
            "void foo(FILE *f, int cond) { string s; if (cond) { fread(s, 1, 1, f); } if (ferror(f)) { } }
             void bar() { string s; FILE *g = stdin; fread(s, 1, 1, g); foo(g, 1); }",
        );
        let check = api_label(&ir, &st, "foo", ApiFn::Ferror);
        let r = sm.get(check).unwrap();
        assert_eq!(r.result, SourceResult::Found([api_label(&ir, &st, "foo", ApiFn::Fread)].into()));
        assert!(r.ascents.is_empty());
    }

    #[test]
    fn indirect_call_on_path_fails() {
        let (st, ir, sm) = run(
            "void h(FILE *f) { } void foo(FILE *f, fn(FILE *) -> void cb) { string s; fread(s, 1, 1, f); (*cb)(f); if (ferror(f)) { } }
             void main() { foo(stdin, h); }",
        );
        let check = api_label(&ir, &st, "foo", ApiFn::Ferror);
        assert_eq!(sm.get(check).unwrap().result, SourceResult::Failed);
    }

    #[test]
    fn no_checks_no_entries() {
        let (_, _, sm) = run("void main() { fputc('a', stdout); }");
        assert!(sm.checks.is_empty());
    }

    #[test]
    fn recursive_checker_terminates() {
        let (st, ir, sm) = run(
            "void chk(FILE *f, int n) { if (n) { chk(f, n - 1); } if (feof(f)) { } }
             void main() { FILE *g = stdin; fgetc(g); chk(g, 3); }",
        );
        let check = api_label(&ir, &st, "chk", ApiFn::Feof);
        assert_eq!(sm.get(check).unwrap().result, SourceResult::Found([api_label(&ir, &st, "main", ApiFn::Fgetc)].into()));
    }

    #[test]
    fn path_copy_is_followed() {
        let (st, ir, sm) = run("void main() { FILE *a = stdin; FILE *b; fgetc(a); b = a; if (feof(b)) { } }");
        let check = api_label(&ir, &st, "main", ApiFn::Feof);
        assert_eq!(sm.get(check).unwrap().result, SourceResult::Found([api_label(&ir, &st, "main", ApiFn::Fgetc)].into()));
    }

    #[test]
    fn std_stream_spellings_are_one_stream() {
        let (st, ir, sm) = run("void main() { fgetc(stdin); if (ferror(stdin)) { } }");
        let check = api_label(&ir, &st, "main", ApiFn::Ferror);
        assert_eq!(sm.get(check).unwrap().result, SourceResult::Found([api_label(&ir, &st, "main", ApiFn::Fgetc)].into()));
    }

    #[test]
    fn field_written_in_callee_is_found() {
        let (st, ir, sm) = run(
            "struct S { FILE *f; };
             void put(struct S *s) { fputc('a', s->f); }
             void main() { struct S *s; s = new S; s->f = stdout; put(s); if (ferror(s->f)) { } }",
        );
        let check = api_label(&ir, &st, "main", ApiFn::Ferror);
        let r = sm.get(check).unwrap();
        assert_eq!(r.result, SourceResult::Found([api_label(&ir, &st, "put", ApiFn::Fputc)].into()));
        assert_eq!(r.descents.len(), 1);
    }
}
