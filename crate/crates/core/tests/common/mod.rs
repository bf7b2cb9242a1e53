//! Shared fixtures and the acceptance checks, one function per criterion.

#![allow(dead_code)]

pub mod oracles;

use oracles::{decision_table, enumerate_sources, naive_solve};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};
use streamlift::api::{self, ApiFn};
use streamlift::errsrc::analyze_all;
use streamlift::ir::{Callee, Instr};
use streamlift::sets::{Capability, Origin};
use streamlift::streamsets::solve;
use streamlift::support::reason_histogram;
use streamlift::synth::{self, PerfShape, RandomShape};
use streamlift::transform::print::print_program;
use streamlift::transform::types::decide_shape;
use streamlift::validator::{check, differential_all};
use streamlift::{analyze, run, Analysis, CapSet, LibFn, Options, OriginSet, SourceResult, TypeErrorKind, VfsSpec};

pub type Outcome = Result<String, String>;

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests")
}

pub fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

pub fn load(src: &str) -> Analysis {
    analyze(src, &Options::default()).expect("program loads")
}

/// `.mc` files of a corpus directory, sorted by name.
pub fn programs(dir: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(corpus_dir().join(dir))
        .expect("corpus directory")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "mc"))
        .collect();
    v.sort();
    v
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub const WORKED_EXAMPLE: &str = r#"
void main(int b) {
  FILE *x;
  FILE *y;
  FILE *z;
  string buf;
  x = fopen("data", "r");
  fseek(x, 0, SEEK_SET);
  y = stdin;
  if (b) { z = x; } else { z = y; }
  fread(buf, 1, 1, z);
}
"#;

pub fn criterion1() -> Outcome {
    let t = Instant::now();
    let a = load(WORKED_EXAMPLE);
    let elapsed = t.elapsed();
    let loc = |n: &str| {
        a.st.stream_locations().into_iter().find(|l| a.st.location_name(*l) == n).unwrap_or_else(|| panic!("{n}"))
    };
    let expect = [
        ("main::x", OriginSet::of(&[Origin::File]), CapSet::of(&[Capability::Seek, Capability::Read])),
        ("main::y", OriginSet::of(&[Origin::Stdin]), CapSet::of(&[Capability::Read])),
        ("main::z", OriginSet::of(&[Origin::File, Origin::Stdin]), CapSet::of(&[Capability::Read])),
    ];
    for (n, o, c) in expect {
        let f = a.facts.get(loc(n));
        ensure(f.origins == o && f.caps == c, || format!("{n}: got {:?} / {:?}", f.origins, f.caps))?;
    }
    ensure(elapsed < Duration::from_millis(100), || format!("took {elapsed:?}"))?;
    Ok(format!("x, y, z exact in {elapsed:?}"))
}

pub fn criterion2() -> Outcome {
    let t = Instant::now();
    let base = synth::base_seed(0);
    let shape = RandomShape::default();
    for seed in base..base + 200 {
        let src = synth::random_program(seed, shape);
        let a = load(&src);
        let nloc = a.st.stream_locations().len();
        let nstmt = synth::count_statements(&a.prog);
        ensure(nloc <= 40 && nstmt <= 200, || format!("seed {seed}: {nloc} locations, {nstmt} statements"))?;
        let fast = solve(&a.constraints).normalized();
        let slow = naive_solve(&a.constraints);
        ensure(fast == slow, || format!("seed {seed}: solutions differ"))?;
    }
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("200/200 seeds from {base} agree in {elapsed:?}"))
}

pub fn criterion3() -> Outcome {
    let mut n = 0;
    for ob in 0..32u32 {
        for cb in 0..32u32 {
            for is_param in [false, true] {
                let (o, c) = (OriginSet::from_bits(ob), CapSet::from_bits(cb));
                let got = decide_shape(o, c, is_param);
                let want = decision_table(o, c, is_param);
                ensure(got == want, || format!("{o:?} {c:?} param={is_param}: {got:?} vs {want:?}"))?;
                n += 1;
            }
        }
    }
    ensure(n == 2048, || format!("{n} combinations"))?;
    Ok("2048/2048 combinations agree".into())
}

fn check_labels(a: &Analysis, func: &str, f: ApiFn) -> Vec<streamlift::Label> {
    a.ir.labels()
        .filter(|(l, i)| {
            a.st.func(l.func).name == func && matches!(i, Instr::Call { callee: Callee::Lib(LibFn::Api(g)), .. } if *g == f)
        })
        .map(|(l, _)| l)
        .collect()
}

fn sources_of(a: &Analysis, func: &str, check: ApiFn) -> SourceResult {
    let l = check_labels(a, func, check)[0];
    a.sources.get(l).expect("check analyzed").result.clone()
}

pub fn criterion4() -> Outcome {
    // source in a callee
    let a = load("void bar(FILE *g) { string s; fread(s, 1, 1, g); } void foo(FILE *f) { bar(f); if (ferror(f)) { } }");
    let want = SourceResult::Found(check_labels(&a, "bar", ApiFn::Fread).into_iter().collect());
    ensure(sources_of(&a, "foo", ApiFn::Ferror) == want, || "callee listing".into())?;
    // source in a caller
    let a = load(
        "void foo(FILE *f) { if (ferror(f)) { } }
         void bar() { string s; FILE *g = fopen(\"a\", \"r\"); fread(s, 1, 1, g); foo(g); }",
    );
    let want = SourceResult::Found(check_labels(&a, "bar", ApiFn::Fread).into_iter().collect());
    ensure(sources_of(&a, "foo", ApiFn::Ferror) == want, || "caller listing".into())?;
    // conditional source stops before the callers
    let a = load(
        "void foo(FILE *f, int cond) { string s; if (cond) { fread(s, 1, 1, f); } if (ferror(f)) { } }
         void bar() { string s; FILE *g = stdin; fread(s, 1, 1, g); foo(g, 1); }",
    );
    let want = SourceResult::Found(check_labels(&a, "foo", ApiFn::Fread).into_iter().collect());
    let l = check_labels(&a, "foo", ApiFn::Ferror)[0];
    ensure(a.sources.get(l).unwrap().result == want && a.sources.get(l).unwrap().ascents.is_empty(), || {
        "conditional listing".into()
    })?;
    // a call through a function pointer on the path
    let a = load(
        "void h(FILE *f) { }
         void foo(FILE *f, fn(FILE *) -> void cb) { string s; fread(s, 1, 1, f); (*cb)(f); if (ferror(f)) { } }
         void main() { foo(stdin, h); }",
    );
    ensure(sources_of(&a, "foo", ApiFn::Ferror) == SourceResult::Failed, || "indirect call not Failed".into())?;

    let base = synth::base_seed(0);
    let (mut programs, mut checks) = (0, 0);
    let mut seed = base;
    while programs < 150 {
        let src = synth::recursive_checker_program(seed);
        seed += 1;
        let a = load(&src);
        if a.ir.total_labels() > 30 {
            continue;
        }
        programs += 1;
        let fresh = analyze_all(&a.ir, &a.st);
        for (l, c) in &fresh.checks {
            let mut budget = 5_000_000;
            let want = enumerate_sources(&a.ir, &a.st, *l, &mut budget);
            ensure(budget > 0, || format!("seed {}: enumeration budget exhausted", seed - 1))?;
            let got = c.result.sources().cloned();
            let want = want.filter(|s| !s.is_empty());
            ensure(got == want, || format!("seed {}: check {l:?}: {got:?} vs {want:?}\n{src}", seed - 1))?;
            checks += 1;
        }
    }
    Ok(format!("listings exact; {checks} checks over {programs} recursive programs agree"))
}

/// Identifiers bound by `let` that the source program does not mention.
fn fresh_binders(toks: &[String], source: &str) -> BTreeSet<String> {
    let known: BTreeSet<String> = tokens(source).into_iter().collect();
    let mut out = BTreeSet::new();
    let mut i = 0;
    while i < toks.len() {
        if toks[i] == "let" {
            let mut j = i + 1;
            while j < toks.len() && !matches!(toks[j].as_str(), "=" | ":" | ";") {
                let t = &toks[j];
                if t.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_') && t != "_" && !known.contains(t)
                {
                    out.insert(t.clone());
                }
                j += 1;
            }
        }
        i += 1;
    }
    out
}

fn tokens(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_str = false;
    for ch in s.chars() {
        if in_str {
            cur.push(ch);
            if ch == '"' {
                out.push(std::mem::take(&mut cur));
                in_str = false;
            }
            continue;
        }
        if ch.is_alphanumeric() || ch == '_' {
            cur.push(ch);
            continue;
        }
        if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        if ch == '"' {
            cur.push(ch);
            in_str = true;
        } else if !ch.is_whitespace() {
            out.push(ch.to_string());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Token-level equality up to a consistent renaming of fresh `let` binders.
pub fn alpha_equal(got: &str, want: &str, source: &str) -> Result<(), String> {
    let canon = |s: &str| -> Vec<String> {
        let ts = tokens(s);
        let fresh = fresh_binders(&ts, source);
        let mut names: BTreeMap<String, String> = BTreeMap::new();
        ts.into_iter()
            .map(|t| {
                if fresh.contains(&t) {
                    let n = names.len();
                    names.entry(t).or_insert_with(|| format!("#{n}")).clone()
                } else {
                    t
                }
            })
            .collect()
    };
    let (g, w) = (canon(got), canon(want));
    match g.iter().zip(&w).position(|(a, b)| a != b) {
        None if g.len() == w.len() => Ok(()),
        Some(i) => Err(format!("token {i}: `{}` vs `{}`", g[i], w[i])),
        None => Err(format!("lengths {} vs {}", g.len(), w.len())),
    }
}

/// The printed target without its `use` preamble.
pub fn printed_body(src: &str) -> String {
    let (_, out) = run(src, &Options::default()).expect("transforms");
    let text = print_program(&out.program);
    text.lines().skip_while(|l| l.starts_with("use ") || l.is_empty()).collect::<Vec<_>>().join("\n")
}

pub fn criterion5() -> Outcome {
    for name in ["ivc", "ivd"] {
        let dir = corpus_dir().join("golden");
        let src = read(dir.join(format!("{name}.mc")));
        let want = read(dir.join(format!("{name}.rs.out")));
        alpha_equal(&printed_body(&src), &want, &src).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok("both listings structurally equal".into())
}

pub fn load_spec(mc: &Path) -> VfsSpec {
    let p = mc.with_extension("vfs.json");
    serde_json::from_str(&read(&p)).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub fn criterion6() -> Outcome {
    let files = programs("corpus/diff");
    ensure(files.len() >= 20, || format!("{} programs", files.len()))?;
    let mut seen_api: BTreeSet<ApiFn> = BTreeSet::new();
    let (mut pipe_modes, mut runs) = (BTreeSet::new(), 0);
    let (mut ascents, mut descents, mut eof_runs, mut err_runs) = (0, 0, 0, 0);
    for path in &files {
        let src = read(path);
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let (a, out) = run(&src, &Options::default()).map_err(|e| format!("{name}: {e}"))?;
        for (_, i) in a.ir.labels() {
            if let Instr::Call { callee: Callee::Lib(LibFn::Api(f)), .. } = i {
                seen_api.insert(*f);
            }
        }
        for m in ["\"r\")", "\"w\")"] {
            if src.lines().any(|l| l.contains("popen(") && l.contains(m)) {
                pipe_modes.insert(m);
            }
        }
        ascents += a.sources.checks.values().filter(|c| !c.ascents.is_empty()).count();
        descents += a.sources.checks.values().filter(|c| !c.descents.is_empty()).count();
        let spec = load_spec(path);
        ensure(spec.schedules.len() >= 3, || format!("{name}: fewer than 3 schedules"))?;
        for r in differential_all(&a.prog, &a.st, &out.program, &spec) {
            runs += 1;
            if let Some(d) = r.difference() {
                return Err(format!("{name} under {:?}: {d}", r.state.faults));
            }
            use streamlift::validator::FaultKind;
            eof_runs += r.state.faults.iter().any(|f| f.kind == FaultKind::Eof) as usize;
            err_runs += r.state.faults.iter().any(|f| f.kind == FaultKind::Other) as usize;
        }
    }
    let missing: Vec<&str> =
        api::table().iter().filter(|s| !seen_api.contains(&s.func)).map(|s| s.name).collect();
    ensure(missing.is_empty(), || format!("API functions not covered: {missing:?}"))?;
    ensure(pipe_modes.len() == 2, || "both pipe modes not covered".into())?;
    ensure(ascents > 0 && descents > 0, || "caller- and callee-side sources not both covered".into())?;
    ensure(eof_runs > 0 && err_runs > 0, || "eof and error schedules not both covered".into())?;
    Ok(format!("{} programs, {runs} runs identical", files.len()))
}

pub fn criterion7() -> Outcome {
    let mut n = 0;
    for path in programs("corpus/diff") {
        let (_, out) = run(&read(&path), &Options::default()).expect("transforms");
        if out.report.api_calls_remaining != 0 {
            continue;
        }
        n += 1;
        let d = check(&out.program);
        ensure(d.is_empty(), || format!("{}: {}", path.display(), d[0]))?;
    }
    ensure(n >= 20, || format!("only {n} supported-only programs"))?;
    let (_, out) = run(&read(corpus_dir().join("corpus/nano.mc")), &Options::default()).expect("transforms");
    let d = check(&out.program);
    ensure(d.len() == 1 && d[0].kind == TypeErrorKind::UseAfterMove, || format!("nano pattern: {d:?}"))?;
    Ok(format!("{n} supported-only programs clean; nano pattern gives one UseAfterMove"))
}

#[derive(serde::Deserialize)]
struct Label {
    total: usize,
    replaced: usize,
    reasons: BTreeMap<String, [usize; 2]>,
}

pub fn criterion8() -> Outcome {
    let labels: BTreeMap<String, Label> = serde_json::from_str(&read(corpus_dir().join("corpus/reasons/labels.json")))
        .map_err(|e| format!("labels.json: {e}"))?;
    let mut covered = BTreeSet::new();
    let files = programs("corpus/reasons");
    ensure(files.len() == labels.len(), || "labels and programs differ".into())?;
    for path in &files {
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let want = labels.get(&name).ok_or_else(|| format!("{name}: no label"))?;
        let (a, out) = run(&read(path), &Options::default()).map_err(|e| format!("{name}: {e}"))?;
        let r = out.report;
        ensure(r.api_calls_total == want.total && r.api_calls_replaced == want.replaced, || {
            format!("{name}: report {r:?}")
        })?;
        let got: BTreeMap<String, [usize; 2]> = reason_histogram(&a.ir, &a.verdict)
            .into_iter()
            .filter(|(_, c)| c.affected > 0)
            .map(|(k, c)| (k.name().to_string(), [c.affected, c.unique]))
            .collect();
        ensure(got == want.reasons, || format!("{name}: histogram {got:?}"))?;
        covered.extend(got.into_keys());
    }
    ensure(covered.len() == 11, || format!("only {} reasons covered", covered.len()))?;
    // report arithmetic on everything at hand
    let mut reports = 0;
    let all = programs("corpus/diff").into_iter().chain(files).map(read);
    let random = (0..50).map(|s| synth::random_program(s, RandomShape::default()));
    for src in all.chain(random) {
        let (_, out) = run(&src, &Options::default()).map_err(|e| e.to_string())?;
        let r = out.report;
        ensure(r.api_calls_replaced + r.api_calls_remaining == r.api_calls_total, || format!("{r:?}"))?;
        reports += 1;
    }
    Ok(format!("{} labelled programs exact, 11 reasons covered, arithmetic holds on {reports} reports", labels.len()))
}

pub fn criterion9() -> Outcome {
    let src = synth::perf_program(synth::base_seed(1), PerfShape::default());
    let t = Instant::now();
    let a = load(&src);
    let out = a.transform().map_err(|e| e.to_string())?;
    let total = t.elapsed();
    let nstmt = synth::count_statements(&a.prog);
    let nloc = a.st.stream_locations().len();
    let nchecks = a.sources.checks.len();
    ensure(nstmt >= 10_000 && nloc == 500 && nchecks == 100, || {
        format!("shape: {nstmt} statements, {nloc} locations, {nchecks} checks")
    })?;
    let solve_time = (0..3)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(solve(&a.constraints));
            t.elapsed()
        })
        .min()
        .expect("three runs");
    ensure(total < Duration::from_secs(5), || format!("analyze+transform took {total:?}"))?;
    ensure(solve_time < Duration::from_millis(50), || format!("solve took {solve_time:?}"))?;
    Ok(format!(
        "analyze+transform {total:?}, solve {solve_time:?}, {} of {} calls replaced",
        out.report.api_calls_replaced, out.report.api_calls_total
    ))
}

pub type Criterion = (&'static str, fn() -> Outcome);

pub const CRITERIA: [Criterion; 9] = [
    ("worked example facts", criterion1),
    ("solver matches naive oracle", criterion2),
    ("type decision table", criterion3),
    ("error source goldens and oracle", criterion4),
    ("transformation goldens", criterion5),
    ("differential execution", criterion6),
    ("validator goldens", criterion7),
    ("unsupported accounting", criterion8),
    ("performance smoke", criterion9),
];
