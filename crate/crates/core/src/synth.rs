//! Seeded MiniC program generators for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use crate::frontend::ast::{Program, Stmt, StmtKind};
use std::fmt::Write as _;

/// Environment variable overriding the base seed of randomized runs.
pub const SEED_VAR: &str = "STREAMLIFT_SEED";

/// Base seed from `STREAMLIFT_SEED`, or `default`.
pub fn base_seed(default: u64) -> u64 {
    std::env::var(SEED_VAR).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(default)
}

#[derive(Debug, Clone, Copy)]
pub struct RandomShape {
    pub max_locations: usize,
    pub max_statements: usize,
}

impl Default for RandomShape {
    fn default() -> Self {
        RandomShape { max_locations: 40, max_statements: 200 }
    }
}

struct Gen {
    rng: ChaCha8Rng,
    out: String,
    stmts: usize,
    budget: usize,
}

struct FnSig {
    name: String,
    params: usize,
    returns: bool,
}

impl Gen {
    fn line(&mut self, depth: usize, s: &str) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn pick<'a>(&mut self, xs: &'a [String]) -> &'a str {
        xs.choose(&mut self.rng).expect("non-empty pool")
    }

    fn stmt(&mut self, depth: usize, vars: &[String], fns: &[FnSig], fields: &[String], ret: bool) {
        self.stmts += 1;
        let a = self.pick(vars).to_string();
        let b = self.pick(vars).to_string();
        let roll = self.rng.gen_range(0..100);
        let s = match roll {
            0..=19 => format!("{a} = {b};"),
            20..=25 => format!("{a} = fopen(\"f{}\", \"r\");", self.rng.gen_range(0..3)),
            26..=28 => format!("{a} = fopen(\"f{}\", \"w\");", self.rng.gen_range(0..3)),
            29..=30 => format!("{a} = popen(\"cmd\", \"{}\");", if self.rng.gen_bool(0.5) { "r" } else { "w" }),
            31..=36 => {
                let s = ["stdin", "stdout", "stderr"].choose(&mut self.rng).expect("three streams");
                format!("{a} = {s};")
            }
            37..=42 => format!("n = fgetc({a});"),
            43..=46 => format!("fgets(buf, 8, {a});"),
            47..=51 => format!("fputc('x', {a});"),
            52..=54 => format!("fputs(\"s\", {a});"),
            55..=57 => format!("fseek({a}, 0, 0);"),
            58..=59 => format!("n = ftell({a});"),
            60..=62 => format!("fclose({a});"),
            63..=64 => format!("fflush({a});"),
            65..=67 => format!("n = feof({a});"),
            68..=72 if !fields.is_empty() => {
                let f = self.pick(fields).to_string();
                if self.rng.gen_bool(0.5) {
                    format!("r.{f} = {a};")
                } else {
                    format!("{a} = r.{f};")
                }
            }
            73..=84 if !fns.is_empty() => {
                let g = &fns[self.rng.gen_range(0..fns.len())];
                let args: Vec<String> = (0..g.params).map(|_| self.pick(vars).to_string()).collect();
                let call = format!("{}({})", g.name, args.join(", "));
                if g.returns {
                    format!("{a} = {call};")
                } else {
                    format!("{call};")
                }
            }
            85..=90 if depth < 3 && self.stmts + 2 < self.budget => {
                self.line(depth, "if (n) {");
                let k = self.rng.gen_range(1..3);
                for _ in 0..k {
                    if self.stmts < self.budget {
                        self.stmt(depth + 1, vars, fns, fields, ret);
                    }
                }
                self.line(depth, "} else {");
                if self.stmts < self.budget {
                    self.stmt(depth + 1, vars, fns, fields, ret);
                }
                self.line(depth, "}");
                return;
            }
            91..=94 if depth < 3 && self.stmts + 1 < self.budget => {
                self.line(depth, "while (n) {");
                self.stmt(depth + 1, vars, fns, fields, ret);
                self.line(depth, "n = n - 1;");
                self.line(depth, "}");
                return;
            }
            95..=99 if ret => format!("return {a};"),
            _ => format!("{a} = {b};"),
        };
        self.line(depth, &s);
    }
}

/// A random MiniC program exercising every stream-flow rule, within the given bounds.
pub fn random_program(seed: u64, shape: RandomShape) -> String {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), out: String::new(), stmts: 0, budget: shape.max_statements };
    let max = shape.max_locations.max(4);
    let nfields = g.rng.gen_range(0..3);
    let nglobals = g.rng.gen_range(0..4);
    let nfuncs = g.rng.gen_range(1..5);
    let mut left = max - nfields - nglobals;
    let fields: Vec<String> = (0..nfields).map(|i| format!("s{i}")).collect();
    let globals: Vec<String> = (0..nglobals).map(|i| format!("g{i}")).collect();
    let mut sigs = Vec::new();
    for i in 0..nfuncs {
        let returns = g.rng.gen_bool(0.5);
        let params = g.rng.gen_range(0..3);
        let need = params + returns as usize + 1;
        if left < need + 1 {
            break;
        }
        left -= params + returns as usize;
        sigs.push(FnSig { name: format!("h{i}"), params, returns });
    }
    // Remaining locations become locals, spread over helpers and main.
    let nbodies = sigs.len() + 1;
    let per = (left / nbodies).max(1);
    if !fields.is_empty() {
        g.out.push_str("struct R {\n");
        for f in &fields {
            let _ = writeln!(g.out, "  FILE *{f};");
        }
        g.out.push_str("};\n");
    }
    for v in &globals {
        let _ = writeln!(g.out, "FILE *{v};");
    }
    // Declarations, loop decrements and returns also count as statements.
    let total = shape.max_statements / 2;
    let per_fn = total / nbodies;
    for (i, sig) in sigs.iter().enumerate() {
        let ret = if sig.returns { "FILE *" } else { "void " };
        let params: Vec<String> = (0..sig.params).map(|p| format!("FILE *p{p}")).collect();
        let _ = writeln!(g.out, "{ret}{}({}) {{", sig.name, params.join(", "));
        let mut vars: Vec<String> = (0..sig.params).map(|p| format!("p{p}")).collect();
        vars.extend(globals.iter().cloned());
        let nlocals = per.min(max);
        for l in 0..nlocals {
            let _ = writeln!(g.out, "  FILE *v{i}_{l};");
            vars.push(format!("v{i}_{l}"));
        }
        g.out.push_str("  int n;\n  string buf;\n");
        if !fields.is_empty() {
            g.out.push_str("  struct R *r;\n  r = new R;\n");
        }
        g.budget = per_fn * (i + 1);
        while g.stmts < g.budget {
            g.stmt(1, &vars, &sigs, &fields, sig.returns);
        }
        if sig.returns {
            let v = g.pick(&vars).to_string();
            let _ = writeln!(g.out, "  return {v};");
        }
        g.out.push_str("}\n");
    }
    g.out.push_str("int main() {\n");
    let mut vars: Vec<String> = globals.clone();
    for l in 0..per {
        let _ = writeln!(g.out, "  FILE *m{l};");
        vars.push(format!("m{l}"));
    }
    g.out.push_str("  int n;\n  string buf;\n");
    if !fields.is_empty() {
        g.out.push_str("  struct R *r;\n  r = new R;\n");
    }
    g.budget = total;
    while g.stmts < g.budget {
        g.stmt(1, &vars, &sigs, &fields, false);
    }
    g.out.push_str("  return 0;\n}\n");
    g.out
}

#[derive(Debug, Clone, Copy)]
pub struct PerfShape {
    pub statements: usize,
    pub locations: usize,
    pub checks: usize,
}

impl Default for PerfShape {
    fn default() -> Self {
        PerfShape { statements: 10_000, locations: 500, checks: 100 }
    }
}

/// A large program for timing: helper functions holding `locations` stream
/// variables in total, `checks` error checks and about `statements` statements.
pub fn perf_program(seed: u64, shape: PerfShape) -> String {
    #[derive(Clone, Copy, PartialEq)]
    enum Role {
        ReadFile,
        WriteFile,
        In,
        Out,
        // assigned from both file readers and stdin
        Mixed,
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_fn_locs = 10;
    let nfuncs = shape.locations.div_ceil(per_fn_locs).max(1);
    let stmts_per_fn = shape.statements / nfuncs;
    let mut checks_left = shape.checks;
    let mut out = String::new();
    for f in 0..nfuncs {
        // The parameter always carries stdin.
        let locals = per_fn_locs.min(shape.locations - f * per_fn_locs) - 1;
        let _ = writeln!(out, "int w{f}(FILE *p) {{");
        let mut vars: Vec<(String, Role)> = vec![("p".to_string(), Role::In)];
        for i in 0..locals {
            let role = match i % 5 {
                0 => Role::ReadFile,
                1 => Role::WriteFile,
                2 => Role::In,
                3 => Role::Out,
                _ => Role::Mixed,
            };
            vars.push((format!("a{i}"), role));
        }
        for (v, _) in &vars[1..] {
            let _ = writeln!(out, "  FILE *{v};");
        }
        out.push_str("  int n;\n  string buf;\n");
        let file = |rng: &mut ChaCha8Rng| format!("\"d{}\"", rng.gen_range(0..8));
        let of = |vars: &[(String, Role)], r: Role| -> Vec<String> {
            vars.iter().filter(|(_, x)| *x == r).map(|(n, _)| n.clone()).collect()
        };
        let readers: Vec<String> = of(&vars, Role::ReadFile).into_iter().chain(of(&vars, Role::In)).collect();
        for (v, role) in &vars[1..] {
            let init = match role {
                Role::ReadFile => format!("fopen({}, \"r\")", file(&mut rng)),
                Role::WriteFile => format!("fopen({}, \"w\")", file(&mut rng)),
                Role::In => "stdin".to_string(),
                Role::Out => "stdout".to_string(),
                Role::Mixed => readers.choose(&mut rng).cloned().unwrap_or_else(|| "stdin".to_string()),
            };
            let _ = writeln!(out, "  {v} = {init};");
        }
        let fn_checks = checks_left.min(shape.checks.div_ceil(nfuncs));
        checks_left -= fn_checks;
        let body = stmts_per_fn.saturating_sub(locals * 2 + 4 + fn_checks * 2);
        let mut emitted = 0;
        let mut checks_done = 0;
        while emitted < body || checks_done < fn_checks {
            let (v, role) = vars.choose(&mut rng).expect("vars").clone();
            let writer = matches!(role, Role::WriteFile | Role::Out);
            if checks_done < fn_checks && (emitted >= body || rng.gen_range(0..body.max(1)) < fn_checks * 2) {
                let which = if rng.gen_bool(0.5) { "ferror" } else { "feof" };
                let op = if writer { format!("fputc('c', {v});") } else { format!("n = fgetc({v});") };
                let _ = writeln!(out, "  {op}\n  if ({which}({v}) != 0) {{ fputs(\"e\\n\", stderr); }}");
                checks_done += 1;
                continue;
            }
            let s = match (rng.gen_range(0..10), role) {
                (0..=3, Role::WriteFile | Role::Out) => format!("fputc('c', {v});"),
                (0..=3, _) => format!("n = fgetc({v});"),
                (4, Role::ReadFile | Role::In) => format!("fgets(buf, 16, {v});"),
                (5, Role::ReadFile | Role::WriteFile) => format!("n = ftell({v});"),
                (6, Role::In) if f + 1 < nfuncs => format!("n = w{}({v});", f + 1),
                (7, Role::Mixed) => {
                    let w = readers.choose(&mut rng).cloned().unwrap_or_else(|| "stdin".to_string());
                    format!("{v} = {w};")
                }
                _ => "n = n + 1;".to_string(),
            };
            let _ = writeln!(out, "  {s}");
            emitted += 1;
        }
        out.push_str("  return n;\n}\n");
    }
    let _ = writeln!(out, "int main() {{\n  return w0(stdin);\n}}");
    out
}

/// A small program of mutually recursive checker functions sharing one stream.
pub fn recursive_checker_program(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nfuncs = rng.gen_range(1..4);
    let mut out = String::new();
    for i in 0..nfuncs {
        let _ = writeln!(out, "int c{i}(FILE *f, int n) {{");
        for _ in 0..rng.gen_range(1..4) {
            let j = rng.gen_range(0..nfuncs);
            let s = match rng.gen_range(0..6) {
                0 => "fgetc(f);".to_string(),
                1 | 2 => format!("if (n) {{ c{j}(f, n - 1); }}"),
                3 => "if (feof(f)) { n = 0; }".to_string(),
                4 => "if (ferror(f)) { n = 1; }".to_string(),
                _ => "while (n) { n = n - 1; fgetc(f); }".to_string(),
            };
            let _ = writeln!(out, "  {s}");
        }
        out.push_str("  return n;\n}\n");
    }
    out.push_str("int main() {\n  FILE *s;\n");
    out.push_str(if rng.gen_bool(0.5) { "  s = stdin;\n" } else { "  s = fopen(\"in\", \"r\");\n" });
    if rng.gen_bool(0.5) {
        out.push_str("  fgetc(s);\n");
    }
    let _ = writeln!(out, "  c{}(s, 2);", rng.gen_range(0..nfuncs));
    if rng.gen_bool(0.5) {
        out.push_str("  if (feof(s)) { return 1; }\n");
    }
    out.push_str("  return 0;\n}\n");
    out
}

/// Statements in a parsed program, nested ones included.
pub fn count_statements(prog: &Program) -> usize {
    fn block(b: &[Stmt]) -> usize {
        b.iter()
            .map(|s| {
                1 + match &s.kind {
                    StmtKind::If { then, els, .. } => block(then) + els.as_deref().map_or(0, block),
                    StmtKind::While { body, .. } => block(body),
                    _ => 0,
                }
            })
            .sum()
    }
    prog.functions.iter().map(|f| block(&f.body)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{analyze, Options};

    #[test]
    fn random_programs_load() {
        for seed in 0..20 {
            let src = random_program(seed, RandomShape::default());
            let a = analyze(&src, &Options::default()).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{src}"));
            assert!(a.st.stream_locations().len() <= 40, "seed {seed}");
            assert!(count_statements(&a.prog) <= 200, "seed {seed}: {}", count_statements(&a.prog));
        }
    }

    #[test]
    fn same_seed_same_program() {
        assert_eq!(random_program(7, RandomShape::default()), random_program(7, RandomShape::default()));
    }

    #[test]
    fn perf_program_shape() {
        let src = perf_program(1, PerfShape { statements: 1000, locations: 50, checks: 10 });
        let a = analyze(&src, &Options::default()).unwrap();
        assert_eq!(a.st.stream_locations().len(), 50);
    }

    #[test]
    fn default_perf_program_size() {
        let src = perf_program(1, PerfShape::default());
        let a = analyze(&src, &Options::default()).unwrap();
        assert_eq!(a.st.stream_locations().len(), 500);
        let n = count_statements(&a.prog);
        assert!((10_000..10_500).contains(&n), "{n} statements");
    }
}
