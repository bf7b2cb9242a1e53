mod report;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use report::{FileReport, RunReport};
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use streamlift::support::{histogram_json, reason_histogram};
use streamlift::transform::print::print_program;
use streamlift::validator::{check, differential_all, standard_schedules, Fault};
use streamlift::{analyze, Options, TargetProgram, VfsSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Run the analyses and print the requested dumps.
    Analyze,
    /// Write `.rs.out` and `.target.json` for every input.
    Transform,
    /// Type-check previously emitted `.target.json` files.
    Check,
    /// Execute source and transformed program side by side under fault schedules.
    Diff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
enum Dump {
    Facts,
    Sources,
    Reasons,
    Cfg,
}

/// Analyze MiniC `FILE *` stream code and rewrite it to typed stream handles.
#[derive(Debug, Parser)]
#[command(name = "streamlift", version)]
struct Cli {
    #[arg(long, value_enum, default_value = "analyze")]
    mode: Mode,
    /// Output directory for transform (defaults to next to each input).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Where to write the JSON run report.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    dump: Vec<Dump>,
    /// Library functions to treat as non-POSIX extensions, added to the built-in list.
    #[arg(long, value_name = "NAME[,NAME]", value_delimiter = ',')]
    nonposix: Option<Vec<String>>,
    /// A `.vfs.json` file with the initial state and fault schedules for diff.
    #[arg(long, value_name = "PATH")]
    fault_schedule: Option<PathBuf>,
    /// Files or directories.
    inputs: Vec<PathBuf>,
}

/// Problems in the invocation itself; reported with exit status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(clean) => ExitCode::from(if clean { 0 } else { 1 }),
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Expands directories into the files with the given suffix.
fn collect_inputs(inputs: &[PathBuf], suffix: &str) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        return usage("no input files");
    }
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = walkdir::WalkDir::new(p)
                .into_iter()
                .filter_map(|e| e.ok())
                .map(|e| e.into_path())
                .filter(|f| f.is_file() && f.to_string_lossy().ends_with(suffix))
                .collect();
            found.sort();
            out.extend(found);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return usage(format!("{}: no such file or directory", p.display()));
        }
    }
    if out.is_empty() {
        return usage(format!("no {suffix} files among the inputs"));
    }
    Ok(out)
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))
}

fn stem(p: &Path, suffix: &str) -> String {
    let name = p.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default();
    name.strip_suffix(suffix).unwrap_or(&name).to_string()
}

fn run(cli: &Cli) -> Result<bool> {
    let mut opts = Options::default();
    for n in cli.nonposix.iter().flatten().map(|s| s.trim()) {
        if !n.is_empty() && !opts.nonposix.iter().any(|m| m == n) {
            opts.nonposix.push(n.to_string());
        }
    }
    if cli.fault_schedule.is_some() && cli.mode != Mode::Diff {
        return usage("--fault-schedule only applies to --mode diff");
    }
    match cli.mode {
        Mode::Check => check_mode(cli),
        Mode::Diff => diff_mode(cli, &opts),
        Mode::Analyze | Mode::Transform => pipeline_mode(cli, &opts),
    }
}

fn write_report(cli: &Cli, report: &RunReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report)? + "\n";
    match &cli.report {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None if cli.mode == Mode::Transform => {
            print!("{text}");
            Ok(())
        }
        None => Ok(()),
    }
}

fn pipeline_mode(cli: &Cli, opts: &Options) -> Result<bool> {
    let files = collect_inputs(&cli.inputs, ".mc")?;
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let mut report = RunReport::default();
    let mut dumps = Map::new();
    let mut clean = true;
    for file in &files {
        let name = file.display().to_string();
        let src = read(file)?;
        let a = match analyze(&src, opts) {
            Ok(a) => a,
            Err(e) => {
                for line in e.render(&name) {
                    eprintln!("{line}");
                }
                clean = false;
                continue;
            }
        };
        let t = Instant::now();
        let out = match a.transform() {
            Ok(o) => o,
            Err(e) => {
                for line in e.to_string().lines() {
                    eprintln!("{name}:{line}");
                }
                clean = false;
                continue;
            }
        };
        let transform_time = t.elapsed();
        let hist = reason_histogram(&a.ir, &a.verdict);
        report.files.push(FileReport::new(&name, &out.report, &hist, &a.timings, transform_time));

        if cli.mode == Mode::Transform {
            let s = stem(file, ".mc");
            let dir = cli.out.clone().unwrap_or_else(|| file.parent().map(Path::to_path_buf).unwrap_or_default());
            let rs = dir.join(format!("{s}.rs.out"));
            std::fs::write(&rs, print_program(&out.program)).with_context(|| format!("cannot write {}", rs.display()))?;
            let tj = dir.join(format!("{s}.target.json"));
            std::fs::write(&tj, serde_json::to_string(&out.program)?).with_context(|| format!("cannot write {}", tj.display()))?;
        }
        if !cli.dump.is_empty() {
            let mut d = Map::new();
            for k in &cli.dump {
                let v = match k {
                    Dump::Facts => a.facts.to_json(&a.st),
                    Dump::Sources => a.sources.to_json(&a.ir, &a.st),
                    Dump::Reasons => histogram_json(&hist),
                    Dump::Cfg => Value::String(a.ir.dump(&a.st)),
                };
                let key = match k {
                    Dump::Facts => "facts",
                    Dump::Sources => "sources",
                    Dump::Reasons => "reasons",
                    Dump::Cfg => "cfg",
                };
                d.insert(key.into(), v);
            }
            dumps.insert(name.clone(), Value::Object(d));
        }
    }
    report.finish();
    if !dumps.is_empty() {
        println!("{}", serde_json::to_string_pretty(&Value::Object(dumps))?);
    }
    write_report(cli, &report)?;
    Ok(clean)
}

fn check_mode(cli: &Cli) -> Result<bool> {
    let files = collect_inputs(&cli.inputs, ".target.json")?;
    let mut clean = true;
    for file in &files {
        let prog: TargetProgram =
            serde_json::from_str(&read(file)?).with_context(|| format!("{}: not an emitted target program", file.display()))?;
        let diags = check(&prog);
        for d in &diags {
            println!("{}: {d}", file.display());
        }
        clean &= diags.is_empty();
    }
    Ok(clean)
}

fn load_spec(cli: &Cli, source: &Path) -> Result<VfsSpec> {
    let explicit = cli.fault_schedule.clone();
    let sibling = source.with_file_name(format!("{}.vfs.json", stem(source, ".mc")));
    let mut spec = match explicit.or_else(|| sibling.is_file().then_some(sibling)) {
        Some(p) => match serde_json::from_str::<VfsSpec>(&read(&p)?) {
            Ok(s) => s,
            Err(e) => return usage(format!("{}: malformed fault schedule: {e}", p.display())),
        },
        None => VfsSpec::default(),
    };
    if spec.schedules.is_empty() {
        spec.schedules = standard_schedules();
    }
    Ok(spec)
}

fn describe(faults: &[Fault]) -> String {
    if faults.is_empty() {
        return "no faults".into();
    }
    let kinds: Vec<String> = faults.iter().map(|f| format!("{}:{}:{:?}", f.target, f.after, f.kind).to_lowercase()).collect();
    kinds.join(",")
}

fn diff_mode(cli: &Cli, opts: &Options) -> Result<bool> {
    let files = collect_inputs(&cli.inputs, ".mc")?;
    let mut clean = true;
    let mut results = Vec::new();
    for file in &files {
        let name = file.display().to_string();
        let src = read(file)?;
        let a = match analyze(&src, opts) {
            Ok(a) => a,
            Err(e) => {
                for line in e.render(&name) {
                    eprintln!("{line}");
                }
                clean = false;
                continue;
            }
        };
        // Prefer output emitted by an earlier transform run.
        let emitted = cli.out.as_ref().map(|d| d.join(format!("{}.target.json", stem(file, ".mc")))).filter(|p| p.is_file());
        let target: TargetProgram = match emitted {
            Some(p) => serde_json::from_str(&read(&p)?).with_context(|| format!("{}: not an emitted target program", p.display()))?,
            None => match a.transform() {
                Ok(o) => o.program,
                Err(e) => {
                    eprintln!("{name}: {e}");
                    clean = false;
                    continue;
                }
            },
        };
        let spec = load_spec(cli, file)?;
        for r in differential_all(&a.prog, &a.st, &target, &spec) {
            let sched = describe(&r.state.faults);
            match r.difference() {
                None => println!("{name}: same [{sched}]"),
                Some(d) => {
                    clean = false;
                    println!("{name}: DIFF [{sched}]: {d}");
                }
            }
            results.push(json!({ "file": name, "faults": r.state.faults, "same": r.agrees() }));
        }
    }
    if let Some(p) = &cli.report {
        std::fs::write(p, serde_json::to_string_pretty(&json!({ "runs": results }))? + "\n")
            .with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(clean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flags() {
        let c = Cli::try_parse_from(["streamlift", "--mode", "transform", "--dump", "facts,cfg", "--nonposix", "a,b", "x.mc"])
            .unwrap();
        assert_eq!(c.mode, Mode::Transform);
        assert_eq!(c.dump, vec![Dump::Facts, Dump::Cfg]);
        assert_eq!(c.nonposix, Some(vec!["a".to_string(), "b".to_string()]));
    }

    #[test]
    fn stem_strips_suffix() {
        assert_eq!(stem(Path::new("d/a.target.json"), ".target.json"), "a");
        assert_eq!(stem(Path::new("b.mc"), ".mc"), "b");
    }
}
