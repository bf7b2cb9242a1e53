use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const EXAMPLE: &str = r#"
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

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/corpus")
}

fn streamlift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streamlift")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_example(dir: &Path) -> String {
    let p = dir.join("example.mc");
    std::fs::write(&p, EXAMPLE).unwrap();
    p.display().to_string()
}

#[test]
fn empty_input_list_is_a_usage_error() {
    assert_eq!(code(&streamlift(&[])), 2);
    assert_eq!(code(&streamlift(&["--mode", "transform"])), 2);
}

#[test]
fn unknown_flag_and_missing_file_are_usage_errors() {
    assert_eq!(code(&streamlift(&["--bogus", "x.mc"])), 2);
    assert_eq!(code(&streamlift(&["/nonexistent/file.mc"])), 2);
}

#[test]
fn transform_reports_counts_and_writes_output() {
    let dir = tempfile::tempdir().unwrap();
    let src = write_example(dir.path());
    let out = dir.path().join("out");
    let report = dir.path().join("report.json");
    let o = streamlift(&["--mode", "transform", "--out", out.to_str().unwrap(), "--report", report.to_str().unwrap(), &src]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let f = &r["files"][0];
    assert_eq!(f["api_calls_total"], 3);
    assert_eq!(f["api_calls_replaced"], 3);
    assert_eq!(f["api_calls_remaining"], 0);
    for phase in ["frontend", "streams", "sources", "support", "transform"] {
        assert!(f["timings_ms"][phase].is_number(), "{phase}");
    }
    assert_eq!(r["totals"]["api_calls_total"], 3);
    let rs = std::fs::read_to_string(out.join("example.rs.out")).unwrap();
    assert!(rs.contains("fn main"));
    assert!(out.join("example.target.json").is_file());

    let c = streamlift(&["--mode", "check", out.to_str().unwrap()]);
    assert_eq!(code(&c), 0, "{}", String::from_utf8_lossy(&c.stdout));
}

#[test]
fn dump_facts_gives_the_expected_sets() {
    let dir = tempfile::tempdir().unwrap();
    let src = write_example(dir.path());
    let o = streamlift(&["--dump", "facts", &src]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let facts = &v[&src]["facts"];
    let set = |n: &str, k: &str| {
        let mut s: Vec<String> = facts[n][k].as_array().unwrap().iter().map(|x| x.as_str().unwrap().to_string()).collect();
        s.sort();
        s
    };
    assert_eq!(set("main::x", "origins"), ["file"]);
    assert_eq!(set("main::x", "caps"), ["read", "seek"]);
    assert_eq!(set("main::y", "origins"), ["stdin"]);
    assert_eq!(set("main::y", "caps"), ["read"]);
    assert_eq!(set("main::z", "origins"), ["file", "stdin"]);
    assert_eq!(set("main::z", "caps"), ["read"]);
}

#[test]
fn dumps_can_be_combined() {
    let dir = tempfile::tempdir().unwrap();
    let src = write_example(dir.path());
    let o = streamlift(&["--dump", "sources,reasons", "--dump", "cfg", &src]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let entry = &v[&src];
    assert!(entry["cfg"].is_string());
    assert!(entry.get("sources").is_some());
    assert!(entry.get("reasons").is_some());
    assert!(entry.get("facts").is_none());
}

#[test]
fn check_flags_ownership_error_in_closer_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let o = streamlift(&["--mode", "transform", "--out", dir.path().to_str().unwrap(), corpus().join("nano.mc").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let c = streamlift(&["--mode", "check", dir.path().join("nano.target.json").to_str().unwrap()]);
    assert_eq!(code(&c), 1);
    assert!(String::from_utf8_lossy(&c.stdout).contains("UseAfterMove"));
}

#[test]
fn diff_agrees_on_corpus_program() {
    let f = corpus().join("diff/01_copy_bytes.mc");
    let o = streamlift(&["--mode", "diff", f.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().count() >= 3);
    assert!(text.lines().all(|l| l.contains(": same [")));
}

#[test]
fn malformed_fault_schedule_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let f = corpus().join("diff/01_copy_bytes.mc");
    let o = streamlift(&["--mode", "diff", "--fault-schedule", bad.to_str().unwrap(), f.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn syntax_error_is_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("broken.mc");
    std::fs::write(&p, "int main( {").unwrap();
    let o = streamlift(&[p.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.mc"));
}

#[test]
fn nonposix_list_marks_calls_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("np.mc");
    std::fs::write(&p, "int main() { FILE *f; f = fopen(\"a\", \"r\"); myflush(f); fclose(f); return 0; }").unwrap();
    assert_eq!(code(&streamlift(&[p.to_str().unwrap()])), 1);
    let o = streamlift(&["--dump", "reasons", "--nonposix", "myflush,other", p.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let np = &v[p.to_str().unwrap()]["reasons"]["non_posix"];
    assert!(np["affected"].as_u64().unwrap() > 0, "{v}");
}
