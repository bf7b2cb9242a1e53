//! Observable behavior of one execution.

use super::machine::{exit_code, Machine};
use super::stdio::{Trap, Val};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Exit {
    Code(i64),
    Trap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    /// Final file contents; pipe sinks appear as `|CMD`.
    pub files: BTreeMap<String, Vec<u8>>,
    pub exit: Exit,
    /// Why execution stopped early, for diagnostics only. Not compared.
    pub trap: Option<String>,
}

impl Trace {
    pub fn finish(m: Machine, result: Result<Val, Trap>) -> Trace {
        let (exit, trap) = match result {
            Ok(v) => (Exit::Code(exit_code(&v)), None),
            Err(t) => (Exit::Trap, Some(t.0)),
        };
        Trace { stdout: m.rt.stdout, stderr: m.rt.stderr, files: m.rt.files, exit, trap }
    }

    /// Length-prefixed sections, stable across runs.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut section = |name: &str, body: &[u8]| {
            let text = String::from_utf8_lossy(body);
            let _ = writeln!(out, "{name} {}", body.len());
            out.push_str(&text);
            out.push('\n');
        };
        section("STDOUT", &self.stdout);
        section("STDERR", &self.stderr);
        let mut files = Vec::new();
        for (name, data) in &self.files {
            files.extend(format!("{} {} {}\n", name.len(), name, data.len()).bytes());
            files.extend_from_slice(data);
            files.push(b'\n');
        }
        section("FILES", &files);
        let exit = match self.exit {
            Exit::Code(n) => n.to_string(),
            Exit::Trap => "trap".to_string(),
        };
        section("EXIT", exit.as_bytes());
        out
    }

    pub fn same_behavior(&self, other: &Trace) -> bool {
        self.stdout == other.stdout && self.stderr == other.stderr && self.files == other.files && self.exit == other.exit
    }

    /// First difference, if any, as a one-line description.
    pub fn diff(&self, other: &Trace) -> Option<String> {
        fn bytes(name: &str, a: &[u8], b: &[u8]) -> Option<String> {
            if a == b {
                return None;
            }
            let at = a.iter().zip(b).position(|(x, y)| x != y).unwrap_or(a.len().min(b.len()));
            Some(format!(
                "{name} differs at byte {at}: {:?} vs {:?}",
                String::from_utf8_lossy(&a[at.min(a.len())..(at + 20).min(a.len())]),
                String::from_utf8_lossy(&b[at.min(b.len())..(at + 20).min(b.len())])
            ))
        }
        if let Some(d) = bytes("stdout", &self.stdout, &other.stdout) {
            return Some(d);
        }
        if let Some(d) = bytes("stderr", &self.stderr, &other.stderr) {
            return Some(d);
        }
        for name in self.files.keys().chain(other.files.keys()) {
            match (self.files.get(name), other.files.get(name)) {
                (Some(a), Some(b)) => {
                    if let Some(d) = bytes(&format!("file {name}"), a, b) {
                        return Some(d);
                    }
                }
                _ => return Some(format!("file {name} exists on one side only")),
            }
        }
        if self.exit != other.exit {
            return Some(format!(
                "exit {:?} ({}) vs {:?} ({})",
                self.exit,
                self.trap.as_deref().unwrap_or("-"),
                other.exit,
                other.trap.as_deref().unwrap_or("-")
            ));
        }
        None
    }
}
