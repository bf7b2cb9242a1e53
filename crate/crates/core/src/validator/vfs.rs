//! Virtual filesystem inputs and fault schedules for differential runs.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultKind {
    /// Reads behave as if the data ended.
    Eof,
    /// Reads and writes fail with an error.
    Other,
}

/// Once `after` bytes have moved through a matching handle, every further transfer fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    /// `stdin`, `stdout`, `stderr`, `file:NAME`, `pipe:CMD` or `*`.
    pub target: String,
    pub after: usize,
    pub kind: FaultKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Command {
    #[serde(default)]
    pub output: String,
    #[serde(default)]
    pub status: i64,
}

/// Initial state shared by both executions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VfsState {
    #[serde(default)]
    pub stdin: String,
    #[serde(default)]
    pub files: BTreeMap<String, String>,
    #[serde(default)]
    pub commands: BTreeMap<String, Command>,
    #[serde(default)]
    pub faults: Vec<Fault>,
}

/// A `.vfs.json` file: one initial state and any number of fault schedules.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VfsSpec {
    #[serde(flatten)]
    pub base: VfsState,
    #[serde(default)]
    pub schedules: Vec<Vec<Fault>>,
}

impl VfsSpec {
    /// One state per schedule; a spec without schedules yields the base state alone.
    pub fn states(&self) -> Vec<VfsState> {
        if self.schedules.is_empty() {
            return vec![self.base.clone()];
        }
        self.schedules
            .iter()
            .map(|s| {
                let mut st = self.base.clone();
                st.faults.extend(s.iter().cloned());
                st
            })
            .collect()
    }
}

impl Fault {
    pub fn matches(&self, selector: &str) -> bool {
        self.target == "*" || self.target == selector
    }

    /// Parses `TARGET:AFTER:KIND`, e.g. `file:in.txt:3:eof` or `*:0:other`.
    pub fn parse(s: &str) -> Option<Fault> {
        let mut parts: Vec<&str> = s.rsplitn(3, ':').collect();
        parts.reverse();
        let [target, after, kind] = parts.as_slice() else { return None };
        let kind = match *kind {
            "eof" => FaultKind::Eof,
            "other" => FaultKind::Other,
            _ => return None,
        };
        Some(Fault { target: target.to_string(), after: after.parse().ok()?, kind })
    }
}

/// A small spread of schedules touching every handle: none, early and late faults of both kinds.
pub fn standard_schedules() -> Vec<Vec<Fault>> {
    let f = |after, kind| vec![Fault { target: "*".into(), after, kind }];
    vec![vec![], f(0, FaultKind::Other), f(2, FaultKind::Eof), f(5, FaultKind::Other)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_fault() {
        assert_eq!(
            Fault::parse("file:a.txt:3:eof"),
            Some(Fault { target: "file:a.txt".into(), after: 3, kind: FaultKind::Eof })
        );
        assert_eq!(Fault::parse("*:0:other").map(|f| f.target), Some("*".into()));
        assert_eq!(Fault::parse("stdin:x:eof"), None);
    }

    #[test]
    fn spec_round_trip() {
        let json = r#"{"stdin":"hi","files":{"a":"xy"},"schedules":[[],[{"target":"*","after":1,"kind":"other"}]]}"#;
        let spec: VfsSpec = serde_json::from_str(json).unwrap();
        let states = spec.states();
        assert_eq!(states.len(), 2);
        assert_eq!(states[1].faults.len(), 1);
        assert_eq!(states[0].files["a"], "xy");
    }
}
