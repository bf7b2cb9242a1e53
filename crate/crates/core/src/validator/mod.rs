//! Checks transformed programs statically and by differential execution.

pub mod exec_source;
pub mod exec_target;
pub mod machine;
pub mod stdio;
pub mod trace;
pub mod typeck;
pub mod vfs;

use crate::frontend::ast::Program;
use crate::frontend::SymbolTable;
use crate::transform::TargetProgram;

pub use trace::{Exit, Trace};
pub use typeck::{check, TypeDiagnostic, TypeErrorKind};
pub use vfs::{standard_schedules, Fault, FaultKind, VfsSpec, VfsState};

/// Outcome of running both programs on one initial state.
#[derive(Debug, Clone)]
pub struct DiffRun {
    pub state: VfsState,
    pub source: Trace,
    pub target: Trace,
}

impl DiffRun {
    pub fn agrees(&self) -> bool {
        self.source.same_behavior(&self.target)
    }

    pub fn difference(&self) -> Option<String> {
        self.source.diff(&self.target)
    }
}

pub fn differential(prog: &Program, st: &SymbolTable, target: &TargetProgram, state: &VfsState) -> DiffRun {
    DiffRun {
        state: state.clone(),
        source: exec_source::run(prog, st, state),
        target: exec_target::run(target, state),
    }
}

/// Runs every state of a spec.
pub fn differential_all(prog: &Program, st: &SymbolTable, target: &TargetProgram, spec: &VfsSpec) -> Vec<DiffRun> {
    spec.states().iter().map(|s| differential(prog, st, target, s)).collect()
}
