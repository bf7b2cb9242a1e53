//! Rewrites supported streams to typed target-language values.

pub mod decide;
pub mod errplan;
pub mod print;
pub mod rewrite;
pub mod target;
pub mod types;

use crate::errsrc::SourceMap;
use crate::frontend::ast::Program;
use crate::frontend::SymbolTable;
use crate::ir::IrProgram;
use crate::streamsets::{Constraint, StreamFacts};
use crate::support::SupportVerdict;
use serde::Serialize;
use thiserror::Error;

pub use decide::Layout;
pub use errplan::ErrPlan;
pub use rewrite::Diagnostic;
pub use target::TargetProgram;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TransformReport {
    pub api_calls_total: usize,
    pub api_calls_replaced: usize,
    pub api_calls_remaining: usize,
    pub dyn_locations_introduced: usize,
}

#[derive(Debug, Clone)]
pub struct TransformOutput {
    pub program: TargetProgram,
    pub report: TransformReport,
    pub layout: Layout,
    pub plan: ErrPlan,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Diagnostics(Vec<Diagnostic>),
}

/// Inputs to the transformation: the program and every analysis result.
pub struct Analyses<'a> {
    pub prog: &'a Program,
    pub st: &'a SymbolTable,
    pub ir: &'a IrProgram,
    pub constraints: &'a [Constraint],
    pub facts: &'a StreamFacts,
    pub sources: &'a SourceMap,
    pub verdict: &'a SupportVerdict,
}

pub fn transform_program(a: &Analyses<'_>) -> Result<TransformOutput, TransformError> {
    let layout = decide::layout(a.prog, a.st, a.ir, a.constraints, a.facts, a.verdict);
    let plan = errplan::plan(a.ir, a.sources, &layout.classes, |l| a.verdict.is_supported(l));
    let mut rw = rewrite::Rewriter {
        st: a.st,
        ir: a.ir,
        facts: a.facts,
        verdict: a.verdict,
        layout: &layout,
        plan: &plan,
        diags: Vec::new(),
        counts: Default::default(),
    };
    let program = rw.program(a.prog);
    if !rw.diags.is_empty() {
        return Err(TransformError::Diagnostics(rw.diags));
    }
    let report = TransformReport {
        api_calls_total: rw.counts.total,
        api_calls_replaced: rw.counts.replaced,
        api_calls_remaining: rw.counts.total - rw.counts.replaced,
        dyn_locations_introduced: layout.dyn_count(),
    };
    Ok(TransformOutput { program, report, layout, plan })
}
