//! One-call drivers that run every analysis over a source text.

use crate::api::default_nonposix;
use crate::errsrc::{analyze_all, SourceMap};
use crate::frontend::ast::Program;
use crate::frontend::{load, FrontendError, SymbolTable};
use crate::ir::{lower, IrProgram};
use crate::streamsets::{analyze as solve_streams, Constraint, StreamFacts};
use crate::support::{assignment_pairs, detect_seed_reasons, propagate_unsupported, SupportVerdict};
use crate::transform::{transform_program, Analyses, TransformError, TransformOutput};
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct Options {
    /// Library functions treated as non-POSIX extensions.
    pub nonposix: Vec<String>,
}

impl Default for Options {
    fn default() -> Self {
        Options { nonposix: default_nonposix() }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Timings {
    pub frontend: Duration,
    pub streams: Duration,
    pub sources: Duration,
    pub support: Duration,
}

/// A program together with all of its analysis results.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub prog: Program,
    pub st: SymbolTable,
    pub ir: IrProgram,
    pub constraints: Vec<Constraint>,
    pub facts: StreamFacts,
    pub sources: SourceMap,
    pub verdict: SupportVerdict,
    pub timings: Timings,
}

pub fn analyze(src: &str, opts: &Options) -> Result<Analysis, FrontendError> {
    let t0 = Instant::now();
    let (prog, st) = load(src, &opts.nonposix)?;
    let ir = lower(&prog, &st);
    let t1 = Instant::now();
    let (constraints, facts) = solve_streams(&ir, &st);
    let t2 = Instant::now();
    let sources = analyze_all(&ir, &st);
    let t3 = Instant::now();
    let seeds = detect_seed_reasons(&prog, &st, &ir, &constraints, &facts, &sources);
    let verdict = propagate_unsupported(&assignment_pairs(&constraints), &seeds, &st.stream_locations());
    let t4 = Instant::now();
    let timings = Timings { frontend: t1 - t0, streams: t2 - t1, sources: t3 - t2, support: t4 - t3 };
    Ok(Analysis { prog, st, ir, constraints, facts, sources, verdict, timings })
}

impl Analysis {
    pub fn analyses(&self) -> Analyses<'_> {
        Analyses {
            prog: &self.prog,
            st: &self.st,
            ir: &self.ir,
            constraints: &self.constraints,
            facts: &self.facts,
            sources: &self.sources,
            verdict: &self.verdict,
        }
    }

    pub fn transform(&self) -> Result<TransformOutput, TransformError> {
        transform_program(&self.analyses())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// Parses, analyzes and transforms in one step.
pub fn run(src: &str, opts: &Options) -> Result<(Analysis, TransformOutput), PipelineError> {
    let a = analyze(src, opts)?;
    let out = a.transform()?;
    Ok((a, out))
}
