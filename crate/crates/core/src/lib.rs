//! Analysis and rewriting of C-style `FILE *` stream code written in MiniC.
//!
//! The pipeline parses a program, lowers it to labelled control-flow graphs,
//! solves origin and capability sets for every stream location, finds the
//! operations whose failures each `feof`/`ferror` observes, decides which
//! locations can be migrated, and emits a typed target program. The
//! [`validator`] module re-executes source and target to compare behavior.

pub mod api;
pub mod errsrc;
pub mod frontend;
pub mod ir;
pub mod loc;
pub mod pipeline;
pub mod sets;
pub mod streamsets;
pub mod support;
pub mod synth;
pub mod transform;
pub mod validator;

pub use api::{ApiFn, ApiSpec, LibFn};
pub use errsrc::{CheckResult, SourceMap, SourceResult};
pub use frontend::{FrontendError, SymbolTable};
pub use ir::{IrProgram, Label};
pub use loc::{FuncId, Location};
pub use pipeline::{analyze, run, Analysis, Options, PipelineError};
pub use sets::{CapSet, Capability, Origin, OriginSet};
pub use streamsets::{Constraint, Facts, StreamFacts};
pub use support::{Reason, ReasonCount, SupportVerdict};
pub use transform::{Diagnostic, TargetProgram, TransformError, TransformOutput, TransformReport};
pub use validator::{Trace, TypeDiagnostic, TypeErrorKind, VfsSpec, VfsState};
