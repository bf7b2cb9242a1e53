//! MiniC parsing and name resolution.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod resolve;

use ast::Pos;
use thiserror::Error;

pub use parser::parse;
pub use resolve::{resolve, SymbolTable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {message}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("{pos}: `{name}` is undeclared")]
    Undeclared { name: String, pos: Pos },
    #[error("{pos}: duplicate definition of `{name}`")]
    Duplicate { name: String, pos: Pos },
    #[error("{pos}: `{name}` is a library function and cannot be redefined")]
    Reserved { name: String, pos: Pos },
    #[error("{pos}: `{name}` is not a function")]
    NotCallable { name: String, pos: Pos },
    #[error("{pos}: field access `.{field}` on a value that is not a record")]
    NotARecord { field: String, pos: Pos },
    #[error("{pos}: record `{record}` has no field `{field}`")]
    NoSuchField { record: String, field: String, pos: Pos },
    #[error("{pos}: {message}")]
    Invalid { message: String, pos: Pos },
}

impl ResolveError {
    pub fn pos(&self) -> Pos {
        match self {
            ResolveError::Undeclared { pos, .. }
            | ResolveError::Duplicate { pos, .. }
            | ResolveError::Reserved { pos, .. }
            | ResolveError::NotCallable { pos, .. }
            | ResolveError::NotARecord { pos, .. }
            | ResolveError::NoSuchField { pos, .. }
            | ResolveError::Invalid { pos, .. } => *pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    Resolve(Vec<ResolveError>),
}

impl FrontendError {
    /// One `file:line:col: message` line per problem.
    pub fn render(&self, file: &str) -> Vec<String> {
        match self {
            FrontendError::Syntax(e) => vec![format!("{file}:{e}")],
            FrontendError::Resolve(errs) => errs.iter().map(|e| format!("{file}:{e}")).collect(),
        }
    }
}

/// Parses and resolves in one step.
pub fn load(src: &str, nonposix: &[String]) -> Result<(ast::Program, SymbolTable), FrontendError> {
    let mut prog = parse(src)?;
    let symbols = resolve(&mut prog, nonposix).map_err(FrontendError::Resolve)?;
    Ok((prog, symbols))
}
