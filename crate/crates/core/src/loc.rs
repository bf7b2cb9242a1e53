use crate::frontend::ast::NodeId;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FuncId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordId(pub u32);

/// A slot that may hold a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Location {
    Global(u32),
    /// Parameters come first in the local numbering.
    Local(FuncId, u32),
    /// The value returned by a function.
    Ret(FuncId),
    /// A stream value that never lands in a named slot, keyed by the expression producing it.
    Anon(FuncId, NodeId),
    /// One slot per record field, shared by every instance.
    Field(RecordId, u32),
}

impl Location {
    pub fn func(self) -> Option<FuncId> {
        match self {
            Location::Local(f, _) | Location::Ret(f) | Location::Anon(f, _) => Some(f),
            _ => None,
        }
    }

    /// Reachable from any function without being passed as an argument.
    pub fn is_shared(self) -> bool {
        matches!(self, Location::Global(_) | Location::Field(..))
    }
}
