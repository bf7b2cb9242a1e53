//! Target stream types, the type decision, and the coercion tables.

use crate::sets::{CapSet, Capability, Member, Origin, OriginSet, Set};
use crate::streamsets::Facts;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Trait {
    Read,
    BufRead,
    Write,
    Seek,
}

impl Member for Trait {
    const ALL: &'static [Self] = &[Trait::Read, Trait::BufRead, Trait::Write, Trait::Seek];
    fn index(self) -> u32 {
        self as u32
    }
    fn name(self) -> &'static str {
        match self {
            Trait::Read => "Read",
            Trait::BufRead => "BufRead",
            Trait::Write => "Write",
            Trait::Seek => "Seek",
        }
    }
}

pub type Bound = Set<Trait>;

/// Maps capabilities to traits, dropping `close`. `BufRead` subsumes `Read`.
pub fn bound_of(caps: CapSet) -> Bound {
    let mut b = Bound::empty();
    for c in caps.iter() {
        match c {
            Capability::Read => b.insert(Trait::Read),
            Capability::BufRead => b.insert(Trait::BufRead),
            Capability::Write => b.insert(Trait::Write),
            Capability::Seek => b.insert(Trait::Seek),
            Capability::Close => false,
        };
    }
    if b.contains(Trait::BufRead) {
        b.remove(Trait::Read);
    }
    b
}

/// Concatenated trait names in canonical order; `Any` for the empty bound.
pub fn bound_name(b: Bound) -> String {
    if b.is_empty() {
        "Any".into()
    } else {
        b.names().concat()
    }
}

/// Traits a bound actually provides once supertraits are taken into account.
pub fn bound_closure(b: Bound) -> Bound {
    let mut out = b;
    if b.contains(Trait::BufRead) {
        out.insert(Trait::Read);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaseType {
    StdinT,
    StdoutT,
    StderrT,
    FileT,
    BufReaderFile,
    BufWriterFile,
    ChildT,
}

impl BaseType {
    pub const ALL: [BaseType; 7] = [
        BaseType::StdinT,
        BaseType::StdoutT,
        BaseType::StderrT,
        BaseType::FileT,
        BaseType::BufReaderFile,
        BaseType::BufWriterFile,
        BaseType::ChildT,
    ];

    pub fn rust_name(self) -> &'static str {
        match self {
            BaseType::StdinT => "Stdin",
            BaseType::StdoutT => "Stdout",
            BaseType::StderrT => "Stderr",
            BaseType::FileT => "File",
            BaseType::BufReaderFile => "BufReader<File>",
            BaseType::BufWriterFile => "BufWriter<File>",
            BaseType::ChildT => "Child",
        }
    }

    pub fn origin(self) -> Origin {
        match self {
            BaseType::StdinT => Origin::Stdin,
            BaseType::StdoutT => Origin::Stdout,
            BaseType::StderrT => Origin::Stderr,
            BaseType::FileT | BaseType::BufReaderFile | BaseType::BufWriterFile => Origin::File,
            BaseType::ChildT => Origin::Pipe,
        }
    }
}

/// Traits implemented by each base type.
pub fn trait_table(b: BaseType) -> Bound {
    use Trait::*;
    match b {
        BaseType::StdinT => Bound::of(&[Read, BufRead]),
        BaseType::StdoutT | BaseType::StderrT => Bound::of(&[Write]),
        BaseType::FileT => Bound::of(&[Read, Write, Seek]),
        BaseType::BufReaderFile => Bound::of(&[Read, BufRead, Seek]),
        BaseType::BufWriterFile => Bound::of(&[Write, Seek]),
        BaseType::ChildT => Bound::of(&[Read, Write]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    OwnedBase(BaseType),
    PtrBase(BaseType),
    OwnedDyn(Bound),
    PtrDyn(Bound),
    GenericParam(Bound),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Owned,
    Ptr,
    OwnedDyn,
    PtrDyn,
    Generic,
}

impl Shape {
    pub fn category(self) -> Category {
        match self {
            Shape::OwnedBase(_) => Category::Owned,
            Shape::PtrBase(_) => Category::Ptr,
            Shape::OwnedDyn(_) => Category::OwnedDyn,
            Shape::PtrDyn(_) => Category::PtrDyn,
            Shape::GenericParam(_) => Category::Generic,
        }
    }

    pub fn is_owning(self) -> bool {
        matches!(self, Shape::OwnedBase(_) | Shape::OwnedDyn(_) | Shape::GenericParam(_))
    }

    pub fn is_dyn(self) -> bool {
        matches!(self, Shape::OwnedDyn(_) | Shape::PtrDyn(_))
    }

    pub fn base(self) -> Option<BaseType> {
        match self {
            Shape::OwnedBase(b) | Shape::PtrBase(b) => Some(b),
            _ => None,
        }
    }

    /// Traits a receiver of this shape can call.
    pub fn provides(self) -> Bound {
        match self {
            Shape::OwnedBase(b) | Shape::PtrBase(b) => trait_table(b),
            Shape::OwnedDyn(b) | Shape::PtrDyn(b) | Shape::GenericParam(b) => bound_closure(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TargetType {
    pub shape: Shape,
    pub nullable: bool,
}

impl TargetType {
    pub fn new(shape: Shape) -> Self {
        TargetType { shape, nullable: false }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::OwnedBase(b) => f.write_str(b.rust_name()),
            Shape::PtrBase(b) => write!(f, "*mut {}", b.rust_name()),
            Shape::OwnedDyn(b) => write!(f, "Box<dyn {}>", bound_name(*b)),
            Shape::PtrDyn(b) => write!(f, "*mut dyn {}", bound_name(*b)),
            Shape::GenericParam(b) => write!(f, "impl {}", bound_name(*b)),
        }
    }
}

impl fmt::Display for TargetType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.nullable {
            write!(f, "Option<{}>", self.shape)
        } else {
            write!(f, "{}", self.shape)
        }
    }
}

pub fn base_of_origin(o: Origin, caps: CapSet) -> BaseType {
    match o {
        Origin::Stdin => BaseType::StdinT,
        Origin::Stdout => BaseType::StdoutT,
        Origin::Stderr => BaseType::StderrT,
        Origin::File => {
            if !caps.contains(Capability::Write) {
                BaseType::BufReaderFile
            } else if !caps.contains(Capability::Read) && !caps.contains(Capability::BufRead) {
                BaseType::BufWriterFile
            } else {
                BaseType::FileT
            }
        }
        Origin::Pipe => BaseType::ChildT,
    }
}

/// The type decision over origins and capabilities.
pub fn decide_shape(origins: OriginSet, caps: CapSet, is_param: bool) -> Shape {
    let close = caps.contains(Capability::Close);
    if is_param {
        return Shape::GenericParam(bound_of(caps));
    }
    match origins.single() {
        Some(o) => {
            let b = base_of_origin(o, caps);
            if close {
                Shape::OwnedBase(b)
            } else {
                Shape::PtrBase(b)
            }
        }
        None if close => Shape::OwnedDyn(bound_of(caps)),
        None => Shape::PtrDyn(bound_of(caps)),
    }
}

pub fn decide_type(facts: Facts, is_param: bool) -> TargetType {
    TargetType::new(decide_shape(facts.origins, facts.caps, is_param))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RvCoercion {
    Identity,
    BufReaderWrap,
    BufWriterWrap,
    AddrOf,
    BoxNew,
    BoxToRaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArgCoercion {
    /// Ownership moves into the callee.
    Move,
    MutRef,
    Identity,
    BoxAsMut,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoercionError {
    #[error("no coercion from {rhs:?} to {lhs:?}")]
    EmptyCell { lhs: Category, rhs: Category },
    #[error("closing parameter needs an owning argument, found {0:?}")]
    NotOwning(Category),
}

/// Right-value conversion for `lhs = rhs`. Generic right values behave as owned ones.
pub fn coerce_rvalue(lhs: Shape, rhs: Shape) -> Result<RvCoercion, CoercionError> {
    use Category::*;
    let rc = match rhs.category() {
        Generic => Owned,
        c => c,
    };
    Ok(match (lhs.category(), rc) {
        (Owned, Owned) => match (lhs.base(), rhs.base()) {
            (Some(BaseType::BufReaderFile), Some(BaseType::FileT)) => RvCoercion::BufReaderWrap,
            (Some(BaseType::BufWriterFile), Some(BaseType::FileT)) => RvCoercion::BufWriterWrap,
            _ => RvCoercion::Identity,
        },
        (Ptr, Owned) | (PtrDyn, Owned) => RvCoercion::AddrOf,
        (Ptr, Ptr) | (OwnedDyn, OwnedDyn) | (PtrDyn, Ptr) | (PtrDyn, PtrDyn) => RvCoercion::Identity,
        (OwnedDyn, Owned) => RvCoercion::BoxNew,
        (PtrDyn, OwnedDyn) => RvCoercion::BoxToRaw,
        (l, r) => return Err(CoercionError::EmptyCell { lhs: l, rhs: r }),
    })
}

/// Argument conversion for a user-function parameter.
pub fn coerce_arg(param_close: bool, arg: Shape) -> Result<ArgCoercion, CoercionError> {
    if param_close {
        return if arg.is_owning() { Ok(ArgCoercion::Move) } else { Err(CoercionError::NotOwning(arg.category())) };
    }
    Ok(match arg.category() {
        Category::Owned | Category::Generic => ArgCoercion::MutRef,
        Category::Ptr | Category::PtrDyn => ArgCoercion::Identity,
        Category::OwnedDyn => ArgCoercion::BoxAsMut,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Capability::*;

    #[test]
    fn worked_example_types() {
        let x = decide_shape(OriginSet::of(&[Origin::File]), CapSet::of(&[Seek, Read]), false);
        assert_eq!(x, Shape::PtrBase(BaseType::BufReaderFile));
        let z = decide_shape(OriginSet::of(&[Origin::File, Origin::Stdin]), CapSet::of(&[Read]), false);
        assert_eq!(z, Shape::PtrDyn(Bound::of(&[Trait::Read])));
        let p = decide_shape(OriginSet::of(&[Origin::Stdout]), CapSet::of(&[Write]), true);
        assert_eq!(p, Shape::GenericParam(Bound::of(&[Trait::Write])));
    }

    #[test]
    fn bufread_subsumes_read() {
        assert_eq!(bound_of(CapSet::of(&[Read, BufRead, Close])), Bound::of(&[Trait::BufRead]));
        assert_eq!(bound_name(Bound::of(&[Trait::Seek, Trait::Read])), "ReadSeek");
    }

    #[test]
    fn table_one_cells() {
        let f = Shape::OwnedBase(BaseType::FileT);
        assert_eq!(coerce_rvalue(Shape::OwnedBase(BaseType::BufWriterFile), f), Ok(RvCoercion::BufWriterWrap));
        assert_eq!(coerce_rvalue(Shape::PtrDyn(Bound::empty()), f), Ok(RvCoercion::AddrOf));
        assert!(coerce_rvalue(f, Shape::PtrBase(BaseType::FileT)).is_err());
        assert_eq!(coerce_arg(false, f), Ok(ArgCoercion::MutRef));
        assert_eq!(coerce_arg(true, f), Ok(ArgCoercion::Move));
    }
}
