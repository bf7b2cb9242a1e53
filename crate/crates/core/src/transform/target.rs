//! The emitted program: a small Rust-shaped language with typed streams.

use super::types::{Bound, TargetType};
use crate::frontend::ast::StdStream;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TType {
    Int,
    Str,
    Unit,
    VoidPtr,
    /// `*mut i32`, used for error parameters.
    IntPtr,
    Record(String),
    RecordPtr(String),
    Func(Vec<TType>, Box<TType>),
    /// An untouched libc stream.
    LibcFile,
    Stream(TargetType),
    Tuple(Vec<TType>),
}

impl TType {
    pub fn stream(&self) -> Option<TargetType> {
        match self {
            TType::Stream(t) => Some(*t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpenMode {
    Read,
    Write,
    Append,
    ReadUpdate,
    WriteUpdate,
    AppendUpdate,
}

impl OpenMode {
    pub fn parse(mode: &[u8]) -> Option<OpenMode> {
        let m: Vec<u8> = mode.iter().copied().filter(|c| *c != b'b').collect();
        Some(match m.as_slice() {
            b"r" => OpenMode::Read,
            b"w" => OpenMode::Write,
            b"a" => OpenMode::Append,
            b"r+" => OpenMode::ReadUpdate,
            b"w+" => OpenMode::WriteUpdate,
            b"a+" => OpenMode::AppendUpdate,
            _ => return None,
        })
    }

    /// The equivalent libc mode string.
    pub fn libc(self) -> &'static str {
        match self {
            OpenMode::Read => "r",
            OpenMode::Write => "w",
            OpenMode::Append => "a",
            OpenMode::ReadUpdate => "r+",
            OpenMode::WriteUpdate => "w+",
            OpenMode::AppendUpdate => "a+",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PipeMode {
    /// The parent reads the child's output.
    Read,
    /// The parent writes the child's input.
    Write,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Builtin {
    Drop,
    Some,
    BoxNew,
    BoxIntoRaw,
    BufReaderNew,
    BufWriterNew,
    Std(StdStream),
    /// Yields `io::Result<File>`.
    Open(OpenMode),
    /// Yields `io::Result<Child>`.
    Spawn(PipeMode),
    NewRecord(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    AsMut,
    Unwrap,
    /// `Result` to `Option`.
    Ok,
    IsNone,
    IsSome,
    /// Raw pointer to the contents of a box.
    AsMutPtr,
    Wait,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::AsMut => "as_mut",
            Method::Unwrap => "unwrap",
            Method::Ok => "ok",
            Method::IsNone => "is_none",
            Method::IsSome => "is_some",
            Method::AsMutPtr => "as_mut_ptr",
            Method::Wait => "wait",
        }
    }
}

/// Stream operations. Each yields the value the corresponding libc call would return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IoOp {
    /// `fgetc`, `getc`
    ReadByte,
    /// `fread(buf, size, n)`
    ReadItems,
    /// `fgets(buf, n)`
    ReadLineInto,
    /// `getline(buf)`
    ReadLine,
    /// `fscanf` with the original directives.
    Scan(Vec<u8>),
    /// `fwrite(s, size, n)`
    WriteItems,
    /// `fputc`, `putc`
    WriteByte,
    /// `fputs`
    WriteStr,
    /// `fprintf` with the original directives.
    Print(Vec<u8>),
    Flush,
    /// `fseek(off, whence)`
    Seek,
    Tell,
    Rewind,
}

impl IoOp {
    pub fn required(&self) -> super::types::Trait {
        use super::types::Trait;
        match self {
            IoOp::ReadByte | IoOp::ReadItems => Trait::Read,
            IoOp::ReadLineInto | IoOp::ReadLine | IoOp::Scan(_) => Trait::BufRead,
            IoOp::WriteItems | IoOp::WriteByte | IoOp::WriteStr | IoOp::Print(_) | IoOp::Flush => Trait::Write,
            IoOp::Seek | IoOp::Tell | IoOp::Rewind => Trait::Seek,
        }
    }

    pub fn is_write(&self) -> bool {
        self.required() == super::types::Trait::Write
    }
}

/// Error-variable bookkeeping attached to a stream operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Guard {
    /// Place holding the flags: a local or a dereferenced parameter.
    pub var: TExpr,
    /// Set bit 1 on end of file and bit 2 on other errors.
    pub record: bool,
    /// Bits cleared when the operation succeeds.
    pub clear: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TBinOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    BitAnd,
}

impl TBinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            TBinOp::Eq => "==",
            TBinOp::Ne => "!=",
            TBinOp::Lt => "<",
            TBinOp::Le => "<=",
            TBinOp::Gt => ">",
            TBinOp::Ge => ">=",
            TBinOp::Add => "+",
            TBinOp::Sub => "-",
            TBinOp::Mul => "*",
            TBinOp::Div => "/",
            TBinOp::Rem => "%",
            TBinOp::BitAnd => "&",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            TBinOp::Eq | TBinOp::Ne | TBinOp::Lt | TBinOp::Le | TBinOp::Gt | TBinOp::Ge => 1,
            TBinOp::BitAnd => 2,
            TBinOp::Add | TBinOp::Sub => 3,
            TBinOp::Mul | TBinOp::Div | TBinOp::Rem => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TExpr {
    Int(i64),
    Char(u8),
    Str(Vec<u8>),
    Unit,
    NoneLit,
    /// `ptr::null_mut()` for untouched streams.
    NullPtr,
    Var(String),
    Field(Box<TExpr>, String),
    Deref(Box<TExpr>),
    AddrOf { raw: bool, expr: Box<TExpr> },
    Builtin { f: Builtin, args: Vec<TExpr> },
    Method { recv: Box<TExpr>, m: Method },
    /// `recv.map(|binder| body)`
    MapSome { expr: Box<TExpr>, binder: String, body: Box<TExpr> },
    /// The input (`write`) or output pipe of a child.
    ChildPipe { child: Box<TExpr>, write: bool },
    Io { recv: Box<TExpr>, op: IoOp, args: Vec<TExpr>, guard: Option<Box<Guard>> },
    /// A libc call kept verbatim.
    Libc { name: String, args: Vec<TExpr> },
    LibcStd(StdStream),
    Call { func: String, args: Vec<TExpr> },
    CallIndirect { var: Box<TExpr>, args: Vec<TExpr> },
    Binary { op: TBinOp, lhs: Box<TExpr>, rhs: Box<TExpr> },
    Not(Box<TExpr>),
    Neg(Box<TExpr>),
    Cast { expr: Box<TExpr>, ty: TType },
    Tuple(Vec<TExpr>),
    Block { stmts: Vec<TStmt>, tail: Box<TExpr> },
}

impl TExpr {
    pub fn var(name: &str) -> TExpr {
        TExpr::Var(name.to_string())
    }

    pub fn method(self, m: Method) -> TExpr {
        TExpr::Method { recv: Box::new(self), m }
    }

    pub fn builtin(f: Builtin, args: Vec<TExpr>) -> TExpr {
        TExpr::Builtin { f, args }
    }

    pub fn addr_of(self, raw: bool) -> TExpr {
        TExpr::AddrOf { raw, expr: Box::new(self) }
    }

    pub fn binary(op: TBinOp, lhs: TExpr, rhs: TExpr) -> TExpr {
        TExpr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompoundOp {
    /// `|=`
    Or,
    /// `&= !`
    AndNot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TStmt {
    Let { name: String, ty: Option<TType>, init: Option<TExpr> },
    /// `let (a, _) = init;` with `None` for ignored components.
    LetTuple { names: Vec<Option<String>>, init: TExpr },
    Assign { lhs: TExpr, rhs: TExpr },
    Compound { op: CompoundOp, lhs: TExpr, rhs: TExpr },
    Expr(TExpr),
    If { cond: TExpr, then: Vec<TStmt>, els: Option<Vec<TStmt>> },
    While { cond: TExpr, body: Vec<TStmt> },
    Return(Option<TExpr>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TParam {
    pub name: String,
    pub ty: TType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TFunc {
    pub name: String,
    pub params: Vec<TParam>,
    pub ret: TType,
    pub body: Vec<TStmt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TRecord {
    pub name: String,
    pub fields: Vec<(String, TType)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TGlobal {
    pub name: String,
    pub ty: TType,
    pub init: Option<TExpr>,
}

/// A subtrait standing for several bounds at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedTrait {
    pub name: String,
    pub bound: Bound,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetProgram {
    pub traits: Vec<CombinedTrait>,
    pub records: Vec<TRecord>,
    pub globals: Vec<TGlobal>,
    pub functions: Vec<TFunc>,
}

impl TargetProgram {
    pub fn func(&self, name: &str) -> Option<&TFunc> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn record(&self, name: &str) -> Option<&TRecord> {
        self.records.iter().find(|r| r.name == name)
    }
}
