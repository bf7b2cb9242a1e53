//! The libc stream surface understood by the tool.

use crate::sets::{CapSet, Capability, Origin};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiFn {
    Fopen,
    Popen,
    Fclose,
    Pclose,
    Fread,
    Fgetc,
    Getc,
    Fgets,
    Fscanf,
    Getline,
    Fwrite,
    Fputc,
    Putc,
    Fputs,
    Fprintf,
    Fflush,
    Fseek,
    Ftell,
    Rewind,
    Feof,
    Ferror,
    Clearerr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Stream,
    Int,
    Str,
    /// A path that receives a string result.
    OutStr,
    /// `void *` buffer or NULL.
    Buffer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApiRole {
    Ctor(Origin),
    Close,
    Op,
    Check,
    Clear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetKind {
    Int,
    Stream,
    Void,
}

#[derive(Debug, Clone, Copy)]
pub struct ApiSpec {
    pub func: ApiFn,
    pub name: &'static str,
    pub params: &'static [ArgKind],
    /// Extra arguments after `params` (format directives).
    pub variadic: bool,
    pub stream_arg: Option<usize>,
    pub caps: CapSet,
    pub failable: bool,
    pub role: ApiRole,
    pub ret: RetKind,
}

impl ApiSpec {
    pub fn is_check(&self) -> bool {
        matches!(self.func, ApiFn::Feof | ApiFn::Ferror)
    }
}

use ArgKind as A;

macro_rules! spec {
    ($f:ident, $name:literal, [$($p:ident),*], $var:expr, $sa:expr, [$($c:ident),*], $fail:expr, $role:expr, $ret:ident) => {
        ApiSpec {
            func: ApiFn::$f,
            name: $name,
            params: &[$(A::$p),*],
            variadic: $var,
            stream_arg: $sa,
            caps: CapSet::empty(),
            failable: $fail,
            role: $role,
            ret: RetKind::$ret,
        }
        .with_caps(&[$(Capability::$c),*])
    };
}

impl ApiSpec {
    fn with_caps(mut self, cs: &[Capability]) -> Self {
        self.caps = CapSet::of(cs);
        self
    }
}

fn build_table() -> Vec<ApiSpec> {
    use ApiRole::*;
    vec![
        spec!(Fopen, "fopen", [Str, Str], false, None, [], true, Ctor(Origin::File), Stream),
        spec!(Popen, "popen", [Str, Str], false, None, [], true, Ctor(Origin::Pipe), Stream),
        spec!(Fclose, "fclose", [Stream], false, Some(0), [Close], false, Close, Int),
        spec!(Pclose, "pclose", [Stream], false, Some(0), [Close], false, Close, Int),
        spec!(Fread, "fread", [OutStr, Int, Int, Stream], false, Some(3), [Read], true, Op, Int),
        spec!(Fgetc, "fgetc", [Stream], false, Some(0), [Read], true, Op, Int),
        spec!(Getc, "getc", [Stream], false, Some(0), [Read], true, Op, Int),
        spec!(Fgets, "fgets", [OutStr, Int, Stream], false, Some(2), [BufRead], true, Op, Int),
        spec!(Fscanf, "fscanf", [Stream, Str], true, Some(0), [BufRead], true, Op, Int),
        spec!(Getline, "getline", [OutStr, Stream], false, Some(1), [BufRead], true, Op, Int),
        spec!(Fwrite, "fwrite", [Str, Int, Int, Stream], false, Some(3), [Write], true, Op, Int),
        spec!(Fputc, "fputc", [Int, Stream], false, Some(1), [Write], true, Op, Int),
        spec!(Putc, "putc", [Int, Stream], false, Some(1), [Write], true, Op, Int),
        spec!(Fputs, "fputs", [Str, Stream], false, Some(1), [Write], true, Op, Int),
        spec!(Fprintf, "fprintf", [Stream, Str], true, Some(0), [Write], true, Op, Int),
        spec!(Fflush, "fflush", [Stream], false, Some(0), [Write], true, Op, Int),
        spec!(Fseek, "fseek", [Stream, Int, Int], false, Some(0), [Seek], true, Op, Int),
        spec!(Ftell, "ftell", [Stream], false, Some(0), [Seek], true, Op, Int),
        spec!(Rewind, "rewind", [Stream], false, Some(0), [Seek], true, Op, Void),
        spec!(Feof, "feof", [Stream], false, Some(0), [], false, Check, Int),
        spec!(Ferror, "ferror", [Stream], false, Some(0), [], false, Check, Int),
        spec!(Clearerr, "clearerr", [Stream], false, Some(0), [], false, Clear, Void),
    ]
}

static TABLE: std::sync::OnceLock<Vec<ApiSpec>> = std::sync::OnceLock::new();

/// The 22 supported API functions.
pub fn table() -> &'static [ApiSpec] {
    TABLE.get_or_init(build_table)
}

pub fn spec(f: ApiFn) -> &'static ApiSpec {
    &table()[f as usize]
}

pub fn lookup(name: &str) -> Option<&'static ApiSpec> {
    table().iter().find(|s| s.name == name)
}

/// Library functions outside the supported table. Using them makes a stream unsupported.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExtraFn {
    Setbuf,
    Setvbuf,
    Ungetc,
    Freopen,
    NonPosix(String),
}

impl ExtraFn {
    pub fn lookup(name: &str, nonposix: &[String]) -> Option<ExtraFn> {
        Some(match name {
            "setbuf" => ExtraFn::Setbuf,
            "setvbuf" => ExtraFn::Setvbuf,
            "ungetc" => ExtraFn::Ungetc,
            "freopen" => ExtraFn::Freopen,
            _ if nonposix.iter().any(|n| n == name) => ExtraFn::NonPosix(name.to_string()),
            _ => return None,
        })
    }

    pub fn name(&self) -> &str {
        match self {
            ExtraFn::Setbuf => "setbuf",
            ExtraFn::Setvbuf => "setvbuf",
            ExtraFn::Ungetc => "ungetc",
            ExtraFn::Freopen => "freopen",
            ExtraFn::NonPosix(n) => n,
        }
    }

    pub fn params(&self) -> &'static [ArgKind] {
        match self {
            ExtraFn::Setbuf => &[A::Stream, A::Buffer],
            ExtraFn::Setvbuf => &[A::Stream, A::Buffer, A::Int, A::Int],
            ExtraFn::Ungetc => &[A::Int, A::Stream],
            ExtraFn::Freopen => &[A::Str, A::Str, A::Stream],
            ExtraFn::NonPosix(_) => &[A::Stream],
        }
    }

    pub fn stream_arg(&self) -> usize {
        match self {
            ExtraFn::Ungetc => 1,
            ExtraFn::Freopen => 2,
            _ => 0,
        }
    }

    pub fn ret(&self) -> RetKind {
        match self {
            ExtraFn::Setbuf => RetKind::Void,
            ExtraFn::Freopen => RetKind::Stream,
            _ => RetKind::Int,
        }
    }
}

pub const DEFAULT_NONPOSIX: &[&str] = &["__freading", "__fwriting", "fpurge"];

pub fn default_nonposix() -> Vec<String> {
    DEFAULT_NONPOSIX.iter().map(|s| s.to_string()).collect()
}

/// Any library function the frontend accepts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LibFn {
    Api(ApiFn),
    Extra(ExtraFn),
}

impl LibFn {
    pub fn lookup(name: &str, nonposix: &[String]) -> Option<LibFn> {
        lookup(name).map(|s| LibFn::Api(s.func)).or_else(|| ExtraFn::lookup(name, nonposix).map(LibFn::Extra))
    }

    pub fn name(&self) -> &str {
        match self {
            LibFn::Api(f) => spec(*f).name,
            LibFn::Extra(e) => e.name(),
        }
    }

    pub fn params(&self) -> &'static [ArgKind] {
        match self {
            LibFn::Api(f) => spec(*f).params,
            LibFn::Extra(e) => e.params(),
        }
    }

    pub fn variadic(&self) -> bool {
        matches!(self, LibFn::Api(f) if spec(*f).variadic)
    }

    pub fn stream_arg(&self) -> Option<usize> {
        match self {
            LibFn::Api(f) => spec(*f).stream_arg,
            LibFn::Extra(e) => Some(e.stream_arg()),
        }
    }

    pub fn ret(&self) -> RetKind {
        match self {
            LibFn::Api(f) => spec(*f).ret,
            LibFn::Extra(e) => e.ret(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_22_entries_in_enum_order() {
        assert_eq!(table().len(), 22);
        for (i, s) in table().iter().enumerate() {
            assert_eq!(s.func as usize, i, "{}", s.name);
        }
    }

    #[test]
    fn failable_set() {
        let not: Vec<_> = table().iter().filter(|s| !s.failable).map(|s| s.name).collect();
        assert_eq!(not, vec!["fclose", "pclose", "feof", "ferror", "clearerr"]);
    }

    #[test]
    fn stream_arg_points_at_stream_param() {
        for s in table() {
            if let Some(i) = s.stream_arg {
                assert_eq!(s.params[i], ArgKind::Stream, "{}", s.name);
            }
        }
    }

    #[test]
    fn nonposix_is_configurable() {
        let list = vec!["my_ext".to_string()];
        assert_eq!(LibFn::lookup("my_ext", &list), Some(LibFn::Extra(ExtraFn::NonPosix("my_ext".into()))));
        assert_eq!(LibFn::lookup("__freading", &list), None);
    }
}
