//! Libc stream semantics over the virtual filesystem, shared by both interpreters.

use super::vfs::{Command, Fault, FaultKind, VfsState};
use crate::api::{ApiFn, ExtraFn, LibFn};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trap: {0}")]
pub struct Trap(pub String);

pub fn trap<T>(msg: impl Into<String>) -> Result<T, Trap> {
    Err(Trap(msg.into()))
}

/// Where a reference points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Place {
    Local(usize, String),
    Global(String),
    Field(usize, String),
}

/// Runtime values of both languages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Val {
    Unit,
    Int(i64),
    Str(Vec<u8>),
    Null,
    Stream(usize),
    Rec(usize),
    Func(String),
    Ref(Place),
    Tuple(Vec<Val>),
}

impl Val {
    pub fn int(&self) -> Result<i64, Trap> {
        match self {
            Val::Int(n) => Ok(*n),
            v => trap(format!("expected an integer, found {v:?}")),
        }
    }

    pub fn bytes(&self) -> Result<&[u8], Trap> {
        match self {
            Val::Str(s) => Ok(s),
            v => trap(format!("expected a string, found {v:?}")),
        }
    }

    pub fn truthy(&self) -> bool {
        !matches!(self, Val::Int(0) | Val::Null | Val::Unit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Eof,
    Err,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Kind {
    Stdin,
    Stdout,
    Stderr,
    File(String),
    /// Reads the output of a command.
    PipeIn(String, Vec<u8>),
    /// Feeds the input of a command.
    PipeOut(String),
}

#[derive(Debug, Clone)]
struct Handle {
    kind: Kind,
    pos: usize,
    read: bool,
    write: bool,
    append: bool,
    eof: bool,
    err: bool,
    closed: bool,
    moved: usize,
    tripped: Option<FaultKind>,
    pushback: Vec<u8>,
}

impl Handle {
    fn new(kind: Kind, read: bool, write: bool) -> Handle {
        Handle {
            kind,
            pos: 0,
            read,
            write,
            append: false,
            eof: false,
            err: false,
            closed: false,
            moved: 0,
            tripped: None,
            pushback: Vec::new(),
        }
    }

    fn selector(&self) -> String {
        match &self.kind {
            Kind::Stdin => "stdin".into(),
            Kind::Stdout => "stdout".into(),
            Kind::Stderr => "stderr".into(),
            Kind::File(n) => format!("file:{n}"),
            Kind::PipeIn(c, _) | Kind::PipeOut(c) => format!("pipe:{c}"),
        }
    }
}

/// Result of a library call: return value, values for output arguments, and
/// how the call ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallResult {
    pub ret: Val,
    pub outs: Vec<(usize, Val)>,
    pub status: Status,
}

impl CallResult {
    fn ok(ret: Val) -> CallResult {
        CallResult { ret, outs: vec![], status: Status::Ok }
    }
}

pub const STDIN: usize = 0;
pub const STDOUT: usize = 1;
pub const STDERR: usize = 2;

#[derive(Debug, Clone)]
pub struct Runtime {
    pub files: BTreeMap<String, Vec<u8>>,
    stdin: Vec<u8>,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    commands: BTreeMap<String, Command>,
    faults: Vec<Fault>,
    handles: Vec<Handle>,
}

fn data_len(rt: &Runtime, k: &Kind) -> usize {
    match k {
        Kind::Stdin => rt.stdin.len(),
        Kind::File(n) => rt.files.get(n).map_or(0, Vec::len),
        Kind::PipeIn(_, d) => d.len(),
        _ => 0,
    }
}

/// Bytes produced by a `%d`/`%s`/`%c` format.
pub fn format_bytes(fmt: &[u8], args: &[Val]) -> Result<Vec<u8>, Trap> {
    let mut out = Vec::new();
    let mut args = args.iter();
    let mut i = 0;
    while i < fmt.len() {
        if fmt[i] == b'%' && i + 1 < fmt.len() {
            let d = fmt[i + 1];
            i += 2;
            if d == b'%' {
                out.push(b'%');
                continue;
            }
            let Some(a) = args.next() else { return trap("missing format argument") };
            match d {
                b'd' => out.extend(a.int()?.to_string().bytes()),
                b's' => out.extend(a.bytes()?),
                b'c' => out.push(a.int()? as u8),
                _ => return trap(format!("unsupported directive %{}", d as char)),
            }
        } else {
            out.push(fmt[i]);
            i += 1;
        }
    }
    Ok(out)
}

impl Runtime {
    pub fn new(vfs: &VfsState) -> Runtime {
        Runtime {
            files: vfs.files.iter().map(|(k, v)| (k.clone(), v.as_bytes().to_vec())).collect(),
            stdin: vfs.stdin.as_bytes().to_vec(),
            stdout: Vec::new(),
            stderr: Vec::new(),
            commands: vfs.commands.clone(),
            faults: vfs.faults.clone(),
            handles: vec![
                Handle::new(Kind::Stdin, true, false),
                Handle::new(Kind::Stdout, false, true),
                Handle::new(Kind::Stderr, false, true),
            ],
        }
    }

    fn handle(&mut self, h: usize) -> Result<&mut Handle, Trap> {
        match self.handles.get_mut(h) {
            Some(x) if x.closed => trap("use of a closed stream"),
            Some(x) => Ok(x),
            None => trap("invalid stream"),
        }
    }

    /// Whether a fault stops the next byte on `h`.
    fn fault_for(&mut self, h: usize) -> Option<FaultKind> {
        let hd = &self.handles[h];
        if let Some(k) = hd.tripped {
            return Some(k);
        }
        let sel = hd.selector();
        let hit = self.faults.iter().find(|f| f.matches(&sel) && hd.moved >= f.after).map(|f| f.kind);
        if hit.is_some() {
            self.handles[h].tripped = hit;
        }
        hit
    }

    fn read_byte(&mut self, h: usize) -> Result<Result<u8, Status>, Trap> {
        let hd = self.handle(h)?;
        if !hd.read {
            return Ok(Err(Status::Err));
        }
        if let Some(b) = hd.pushback.pop() {
            return Ok(Ok(b));
        }
        match self.fault_for(h) {
            Some(FaultKind::Eof) => return Ok(Err(Status::Eof)),
            Some(FaultKind::Other) => return Ok(Err(Status::Err)),
            None => {}
        }
        let hd = &self.handles[h];
        let b = match &hd.kind {
            Kind::Stdin => self.stdin.get(hd.pos).copied(),
            Kind::File(n) => self.files.get(n).and_then(|d| d.get(hd.pos).copied()),
            Kind::PipeIn(_, d) => d.get(hd.pos).copied(),
            _ => None,
        };
        let hd = &mut self.handles[h];
        Ok(match b {
            Some(b) => {
                hd.pos += 1;
                hd.moved += 1;
                Ok(b)
            }
            None => Err(Status::Eof),
        })
    }

    fn unread(&mut self, h: usize, b: u8) {
        self.handles[h].pushback.push(b);
    }

    /// Writes as many bytes as the faults allow.
    fn write_bytes(&mut self, h: usize, bytes: &[u8]) -> Result<(usize, Status), Trap> {
        let hd = self.handle(h)?;
        if !hd.write {
            return Ok((0, Status::Err));
        }
        hd.pushback.clear();
        let mut n = 0;
        for &b in bytes {
            if self.fault_for(h).is_some() {
                return Ok((n, Status::Err));
            }
            let hd = &mut self.handles[h];
            match &hd.kind {
                Kind::Stdout => self.stdout.push(b),
                Kind::Stderr => self.stderr.push(b),
                Kind::PipeOut(c) => self.files.entry(format!("|{c}")).or_default().push(b),
                Kind::File(name) => {
                    let data = self.files.entry(name.clone()).or_default();
                    if hd.append {
                        hd.pos = data.len();
                    }
                    if data.len() < hd.pos {
                        data.resize(hd.pos, 0);
                    }
                    if hd.pos == data.len() {
                        data.push(b);
                    } else {
                        data[hd.pos] = b;
                    }
                    hd.pos += 1;
                }
                _ => return Ok((n, Status::Err)),
            }
            self.handles[h].moved += 1;
            n += 1;
        }
        Ok((n, Status::Ok))
    }

    fn set_status(&mut self, h: usize, s: Status) {
        if let Some(hd) = self.handles.get_mut(h) {
            match s {
                Status::Eof => hd.eof = true,
                Status::Err => hd.err = true,
                Status::Ok => {}
            }
        }
    }

    pub fn open(&mut self, path: &[u8], mode: &[u8]) -> Val {
        let name = String::from_utf8_lossy(path).into_owned();
        let m: Vec<u8> = mode.iter().copied().filter(|c| *c != b'b').collect();
        let (read, write, create, truncate, append) = match m.as_slice() {
            b"r" => (true, false, false, false, false),
            b"w" => (false, true, true, true, false),
            b"a" => (false, true, true, false, true),
            b"r+" => (true, true, false, false, false),
            b"w+" => (true, true, true, true, false),
            b"a+" => (true, true, true, false, true),
            _ => return Val::Null,
        };
        if !self.files.contains_key(&name) {
            if !create {
                return Val::Null;
            }
            self.files.insert(name.clone(), Vec::new());
        }
        if truncate {
            self.files.insert(name.clone(), Vec::new());
        }
        let mut hd = Handle::new(Kind::File(name), read, write);
        hd.append = append;
        self.handles.push(hd);
        Val::Stream(self.handles.len() - 1)
    }

    pub fn spawn(&mut self, cmd: &[u8], mode: &[u8]) -> Val {
        let cmd = String::from_utf8_lossy(cmd).into_owned();
        let hd = match mode {
            b"r" => {
                let out = self.commands.get(&cmd).map(|c| c.output.as_bytes().to_vec()).unwrap_or_default();
                Handle::new(Kind::PipeIn(cmd, out), true, false)
            }
            b"w" => {
                self.files.entry(format!("|{cmd}")).or_default();
                Handle::new(Kind::PipeOut(cmd), false, true)
            }
            _ => return Val::Null,
        };
        self.handles.push(hd);
        Val::Stream(self.handles.len() - 1)
    }

    /// Exit status of the command behind a pipe, without closing it.
    pub fn wait(&mut self, h: usize) -> Result<i64, Trap> {
        let kind = self.handle(h)?.kind.clone();
        Ok(match &kind {
            Kind::PipeIn(c, _) | Kind::PipeOut(c) => self.commands.get(c).map_or(0, |c| c.status),
            _ => 0,
        })
    }

    /// Closes a stream; standard streams stay usable when `keep_std` is set.
    pub fn close(&mut self, h: usize, keep_std: bool) -> Result<(), Trap> {
        if keep_std && h <= STDERR {
            return Ok(());
        }
        self.handle(h)?.closed = true;
        Ok(())
    }

    pub fn is_pipe(&self, h: usize) -> bool {
        matches!(self.handles.get(h).map(|x| &x.kind), Some(Kind::PipeIn(..) | Kind::PipeOut(_)))
    }

    fn scan(&mut self, h: usize, fmt: &[u8], nargs: usize) -> Result<CallResult, Trap> {
        let mut outs = Vec::new();
        let mut count = 0i64;
        let mut i = 0;
        // Status of the first failed read, if any.
        let mut fail = Status::Ok;
        let skip_ws = |rt: &mut Runtime, fail: &mut Status| -> Result<(), Trap> {
            loop {
                match rt.read_byte(h)? {
                    Ok(b) if b.is_ascii_whitespace() => {}
                    Ok(b) => {
                        rt.unread(h, b);
                        return Ok(());
                    }
                    Err(s) => {
                        *fail = s;
                        return Ok(());
                    }
                }
            }
        };
        'outer: while i < fmt.len() {
            let c = fmt[i];
            if c.is_ascii_whitespace() {
                skip_ws(self, &mut fail)?;
                i += 1;
                if fail != Status::Ok {
                    break;
                }
                continue;
            }
            if c != b'%' || fmt.get(i + 1) == Some(&b'%') {
                match self.read_byte(h)? {
                    Ok(b) if b == c => {}
                    Ok(b) => {
                        self.unread(h, b);
                        break;
                    }
                    Err(s) => {
                        fail = s;
                        break;
                    }
                }
                i += if c == b'%' { 2 } else { 1 };
                continue;
            }
            let d = fmt.get(i + 1).copied().unwrap_or(0);
            i += 2;
            let slot = 2 + count as usize;
            match d {
                b'd' => {
                    skip_ws(self, &mut fail)?;
                    if fail != Status::Ok {
                        break;
                    }
                    let mut digits = Vec::new();
                    loop {
                        match self.read_byte(h)? {
                            Ok(b) if b.is_ascii_digit() || (digits.is_empty() && (b == b'-' || b == b'+')) => {
                                digits.push(b)
                            }
                            Ok(b) => {
                                self.unread(h, b);
                                break;
                            }
                            Err(s) => {
                                fail = s;
                                break;
                            }
                        }
                    }
                    let text = String::from_utf8_lossy(&digits).into_owned();
                    match text.parse::<i64>() {
                        Ok(n) => {
                            outs.push((slot, Val::Int(n)));
                            count += 1;
                        }
                        Err(_) => break 'outer,
                    }
                    if fail != Status::Ok {
                        break;
                    }
                }
                b's' => {
                    skip_ws(self, &mut fail)?;
                    if fail != Status::Ok {
                        break;
                    }
                    let mut word = Vec::new();
                    loop {
                        match self.read_byte(h)? {
                            Ok(b) if !b.is_ascii_whitespace() => word.push(b),
                            Ok(b) => {
                                self.unread(h, b);
                                break;
                            }
                            Err(s) => {
                                fail = s;
                                break;
                            }
                        }
                    }
                    outs.push((slot, Val::Str(word)));
                    count += 1;
                    if fail != Status::Ok {
                        break;
                    }
                }
                b'c' => match self.read_byte(h)? {
                    Ok(b) => {
                        outs.push((slot, Val::Int(b as i64)));
                        count += 1;
                    }
                    Err(s) => {
                        fail = s;
                        break;
                    }
                },
                _ => return trap(format!("unsupported directive %{}", d as char)),
            }
            if count as usize > nargs {
                return trap("too few fscanf targets");
            }
        }
        let ret = if count == 0 && fail != Status::Ok { -1 } else { count };
        Ok(CallResult { ret: Val::Int(ret), outs, status: fail })
    }

    fn seek(&mut self, h: usize, off: i64, whence: i64) -> Result<CallResult, Trap> {
        let len = {
            let hd = self.handle(h)?;
            if !matches!(hd.kind, Kind::File(_)) {
                return Ok(CallResult::ok(Val::Int(-1)));
            }
            let k = hd.kind.clone();
            data_len(self, &k)
        };
        let hd = &mut self.handles[h];
        let base = match whence {
            0 => 0,
            1 => hd.pos as i64,
            2 => len as i64,
            _ => return Ok(CallResult::ok(Val::Int(-1))),
        };
        let target = base + off;
        if target < 0 {
            return Ok(CallResult::ok(Val::Int(-1)));
        }
        hd.pos = target as usize;
        hd.eof = false;
        hd.pushback.clear();
        Ok(CallResult::ok(Val::Int(0)))
    }

    /// Runs an API operation on stream `h`; `args` are all call arguments in
    /// source order, with the stream slot included.
    pub fn api(&mut self, f: ApiFn, h: usize, args: &[Val]) -> Result<CallResult, Trap> {
        let r = self.api_inner(f, h, args)?;
        self.set_status(h, r.status);
        Ok(r)
    }

    fn api_inner(&mut self, f: ApiFn, h: usize, args: &[Val]) -> Result<CallResult, Trap> {
        use ApiFn::*;
        let int = |i: usize| args.get(i).map_or(Ok(0), Val::int);
        Ok(match f {
            Fgetc | Getc => match self.read_byte(h)? {
                Ok(b) => CallResult::ok(Val::Int(b as i64)),
                Err(s) => CallResult { ret: Val::Int(-1), outs: vec![], status: s },
            },
            Fread => {
                let (size, n) = (int(1)?.max(0) as usize, int(2)?.max(0) as usize);
                let mut buf = Vec::new();
                let mut status = Status::Ok;
                while buf.len() < size * n {
                    match self.read_byte(h)? {
                        Ok(b) => buf.push(b),
                        Err(s) => {
                            status = s;
                            break;
                        }
                    }
                }
                let items = buf.len().checked_div(size).unwrap_or(0);
                CallResult { ret: Val::Int(items as i64), outs: vec![(0, Val::Str(buf))], status }
            }
            Fgets => {
                let n = int(1)?;
                if n <= 1 {
                    return Ok(CallResult { ret: Val::Int(1), outs: vec![(0, Val::Str(vec![]))], status: Status::Ok });
                }
                let mut buf = Vec::new();
                let mut status = Status::Ok;
                while (buf.len() as i64) < n - 1 {
                    match self.read_byte(h)? {
                        Ok(b) => {
                            buf.push(b);
                            if b == b'\n' {
                                break;
                            }
                        }
                        Err(s) => {
                            status = s;
                            break;
                        }
                    }
                }
                if buf.is_empty() {
                    CallResult { ret: Val::Null, outs: vec![], status }
                } else {
                    CallResult { ret: Val::Int(1), outs: vec![(0, Val::Str(buf))], status }
                }
            }
            Getline => {
                let mut buf = Vec::new();
                let mut status = Status::Ok;
                loop {
                    match self.read_byte(h)? {
                        Ok(b) => {
                            buf.push(b);
                            if b == b'\n' {
                                break;
                            }
                        }
                        Err(s) => {
                            status = s;
                            break;
                        }
                    }
                }
                if buf.is_empty() {
                    CallResult { ret: Val::Int(-1), outs: vec![], status }
                } else {
                    CallResult { ret: Val::Int(buf.len() as i64), outs: vec![(0, Val::Str(buf))], status }
                }
            }
            Fscanf => {
                let fmt = args.get(1).map_or(Ok(&[][..]), Val::bytes)?.to_vec();
                self.scan(h, &fmt, args.len().saturating_sub(2))?
            }
            Fwrite => {
                let s = args.first().map_or(Ok(&[][..]), Val::bytes)?.to_vec();
                let (size, n) = (int(1)?.max(0) as usize, int(2)?.max(0) as usize);
                let take = s.len().min(size * n);
                let (w, status) = self.write_bytes(h, &s[..take])?;
                let items = w.checked_div(size).unwrap_or(0);
                CallResult { ret: Val::Int(items as i64), outs: vec![], status }
            }
            Fputc | Putc => {
                let c = int(0)? as u8;
                let (_, status) = self.write_bytes(h, &[c])?;
                let ret = if status == Status::Ok { c as i64 } else { -1 };
                CallResult { ret: Val::Int(ret), outs: vec![], status }
            }
            Fputs => {
                let s = args.first().map_or(Ok(&[][..]), Val::bytes)?.to_vec();
                let (_, status) = self.write_bytes(h, &s)?;
                CallResult { ret: Val::Int(if status == Status::Ok { 0 } else { -1 }), outs: vec![], status }
            }
            Fprintf => {
                let fmt = args.get(1).map_or(Ok(&[][..]), Val::bytes)?.to_vec();
                let bytes = format_bytes(&fmt, &args[2.min(args.len())..])?;
                let (_, status) = self.write_bytes(h, &bytes)?;
                let ret = if status == Status::Ok { bytes.len() as i64 } else { -1 };
                CallResult { ret: Val::Int(ret), outs: vec![], status }
            }
            Fflush => {
                // a device that already failed a transfer also fails the flush
                let hd = self.handle(h)?;
                if hd.write && hd.tripped == Some(FaultKind::Other) {
                    CallResult { ret: Val::Int(-1), outs: vec![], status: Status::Err }
                } else {
                    CallResult::ok(Val::Int(0))
                }
            }
            Fseek => self.seek(h, int(1)?, int(2)?)?,
            Ftell => {
                let hd = self.handle(h)?;
                let pos = if matches!(hd.kind, Kind::File(_)) { hd.pos as i64 - hd.pushback.len() as i64 } else { -1 };
                CallResult::ok(Val::Int(pos))
            }
            Rewind => {
                let r = self.seek(h, 0, 0)?;
                if r.ret == Val::Int(0) {
                    self.handles[h].err = false;
                }
                CallResult::ok(Val::Unit)
            }
            Feof => CallResult::ok(Val::Int(self.handle(h)?.eof as i64)),
            Ferror => CallResult::ok(Val::Int(self.handle(h)?.err as i64)),
            Clearerr => {
                let hd = self.handle(h)?;
                hd.eof = false;
                hd.err = false;
                CallResult::ok(Val::Unit)
            }
            Fclose => {
                self.close(h, false)?;
                CallResult::ok(Val::Int(0))
            }
            Pclose => {
                let status = self.wait(h)?;
                self.close(h, false)?;
                CallResult::ok(Val::Int(status))
            }
            Fopen | Popen => unreachable!("constructors have no stream argument"),
        })
    }

    /// Any library call at the libc level. Stream arguments must already be handles.
    pub fn libc(&mut self, f: &LibFn, args: &[Val]) -> Result<CallResult, Trap> {
        let stream = |i: usize| -> Result<usize, Trap> {
            match args.get(i) {
                Some(Val::Stream(h)) => Ok(*h),
                Some(Val::Null) => trap("null stream"),
                other => trap(format!("expected a stream, found {other:?}")),
            }
        };
        match f {
            LibFn::Api(ApiFn::Fopen) => Ok(CallResult::ok(self.open(args[0].bytes()?, args[1].bytes()?))),
            LibFn::Api(ApiFn::Popen) => Ok(CallResult::ok(self.spawn(args[0].bytes()?, args[1].bytes()?))),
            LibFn::Api(a) => {
                let i = crate::api::spec(*a).stream_arg.expect("stream operation");
                let h = stream(i)?;
                self.api(*a, h, args)
            }
            LibFn::Extra(e) => {
                let h = stream(e.stream_arg())?;
                self.handle(h)?;
                Ok(match e {
                    ExtraFn::Setbuf => CallResult::ok(Val::Unit),
                    ExtraFn::Setvbuf => CallResult::ok(Val::Int(0)),
                    ExtraFn::Ungetc => {
                        let c = args[0].int()?;
                        if c < 0 {
                            CallResult::ok(Val::Int(-1))
                        } else {
                            let hd = &mut self.handles[h];
                            hd.pushback.push(c as u8);
                            hd.eof = false;
                            CallResult::ok(Val::Int(c & 0xff))
                        }
                    }
                    ExtraFn::Freopen => {
                        self.handles[h].closed = true;
                        match self.open(args[0].bytes()?, args[1].bytes()?) {
                            Val::Stream(n) => {
                                let hd = self.handles.pop().expect("just opened");
                                debug_assert_eq!(n, self.handles.len());
                                self.handles[h] = hd;
                                CallResult::ok(Val::Stream(h))
                            }
                            v => CallResult::ok(v),
                        }
                    }
                    ExtraFn::NonPosix(name) => {
                        let hd = &self.handles[h];
                        let v = match name.as_str() {
                            "__freading" => hd.read && !hd.write,
                            "__fwriting" => hd.write && !hd.read,
                            _ => false,
                        };
                        CallResult::ok(Val::Int(v as i64))
                    }
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vfs() -> VfsState {
        let mut v = VfsState { stdin: "12 ab\nrest".into(), ..Default::default() };
        v.files.insert("in".into(), "hello\nworld".into());
        v
    }

    #[test]
    fn read_to_eof_sets_indicator() {
        let mut rt = Runtime::new(&vfs());
        let Val::Stream(h) = rt.open(b"in", b"r") else { panic!() };
        let mut n = 0;
        while rt.api(ApiFn::Fgetc, h, &[]).unwrap().ret != Val::Int(-1) {
            n += 1;
        }
        assert_eq!(n, 11);
        assert_eq!(rt.api(ApiFn::Feof, h, &[]).unwrap().ret, Val::Int(1));
        assert_eq!(rt.api(ApiFn::Ferror, h, &[]).unwrap().ret, Val::Int(0));
    }

    #[test]
    fn scan_and_lines() {
        let mut rt = Runtime::new(&vfs());
        let r = rt.api(ApiFn::Fscanf, STDIN, &[Val::Stream(0), Val::Str(b"%d %s".to_vec()), Val::Unit, Val::Unit]).unwrap();
        assert_eq!(r.ret, Val::Int(2));
        assert_eq!(r.outs, vec![(2, Val::Int(12)), (3, Val::Str(b"ab".to_vec()))]);
        let r = rt.api(ApiFn::Getline, STDIN, &[Val::Unit, Val::Stream(0)]).unwrap();
        assert_eq!(r.outs, vec![(0, Val::Str(b"\n".to_vec()))]);
    }

    #[test]
    fn write_fault_is_error() {
        let mut v = vfs();
        v.faults.push(Fault { target: "stdout".into(), after: 2, kind: FaultKind::Eof });
        let mut rt = Runtime::new(&v);
        let r = rt.api(ApiFn::Fputs, STDOUT, &[Val::Str(b"abc".to_vec()), Val::Stream(1)]).unwrap();
        assert_eq!(r.status, Status::Err);
        assert_eq!(rt.stdout, b"ab");
        assert_eq!(rt.api(ApiFn::Ferror, STDOUT, &[]).unwrap().ret, Val::Int(1));
    }

    #[test]
    fn use_after_close_traps() {
        let mut rt = Runtime::new(&vfs());
        let Val::Stream(h) = rt.open(b"out", b"w") else { panic!() };
        rt.api(ApiFn::Fclose, h, &[]).unwrap();
        assert!(rt.api(ApiFn::Fputc, h, &[Val::Int(65)]).is_err());
    }

    #[test]
    fn format_directives() {
        let b = format_bytes(b"%d-%s-%c%%", &[Val::Int(-3), Val::Str(b"x".to_vec()), Val::Int(66)]).unwrap();
        assert_eq!(b, b"-3-x-B%");
    }
}
