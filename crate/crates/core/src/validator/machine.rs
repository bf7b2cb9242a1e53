//! Memory shared by both interpreters: frames, globals, record heap and fuel.

use super::stdio::{trap, Place, Runtime, Trap, Val};
use super::vfs::VfsState;
use std::collections::BTreeMap;

pub const DEFAULT_FUEL: u64 = 2_000_000;
pub const MAX_DEPTH: usize = 200;

pub struct Machine {
    pub rt: Runtime,
    pub globals: BTreeMap<String, Val>,
    pub frames: Vec<BTreeMap<String, Val>>,
    pub heap: Vec<BTreeMap<String, Val>>,
    fuel: u64,
}

impl Machine {
    pub fn new(vfs: &VfsState, fuel: u64) -> Machine {
        Machine { rt: Runtime::new(vfs), globals: BTreeMap::new(), frames: Vec::new(), heap: Vec::new(), fuel }
    }

    pub fn tick(&mut self) -> Result<(), Trap> {
        if self.fuel == 0 {
            return trap("out of fuel");
        }
        self.fuel -= 1;
        Ok(())
    }

    pub fn push_frame(&mut self) -> Result<(), Trap> {
        if self.frames.len() >= MAX_DEPTH {
            return trap("call depth exceeded");
        }
        self.frames.push(BTreeMap::new());
        Ok(())
    }

    pub fn pop_frame(&mut self) {
        self.frames.pop();
    }

    pub fn top(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn alloc(&mut self, fields: BTreeMap<String, Val>) -> Val {
        self.heap.push(fields);
        Val::Rec(self.heap.len() - 1)
    }

    /// A local of the current frame if one is bound, else a global.
    pub fn var_place(&self, name: &str) -> Place {
        match self.frames.last() {
            Some(f) if f.contains_key(name) => Place::Local(self.top(), name.to_string()),
            _ => Place::Global(name.to_string()),
        }
    }

    pub fn field_place(&self, rec: &Val, field: &str) -> Result<Place, Trap> {
        match rec {
            Val::Rec(id) => Ok(Place::Field(*id, field.to_string())),
            Val::Null => trap(format!("null dereference reading .{field}")),
            v => trap(format!("field .{field} of non-record {v:?}")),
        }
    }

    pub fn read(&self, p: &Place) -> Result<Val, Trap> {
        let v = match p {
            Place::Local(f, n) => self.frames.get(*f).and_then(|m| m.get(n)),
            Place::Global(n) => self.globals.get(n),
            Place::Field(r, n) => self.heap.get(*r).and_then(|m| m.get(n)),
        };
        match v {
            Some(v) => Ok(v.clone()),
            None => trap(format!("read of unset {p:?}")),
        }
    }

    pub fn write(&mut self, p: &Place, v: Val) -> Result<(), Trap> {
        let slot = match p {
            Place::Local(f, n) => self.frames.get_mut(*f).map(|m| m.entry(n.clone())),
            Place::Global(n) => Some(self.globals.entry(n.clone())),
            Place::Field(r, n) => self.heap.get_mut(*r).map(|m| m.entry(n.clone())),
        };
        match slot {
            Some(e) => {
                *e.or_insert(Val::Unit) = v;
                Ok(())
            }
            None => trap(format!("write to dangling {p:?}")),
        }
    }

    pub fn bind(&mut self, name: &str, v: Val) {
        self.frames.last_mut().expect("inside a frame").insert(name.to_string(), v);
    }
}

pub fn arith(op: &str, l: &Val, r: &Val) -> Result<Val, Trap> {
    let b = |x: bool| Ok(Val::Int(x as i64));
    match op {
        "==" => return b(l == r),
        "!=" => return b(l != r),
        _ => {}
    }
    let (a, c) = (l.int()?, r.int()?);
    match op {
        "<" => b(a < c),
        "<=" => b(a <= c),
        ">" => b(a > c),
        ">=" => b(a >= c),
        "+" => Ok(Val::Int(a.wrapping_add(c))),
        "-" => Ok(Val::Int(a.wrapping_sub(c))),
        "*" => Ok(Val::Int(a.wrapping_mul(c))),
        "/" | "%" if c == 0 => trap("division by zero"),
        "/" => Ok(Val::Int(a.wrapping_div(c))),
        "%" => Ok(Val::Int(a.wrapping_rem(c))),
        "&" => Ok(Val::Int(a & c)),
        _ => trap(format!("unknown operator {op}")),
    }
}

/// Exit status from main's return value.
pub fn exit_code(v: &Val) -> i64 {
    match v {
        Val::Int(n) => *n,
        Val::Tuple(items) => items.first().map_or(0, exit_code),
        _ => 0,
    }
}
