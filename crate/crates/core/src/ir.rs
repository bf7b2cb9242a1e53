//! Per-function control-flow graphs with labeled instructions, plus the call graph.

use crate::api::{ArgKind, LibFn};
use crate::frontend::ast::*;
use crate::frontend::resolve::{CallKind, SymbolTable, VarRef};
use crate::loc::{FuncId, Location};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label {
    pub func: FuncId,
    pub idx: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value {
    Loc(Location),
    Std(StdStream),
    Null,
    /// A stream produced by a cast.
    Opaque,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arg {
    Stream(Location),
    Null,
    Value,
}

impl Arg {
    pub fn stream(self) -> Option<Location> {
        match self {
            Arg::Stream(l) => Some(l),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Callee {
    Lib(LibFn),
    User(FuncId),
    /// Possible targets: address-taken functions of matching arity.
    Indirect { var: VarRef, targets: Vec<FuncId> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instr {
    Entry,
    /// Shared return point.
    Exit,
    Assign { node: NodeId, lhs: Location, rhs: Value },
    Call { node: NodeId, callee: Callee, args: Vec<Arg>, result: Option<Location> },
    Branch { node: NodeId },
    Return { node: NodeId },
    /// Any statement that does not touch stream slots.
    Other { node: NodeId },
}

impl Instr {
    /// Stream locations passed at the argument positions the callee treats as streams.
    pub fn call_stream_args(&self) -> Vec<(usize, Location)> {
        match self {
            Instr::Call { args, .. } => {
                args.iter().enumerate().filter_map(|(i, a)| a.stream().map(|l| (i, l))).collect()
            }
            _ => vec![],
        }
    }
}

#[derive(Debug, Clone)]
pub struct FuncIr {
    pub id: FuncId,
    pub instrs: Vec<Instr>,
    pub succs: Vec<Vec<u32>>,
    pub preds: Vec<Vec<u32>>,
    pub entry: u32,
    pub exit: u32,
    /// Not reachable from entry.
    pub dead: Vec<bool>,
}

impl FuncIr {
    pub fn label(&self, idx: u32) -> Label {
        Label { func: self.id, idx }
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IrError {
    #[error("unknown label {0:?}")]
    UnknownLabel(Label),
    #[error("unknown function {0:?}")]
    UnknownFunction(FuncId),
}

#[derive(Debug, Clone)]
pub struct IrProgram {
    pub funcs: Vec<FuncIr>,
    /// Global initializers that store a stream or NULL.
    pub global_inits: Vec<(Location, Value)>,
    /// AST call node to its call instruction.
    pub call_labels: HashMap<NodeId, Label>,
    /// Statement node to the label that completes it.
    pub stmt_labels: HashMap<NodeId, Label>,
    /// (caller, call site, callee) for every direct user call.
    pub call_edges: Vec<(FuncId, Label, FuncId)>,
    call_sites: Vec<Vec<Label>>,
}

impl IrProgram {
    pub fn func(&self, f: FuncId) -> &FuncIr {
        &self.funcs[f.0 as usize]
    }

    pub fn instr(&self, l: Label) -> &Instr {
        &self.funcs[l.func.0 as usize].instrs[l.idx as usize]
    }

    pub fn try_instr(&self, l: Label) -> Result<&Instr, IrError> {
        self.funcs
            .get(l.func.0 as usize)
            .and_then(|f| f.instrs.get(l.idx as usize))
            .ok_or(IrError::UnknownLabel(l))
    }

    pub fn predecessors(&self, l: Label) -> Result<Vec<Label>, IrError> {
        self.try_instr(l)?;
        let f = self.func(l.func);
        Ok(f.preds[l.idx as usize].iter().map(|&i| f.label(i)).collect())
    }

    pub fn successors(&self, l: Label) -> Result<Vec<Label>, IrError> {
        self.try_instr(l)?;
        let f = self.func(l.func);
        Ok(f.succs[l.idx as usize].iter().map(|&i| f.label(i)).collect())
    }

    /// Labels of direct calls to `f`.
    pub fn call_sites(&self, f: FuncId) -> Result<&[Label], IrError> {
        self.call_sites.get(f.0 as usize).map(Vec::as_slice).ok_or(IrError::UnknownFunction(f))
    }

    pub fn exit_label(&self, f: FuncId) -> Label {
        let fir = self.func(f);
        fir.label(fir.exit)
    }

    pub fn labels(&self) -> impl Iterator<Item = (Label, &Instr)> {
        self.funcs.iter().flat_map(|f| f.instrs.iter().enumerate().map(move |(i, ins)| (f.label(i as u32), ins)))
    }

    pub fn total_labels(&self) -> usize {
        self.funcs.iter().map(FuncIr::len).sum()
    }

    pub fn label_name(&self, st: &SymbolTable, l: Label) -> String {
        format!("{}:{}", st.func(l.func).name, l.idx)
    }

    /// Text listing: instructions, then one edge per line.
    pub fn dump(&self, st: &SymbolTable) -> String {
        let mut out = String::new();
        for f in &self.funcs {
            for (i, ins) in f.instrs.iter().enumerate() {
                let l = f.label(i as u32);
                let dead = if f.dead[i] { " (dead)" } else { "" };
                let _ = writeln!(out, "# {} {}{}", self.label_name(st, l), describe(st, ins), dead);
            }
        }
        for f in &self.funcs {
            for (i, ss) in f.succs.iter().enumerate() {
                for &s in ss {
                    let _ = writeln!(
                        out,
                        "{} -> {}",
                        self.label_name(st, f.label(i as u32)),
                        self.label_name(st, f.label(s))
                    );
                }
            }
        }
        for (caller, site, callee) in &self.call_edges {
            let _ = writeln!(
                out,
                "call {} {} -> {}",
                st.func(*caller).name,
                self.label_name(st, *site),
                st.func(*callee).name
            );
        }
        out
    }
}

fn describe(st: &SymbolTable, ins: &Instr) -> String {
    let val = |v: &Value| match v {
        Value::Loc(l) => st.location_name(*l),
        Value::Std(s) => s.name().to_string(),
        Value::Null => "NULL".into(),
        Value::Opaque => "<cast>".into(),
    };
    let arg = |a: &Arg| match a {
        Arg::Stream(l) => st.location_name(*l),
        Arg::Null => "NULL".into(),
        Arg::Value => "_".into(),
    };
    match ins {
        Instr::Entry => "entry".into(),
        Instr::Exit => "exit".into(),
        Instr::Assign { lhs, rhs, .. } => format!("{} = {}", st.location_name(*lhs), val(rhs)),
        Instr::Call { callee, args, result, .. } => {
            let name = match callee {
                Callee::Lib(l) => l.name().to_string(),
                Callee::User(f) => st.func(*f).name.clone(),
                Callee::Indirect { .. } => "(*ptr)".into(),
            };
            let args: Vec<_> = args.iter().map(arg).collect();
            match result {
                Some(r) => format!("{} = {name}({})", st.location_name(*r), args.join(", ")),
                None => format!("{name}({})", args.join(", ")),
            }
        }
        Instr::Branch { .. } => "branch".into(),
        Instr::Return { .. } => "return".into(),
        Instr::Other { .. } => "stmt".into(),
    }
}

pub fn lower(prog: &Program, st: &SymbolTable) -> IrProgram {
    let mut global_inits = Vec::new();
    for (gi, g) in prog.globals.iter().enumerate() {
        if let (Some(init), true) = (&g.init, g.ty.is_stream()) {
            let v = match &init.kind {
                ExprKind::Std(s) => Value::Std(*s),
                _ => Value::Null,
            };
            global_inits.push((Location::Global(gi as u32), v));
        }
    }
    let taken: Vec<FuncId> = (0..st.functions.len() as u32)
        .map(FuncId)
        .filter(|f| st.func(*f).address_taken)
        .collect();
    let mut ir = IrProgram {
        funcs: Vec::new(),
        global_inits,
        call_labels: HashMap::new(),
        stmt_labels: HashMap::new(),
        call_edges: Vec::new(),
        call_sites: vec![Vec::new(); st.functions.len()],
    };
    for (fi, f) in prog.functions.iter().enumerate() {
        let fid = FuncId(fi as u32);
        let mut lw = Lowerer {
            st,
            fid,
            taken: &taken,
            instrs: vec![Instr::Entry],
            edges: Vec::new(),
            frontier: vec![0],
            returns: Vec::new(),
            call_labels: &mut ir.call_labels,
            stmt_labels: &mut ir.stmt_labels,
        };
        lw.block(&f.body);
        let exit = lw.instrs.len() as u32;
        lw.instrs.push(Instr::Exit);
        let mut edges = std::mem::take(&mut lw.edges);
        for &p in lw.frontier.iter().chain(lw.returns.iter()) {
            edges.push((p, exit));
        }
        let instrs = std::mem::take(&mut lw.instrs);
        let n = instrs.len();
        let mut succs = vec![Vec::new(); n];
        let mut preds = vec![Vec::new(); n];
        edges.sort_unstable();
        edges.dedup();
        for (a, b) in edges {
            succs[a as usize].push(b);
            preds[b as usize].push(a);
        }
        let mut dead = vec![true; n];
        let mut stack = vec![0usize];
        dead[0] = false;
        while let Some(i) = stack.pop() {
            for &s in &succs[i] {
                if dead[s as usize] {
                    dead[s as usize] = false;
                    stack.push(s as usize);
                }
            }
        }
        ir.funcs.push(FuncIr { id: fid, instrs, succs, preds, entry: 0, exit, dead });
    }
    for f in &ir.funcs {
        for (i, ins) in f.instrs.iter().enumerate() {
            if let Instr::Call { callee: Callee::User(g), .. } = ins {
                let l = f.label(i as u32);
                ir.call_edges.push((f.id, l, *g));
                ir.call_sites[g.0 as usize].push(l);
            }
        }
    }
    ir
}

struct Lowerer<'a> {
    st: &'a SymbolTable,
    fid: FuncId,
    taken: &'a [FuncId],
    instrs: Vec<Instr>,
    edges: Vec<(u32, u32)>,
    frontier: Vec<u32>,
    returns: Vec<u32>,
    call_labels: &'a mut HashMap<NodeId, Label>,
    stmt_labels: &'a mut HashMap<NodeId, Label>,
}

impl Lowerer<'_> {
    fn emit(&mut self, ins: Instr) -> u32 {
        let l = self.instrs.len() as u32;
        self.instrs.push(ins);
        for &p in &self.frontier {
            self.edges.push((p, l));
        }
        self.frontier = vec![l];
        l
    }

    fn label(&self, idx: u32) -> Label {
        Label { func: self.fid, idx }
    }

    fn mark_stmt(&mut self, s: &Stmt, idx: u32) {
        let l = self.label(idx);
        self.stmt_labels.insert(s.id, l);
    }

    fn block(&mut self, b: &[Stmt]) {
        for s in b {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Decl(d) => {
                let slot = Location::Local(self.fid, self.st.decls[&s.id]);
                let l = match &d.init {
                    Some(init) if d.ty.is_stream() => self.store(slot, init),
                    Some(init) => {
                        self.calls_in(init);
                        self.emit(Instr::Other { node: s.id })
                    }
                    None => self.emit(Instr::Other { node: s.id }),
                };
                self.mark_stmt(s, l);
            }
            StmtKind::Assign { lhs, rhs } => {
                let l = match self.st.path_location(lhs) {
                    Some(loc) if self.st.location_type(loc).is_stream() => self.store(loc, rhs),
                    _ => {
                        self.calls_in(rhs);
                        self.emit(Instr::Other { node: s.id })
                    }
                };
                self.mark_stmt(s, l);
            }
            StmtKind::Expr(e) => {
                let l = match &e.kind {
                    ExprKind::Call { .. } => self.call(e, None),
                    _ => {
                        self.calls_in(e);
                        self.emit(Instr::Other { node: s.id })
                    }
                };
                self.mark_stmt(s, l);
            }
            StmtKind::If { cond, then, els } => {
                self.calls_in(cond);
                let br = self.emit(Instr::Branch { node: cond.id });
                self.mark_stmt(s, br);
                self.block(then);
                let after_then = std::mem::replace(&mut self.frontier, vec![br]);
                if let Some(b) = els {
                    self.block(b);
                }
                self.frontier.extend(after_then);
            }
            StmtKind::While { cond, body } => {
                let head = self.instrs.len() as u32;
                self.calls_in(cond);
                let br = self.emit(Instr::Branch { node: cond.id });
                self.mark_stmt(s, br);
                self.block(body);
                for &p in &self.frontier {
                    self.edges.push((p, head));
                }
                self.frontier = vec![br];
            }
            StmtKind::Return(value) => {
                if let Some(e) = value {
                    if self.st.func(self.fid).ret.is_stream() {
                        self.store(Location::Ret(self.fid), e);
                    } else {
                        self.calls_in(e);
                    }
                }
                let r = self.emit(Instr::Return { node: s.id });
                self.mark_stmt(s, r);
                self.returns.push(r);
                self.frontier.clear();
            }
        }
    }

    /// Lowers `loc = e` for a stream-typed slot.
    fn store(&mut self, loc: Location, e: &Expr) -> u32 {
        if let ExprKind::Call { .. } = e.kind {
            return self.call(e, Some(loc));
        }
        let v = self.value(e);
        self.emit(Instr::Assign { node: e.id, lhs: loc, rhs: v })
    }

    /// Stream value of an expression, lowering any calls inside it first.
    fn value(&mut self, e: &Expr) -> Value {
        match &e.kind {
            ExprKind::Path(p) => match self.st.path_location(p) {
                Some(l) => Value::Loc(l),
                None => Value::Opaque,
            },
            ExprKind::Std(s) => Value::Std(*s),
            ExprKind::Null => Value::Null,
            ExprKind::Call { .. } => {
                let anon = Location::Anon(self.fid, e.id);
                self.call(e, Some(anon));
                Value::Loc(anon)
            }
            _ => {
                self.calls_in(e);
                Value::Opaque
            }
        }
    }

    /// Lowers every call nested in a non-stream expression, in evaluation order.
    fn calls_in(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Call { .. } => {
                let result = self.st.is_stream_expr(e).then_some(Location::Anon(self.fid, e.id));
                self.call(e, result);
            }
            ExprKind::Binary { lhs, rhs, .. } => {
                self.calls_in(lhs);
                self.calls_in(rhs);
            }
            ExprKind::Unary { operand, .. } | ExprKind::Cast { operand, .. } => self.calls_in(operand),
            _ => {}
        }
    }

    fn stream_arg(&mut self, a: &Expr) -> Arg {
        match self.value(a) {
            Value::Loc(l) => Arg::Stream(l),
            Value::Null => Arg::Null,
            v => {
                let anon = Location::Anon(self.fid, a.id);
                self.emit(Instr::Assign { node: a.id, lhs: anon, rhs: v });
                Arg::Stream(anon)
            }
        }
    }

    fn call(&mut self, e: &Expr, result: Option<Location>) -> u32 {
        let ExprKind::Call { args, .. } = &e.kind else { unreachable!("call expected") };
        let st = self.st;
        let kind = st.calls[&e.id].clone();
        let stream_param = |i: usize| -> bool {
            match &kind {
                CallKind::Lib(lib) => lib.params().get(i) == Some(&ArgKind::Stream),
                CallKind::User(f) => st.func(*f).locals[i].ty.is_stream(),
                CallKind::Indirect(v) => match st.var_type(*v) {
                    Type::Func(ps, _) => ps.get(i).is_some_and(Type::is_stream),
                    _ => false,
                },
            }
        };
        let mut lowered = Vec::with_capacity(args.len());
        for (i, a) in args.iter().enumerate() {
            let streamish = stream_param(i) || self.st.is_stream_expr(a);
            lowered.push(if streamish && (self.st.is_stream_expr(a) || matches!(a.kind, ExprKind::Null)) {
                self.stream_arg(a)
            } else {
                self.calls_in(a);
                Arg::Value
            });
        }
        let callee = match kind {
            CallKind::Lib(l) => Callee::Lib(l),
            CallKind::User(f) => Callee::User(f),
            CallKind::Indirect(var) => {
                let n = args.len();
                let targets = self.taken.iter().copied().filter(|f| self.st.func(*f).nparams == n).collect();
                Callee::Indirect { var, targets }
            }
        };
        let l = self.emit(Instr::Call { node: e.id, callee, args: lowered, result });
        let lab = self.label(l);
        self.call_labels.insert(e.id, lab);
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::api::default_nonposix;
    use crate::frontend::load;

    fn build(src: &str) -> (SymbolTable, IrProgram) {
        let (p, st) = load(src, &default_nonposix()).unwrap();
        let ir = lower(&p, &st);
        (st, ir)
    }

    #[test]
    fn straight_line_chain() {
        let (_, ir) = build("void main() { int a; a = 1; a = 2; }");
        let f = &ir.funcs[0];
        // entry, decl, a=1, a=2, exit
        assert_eq!(f.len(), 5);
        assert_eq!(ir.predecessors(f.label(3)).unwrap(), vec![f.label(2)]);
        assert!(ir.predecessors(f.label(0)).unwrap().is_empty());
    }

    #[test]
    fn ferror_after_conditional_has_two_predecessors() {
        let (_, ir) = build(
            "void foo(FILE *f, int cond) { string s; if (cond) { fread(s, 1, 1, f); } if (ferror(f)) { } }",
        );
        let (l, _) = ir
            .labels()
            .find(|(_, i)| matches!(i, Instr::Call { callee: Callee::Lib(LibFn::Api(crate::api::ApiFn::Ferror)), .. }))
            .unwrap();
        assert_eq!(ir.predecessors(l).unwrap().len(), 2);
    }

    #[test]
    fn while_body_loops_to_head() {
        let (_, ir) = build("void main(FILE *f) { while (fgetc(f) != EOF) { fputc('x', stdout); } }");
        let f = &ir.funcs[0];
        let head = f
            .instrs
            .iter()
            .position(|i| matches!(i, Instr::Call { callee: Callee::Lib(LibFn::Api(crate::api::ApiFn::Fgetc)), .. }))
            .unwrap() as u32;
        let body = f
            .instrs
            .iter()
            .position(|i| matches!(i, Instr::Call { callee: Callee::Lib(LibFn::Api(crate::api::ApiFn::Fputc)), .. }))
            .unwrap() as u32;
        assert!(f.succs[body as usize].contains(&head));
        assert!(f.preds[head as usize].contains(&body));
    }

    #[test]
    fn call_sites_include_recursion() {
        let (st, ir) = build("void r(int n) { if (n) { r(n - 1); } } void bar() { r(3); } void lone() { }");
        let r = st.func_id("r").unwrap();
        assert_eq!(ir.call_sites(r).unwrap().len(), 2);
        assert!(ir.call_sites(r).unwrap().iter().any(|l| l.func == r));
        assert!(ir.call_sites(st.func_id("lone").unwrap()).unwrap().is_empty());
    }

    #[test]
    fn returns_funnel_into_one_exit_and_dead_code_flagged() {
        let (_, ir) = build("int f(int a) { if (a) { return 1; } return 2; a = 3; }");
        let f = &ir.funcs[0];
        let exit = f.exit as usize;
        let live: Vec<_> = f.preds[exit].iter().filter(|&&p| !f.dead[p as usize]).collect();
        assert_eq!(live.len(), 2);
        let dead: Vec<_> = (0..f.len()).filter(|&i| f.dead[i]).collect();
        assert_eq!(dead.len(), 1);
    }

    #[test]
    fn preds_are_transpose_of_succs() {
        let (_, ir) = build(
            "void main(int c) { while (c) { if (c > 1) { c = c - 1; } else { return; } } c = 0; }",
        );
        for f in &ir.funcs {
            for (a, ss) in f.succs.iter().enumerate() {
                for &b in ss {
                    assert!(f.preds[b as usize].contains(&(a as u32)));
                }
            }
            for (b, ps) in f.preds.iter().enumerate() {
                for &a in ps {
                    assert!(f.succs[a as usize].contains(&(b as u32)));
                }
            }
        }
    }

    #[test]
    fn std_argument_gets_an_anonymous_slot() {
        let (st, ir) = build("void main() { fputs(\"x\", stderr); }");
        let f = &ir.funcs[0];
        let Instr::Assign { lhs, rhs: Value::Std(StdStream::Stderr), .. } = f.instrs[1] else { panic!("{:?}", f.instrs) };
        let Instr::Call { args, .. } = &f.instrs[2] else { panic!() };
        assert_eq!(args[1], Arg::Stream(lhs));
        assert!(st.location_name(lhs).starts_with("main::<tmp"));
    }

    #[test]
    fn unknown_label_is_an_error() {
        let (_, ir) = build("void main() { }");
        let bogus = Label { func: FuncId(0), idx: 99 };
        assert_eq!(ir.predecessors(bogus), Err(IrError::UnknownLabel(bogus)));
    }
}
