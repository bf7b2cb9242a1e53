use super::ast::*;
use super::lexer::{tokenize, Kw, Tok};
use super::SyntaxError;

/// Integer constants that read like identifiers in C sources.
pub const NAMED_CONSTANTS: &[(&str, i64)] = &[("EOF", -1), ("SEEK_SET", 0), ("SEEK_CUR", 1), ("SEEK_END", 2)];

pub fn parse(src: &str) -> Result<Program, SyntaxError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, at: 0, next_id: 0 };
    p.program()
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    next_id: u32,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.at + n).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at < self.toks.len() - 1 {
            self.at += 1;
        }
        t
    }

    fn fresh(&mut self) -> NodeId {
        self.next_id += 1;
        NodeId(self.next_id)
    }

    fn expected(&self, what: &[&str]) -> SyntaxError {
        SyntaxError {
            pos: self.pos(),
            message: format!("expected one of {{{}}}, found {}", what.join(", "), self.peek()),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.expected(&[&format!("`{p}`")]))
        }
    }

    fn is_kw(&self, k: Kw) -> bool {
        matches!(self.peek(), Tok::Kw(q) if *q == k)
    }

    fn eat_kw(&mut self, k: Kw) -> bool {
        if self.is_kw(k) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                if NAMED_CONSTANTS.iter().any(|(n, _)| *n == s) {
                    return Err(SyntaxError {
                        pos: self.pos(),
                        message: format!("`{s}` is a reserved constant"),
                    });
                }
                self.advance();
                Ok(s)
            }
            _ => Err(self.expected(&["identifier"])),
        }
    }

    fn starts_type(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Kw(Kw::Int | Kw::String | Kw::Void | Kw::Struct | Kw::File | Kw::Fn)
        )
    }

    fn program(&mut self) -> PResult<Program> {
        let mut prog = Program { records: vec![], globals: vec![], functions: vec![] };
        while *self.peek() != Tok::Eof {
            let pos = self.pos();
            if self.is_kw(Kw::Struct)
                && matches!(self.peek_at(1), Tok::Ident(_))
                && matches!(self.peek_at(2), Tok::Punct("{"))
            {
                prog.records.push(self.record_def()?);
                continue;
            }
            if !self.starts_type() {
                return Err(self.expected(&["`struct`", "type"]));
            }
            let ty = self.ty()?;
            let name = self.ident()?;
            if self.eat_punct("(") {
                let mut params = Vec::new();
                if !self.is_punct(")") {
                    loop {
                        let pty = self.ty()?;
                        let pname = self.ident()?;
                        params.push(Param { name: pname, ty: pty });
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect_punct(")")?;
                let body = self.block()?;
                prog.functions.push(FunctionDef { name, params, ret: ty, body, address_taken: false, pos });
            } else {
                let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
                self.expect_punct(";")?;
                prog.globals.push(VarDecl { name, ty, init, pos });
            }
        }
        Ok(prog)
    }

    fn record_def(&mut self) -> PResult<RecordDef> {
        let pos = self.pos();
        self.advance();
        let name = self.ident()?;
        self.expect_punct("{")?;
        let mut fields = Vec::new();
        while !self.eat_punct("}") {
            let ty = self.ty()?;
            let f = self.ident()?;
            self.expect_punct(";")?;
            fields.push((f, ty));
        }
        self.eat_punct(";");
        Ok(RecordDef { name, fields, pos })
    }

    fn ty(&mut self) -> PResult<Type> {
        let base = match self.advance() {
            Tok::Kw(Kw::Int) => Type::Int,
            Tok::Kw(Kw::String) => Type::Str,
            Tok::Kw(Kw::Void) => {
                if self.eat_punct("*") {
                    Type::VoidPtr
                } else {
                    Type::Void
                }
            }
            Tok::Kw(Kw::File) => {
                self.expect_punct("*")?;
                Type::File
            }
            Tok::Kw(Kw::Struct) => {
                let n = self.ident()?;
                if self.eat_punct("*") {
                    Type::RecordPtr(n)
                } else {
                    Type::Record(n)
                }
            }
            Tok::Kw(Kw::Fn) => {
                self.expect_punct("(")?;
                let mut params = Vec::new();
                if !self.is_punct(")") {
                    loop {
                        params.push(self.ty()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect_punct(")")?;
                self.expect_punct("->")?;
                let ret = self.ty()?;
                Type::Func(params, Box::new(ret))
            }
            _ => {
                self.at -= 1;
                return Err(self.expected(&["`int`", "`string`", "`void`", "`FILE`", "`struct`", "`fn`"]));
            }
        };
        Ok(base)
    }

    fn block(&mut self) -> PResult<Block> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.eat_punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.expected(&["`}`"]));
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        let id = self.fresh();
        let kind = if self.starts_type() {
            let ty = self.ty()?;
            let name = self.ident()?;
            let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
            self.expect_punct(";")?;
            StmtKind::Decl(VarDecl { name, ty, init, pos })
        } else if self.eat_kw(Kw::If) {
            return self.if_rest(id, pos);
        } else if self.eat_kw(Kw::While) {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = self.block()?;
            StmtKind::While { cond, body }
        } else if self.eat_kw(Kw::Return) {
            let value = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect_punct(";")?;
            StmtKind::Return(value)
        } else {
            let e = self.expr()?;
            if self.eat_punct("=") {
                let lhs = match e.kind {
                    ExprKind::Path(p) => p,
                    _ => {
                        return Err(SyntaxError {
                            pos: e.pos,
                            message: "left side of assignment must be a variable or field path".into(),
                        })
                    }
                };
                let rhs = self.expr()?;
                self.expect_punct(";")?;
                StmtKind::Assign { lhs, rhs }
            } else {
                self.expect_punct(";")?;
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt { id, kind, pos })
    }

    fn if_rest(&mut self, id: NodeId, pos: Pos) -> PResult<Stmt> {
        self.expect_punct("(")?;
        let cond = self.expr()?;
        self.expect_punct(")")?;
        let then = self.block()?;
        let els = if self.eat_kw(Kw::Else) {
            if self.is_kw(Kw::If) {
                let inner_pos = self.pos();
                self.advance();
                let inner_id = self.fresh();
                Some(vec![self.if_rest(inner_id, inner_pos)?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt { id, kind: StmtKind::If { cond, then, els }, pos })
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        let Tok::Punct(p) = self.peek() else { return None };
        Some(match *p {
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            if op.precedence() < min_prec {
                break;
            }
            let pos = self.pos();
            self.advance();
            let rhs = self.binary(op.precedence() + 1)?;
            let id = self.fresh();
            lhs = Expr { id, kind: ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, pos };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let op = if self.eat_punct("!") {
            Some(UnOp::Not)
        } else if self.eat_punct("-") {
            Some(UnOp::Neg)
        } else {
            None
        };
        match op {
            Some(op) => {
                let operand = self.unary()?;
                if let (UnOp::Neg, ExprKind::Int(n)) = (op, &operand.kind) {
                    return Ok(Expr { id: operand.id, kind: ExprKind::Int(-n), pos });
                }
                let id = self.fresh();
                Ok(Expr { id, kind: ExprKind::Unary { op, operand: Box::new(operand) }, pos })
            }
            None => self.primary(),
        }
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                ExprKind::Int(n)
            }
            Tok::Char(c) => {
                self.advance();
                ExprKind::Char(c)
            }
            Tok::Str(s) => {
                self.advance();
                ExprKind::Str(s)
            }
            Tok::Kw(Kw::Null) => {
                self.advance();
                ExprKind::Null
            }
            Tok::Kw(Kw::Stdin) => {
                self.advance();
                ExprKind::Std(StdStream::Stdin)
            }
            Tok::Kw(Kw::Stdout) => {
                self.advance();
                ExprKind::Std(StdStream::Stdout)
            }
            Tok::Kw(Kw::Stderr) => {
                self.advance();
                ExprKind::Std(StdStream::Stderr)
            }
            Tok::Kw(Kw::New) => {
                self.advance();
                ExprKind::New(self.ident()?)
            }
            Tok::Ident(name) => {
                if let Some((_, v)) = NAMED_CONSTANTS.iter().find(|(n, _)| *n == name) {
                    self.advance();
                    ExprKind::Int(*v)
                } else {
                    self.advance();
                    if self.is_punct("(") {
                        let args = self.args()?;
                        ExprKind::Call { callee: name, deref: false, args }
                    } else {
                        let path_id = self.fresh();
                        let mut fields = Vec::new();
                        while self.is_punct(".") || self.is_punct("->") {
                            self.advance();
                            fields.push(self.ident()?);
                        }
                        ExprKind::Path(Path { id: path_id, root: name, fields, pos })
                    }
                }
            }
            Tok::Punct("(") => {
                self.advance();
                if self.starts_type() {
                    let ty = self.ty()?;
                    self.expect_punct(")")?;
                    let operand = self.unary()?;
                    ExprKind::Cast { ty, operand: Box::new(operand) }
                } else if self.is_punct("*") && matches!(self.peek_at(1), Tok::Ident(_)) && matches!(self.peek_at(2), Tok::Punct(")")) {
                    self.advance();
                    let callee = self.ident()?;
                    self.expect_punct(")")?;
                    let args = self.args()?;
                    ExprKind::Call { callee, deref: true, args }
                } else {
                    let inner = self.expr()?;
                    self.expect_punct(")")?;
                    return Ok(inner);
                }
            }
            _ => {
                return Err(self.expected(&[
                    "expression",
                    "identifier",
                    "literal",
                    "`NULL`",
                    "`stdin`",
                    "`stdout`",
                    "`stderr`",
                    "`(`",
                ]))
            }
        };
        let id = self.fresh();
        Ok(Expr { id, kind, pos })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let p = parse("FILE *f; void main() { f = stdin; }").unwrap();
        assert_eq!(p.globals.len(), 1);
        assert_eq!(p.globals[0].ty, Type::File);
        assert_eq!(p.functions.len(), 1);
        assert!(matches!(p.functions[0].body[0].kind, StmtKind::Assign { .. }));
    }

    #[test]
    fn precedence_and_casts() {
        let p = parse("void main() { int x; x = 1 + 2 * 3 == 7; x = (int) x; }").unwrap();
        let StmtKind::Assign { rhs, .. } = &p.functions[0].body[1].kind else { panic!() };
        let ExprKind::Binary { op: BinOp::Eq, lhs, .. } = &rhs.kind else { panic!("{rhs:?}") };
        assert!(matches!(lhs.kind, ExprKind::Binary { op: BinOp::Add, .. }));
        let StmtKind::Assign { rhs, .. } = &p.functions[0].body[2].kind else { panic!() };
        assert!(matches!(rhs.kind, ExprKind::Cast { ty: Type::Int, .. }));
    }

    #[test]
    fn deref_call_and_fields() {
        let p = parse("void main() { (*fp)(s->out.f); }").unwrap();
        let StmtKind::Expr(e) = &p.functions[0].body[0].kind else { panic!() };
        let ExprKind::Call { callee, deref, args } = &e.kind else { panic!() };
        assert_eq!(callee, "fp");
        assert!(deref);
        assert_eq!(args[0].as_path().unwrap().fields, vec!["out".to_string(), "f".to_string()]);
    }

    #[test]
    fn syntax_error_lists_expected_tokens() {
        let err = parse("void main() { x = ; }").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 19 });
        assert!(err.message.contains("expected one of"), "{}", err.message);
    }

    #[test]
    fn else_if_chains_nest() {
        let p = parse("void main() { if (1) { } else if (2) { } else { } }").unwrap();
        let StmtKind::If { els: Some(els), .. } = &p.functions[0].body[0].kind else { panic!() };
        assert!(matches!(els[0].kind, StmtKind::If { els: Some(_), .. }));
    }

    #[test]
    fn named_constants_become_ints() {
        let p = parse("void main() { int c; c = EOF; }").unwrap();
        let StmtKind::Assign { rhs, .. } = &p.functions[0].body[1].kind else { panic!() };
        assert_eq!(rhs.kind, ExprKind::Int(-1));
    }
}
