//! Frontend for the mini-language: lexer, recursive-descent parser, and
//! lowering of the AST to the guarded-command control-flow graph.
//!
//! Lowering rules: declarations with an initializer produce assignment
//! edges in declaration order; compound conditions expand by short-circuit
//! into intermediate locations so every guard is a single linear atom or
//! its negation; an `if` without `else` still gets an explicit empty else
//! arm, so branch coverage counts both directions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::ir::{
    assemble_self_labeled, Command, LinExpr, Loc, NonlinFactor, Op, Program, ProgramError, Var,
    VarId,
};
use crate::logic::{Atom, LinComb, Rel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("line {line}: `{name}` is reserved for input symbols")]
    ReservedName { line: u32, name: String },
    #[error("line {line}: variable `{name}` declared twice")]
    DuplicateDecl { line: u32, name: String },
    #[error("line {line}: undeclared variable `{name}`")]
    Undeclared { line: u32, name: String },
    #[error("line {line}: more than one nonlinear factor in expression")]
    NonlinearTooMany { line: u32 },
    #[error("line {line}: nonlinear factor not allowed in a condition")]
    NonlinearGuard { line: u32 },
    #[error("variable `{var}` may be read before initialization (line {line})")]
    UninitializedRead { var: String, line: u32 },
    #[error("invalid program: {0}")]
    Program(#[from] ProgramError),
}

// ---------------------------------------------------------------- lexer --

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    KwVar,
    KwIf,
    KwElse,
    KwWhile,
    KwInput,
    KwTrue,
    KwFalse,
    Semi,
    Assign,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Plus,
    Minus,
    Star,
    Lt,
    Le,
    EqEq,
    Ne,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

#[derive(Debug, Clone)]
struct Lexed {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(src: &str) -> Result<Vec<Lexed>, ParseError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0usize;
    let (mut line, mut col) = (1u32, 1u32);
    let mut push = |tok: Tok, line: u32, col: u32| out.push(Lexed { tok, line, col });
    while i < bytes.len() {
        let c = bytes[i] as char;
        let (tl, tc) = (line, col);
        let mut advance = |i: &mut usize, n: usize| {
            *i += n;
            col += n as u32;
        };
        match c {
            ' ' | '\t' | '\r' => advance(&mut i, 1),
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            '/' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'/' {
                    while i < bytes.len() && bytes[i] != b'\n' {
                        i += 1;
                    }
                } else {
                    return Err(ParseError::Syntax {
                        line: tl,
                        col: tc,
                        msg: "unexpected `/`".into(),
                    });
                }
            }
            ';' => {
                push(Tok::Semi, tl, tc);
                advance(&mut i, 1);
            }
            '(' => {
                push(Tok::LParen, tl, tc);
                advance(&mut i, 1);
            }
            ')' => {
                push(Tok::RParen, tl, tc);
                advance(&mut i, 1);
            }
            '{' => {
                push(Tok::LBrace, tl, tc);
                advance(&mut i, 1);
            }
            '}' => {
                push(Tok::RBrace, tl, tc);
                advance(&mut i, 1);
            }
            '+' => {
                push(Tok::Plus, tl, tc);
                advance(&mut i, 1);
            }
            '-' => {
                push(Tok::Minus, tl, tc);
                advance(&mut i, 1);
            }
            '*' => {
                push(Tok::Star, tl, tc);
                advance(&mut i, 1);
            }
            '<' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    push(Tok::Le, tl, tc);
                    advance(&mut i, 2);
                } else {
                    push(Tok::Lt, tl, tc);
                    advance(&mut i, 1);
                }
            }
            '>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    push(Tok::Ge, tl, tc);
                    advance(&mut i, 2);
                } else {
                    push(Tok::Gt, tl, tc);
                    advance(&mut i, 1);
                }
            }
            '=' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    push(Tok::EqEq, tl, tc);
                    advance(&mut i, 2);
                } else {
                    push(Tok::Assign, tl, tc);
                    advance(&mut i, 1);
                }
            }
            '!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    push(Tok::Ne, tl, tc);
                    advance(&mut i, 2);
                } else {
                    push(Tok::Bang, tl, tc);
                    advance(&mut i, 1);
                }
            }
            '&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    push(Tok::AndAnd, tl, tc);
                    advance(&mut i, 2);
                } else {
                    return Err(ParseError::Syntax {
                        line: tl,
                        col: tc,
                        msg: "expected `&&`".into(),
                    });
                }
            }
            '|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    push(Tok::OrOr, tl, tc);
                    advance(&mut i, 2);
                } else {
                    return Err(ParseError::Syntax {
                        line: tl,
                        col: tc,
                        msg: "expected `||`".into(),
                    });
                }
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                let text = &src[start..i];
                col += (i - start) as u32;
                let n: i64 = text.parse().map_err(|_| ParseError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("integer literal `{text}` out of range"),
                })?;
                push(Tok::Int(n), tl, tc);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                let text = &src[start..i];
                col += (i - start) as u32;
                let tok = match text {
                    "var" => Tok::KwVar,
                    "if" => Tok::KwIf,
                    "else" => Tok::KwElse,
                    "while" => Tok::KwWhile,
                    "input" => Tok::KwInput,
                    "true" => Tok::KwTrue,
                    "false" => Tok::KwFalse,
                    _ => Tok::Ident(text.to_string()),
                };
                push(tok, tl, tc);
            }
            other => {
                return Err(ParseError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    out.push(Lexed { tok: Tok::Eof, line, col });
    Ok(out)
}

// ------------------------------------------------------------------ AST --

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ast {
    pub decls: Vec<Decl>,
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decl {
    pub name: String,
    pub init: Option<i64>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign { name: String, expr: Expr, line: u32 },
    Input { name: String, line: u32 },
    If { cond: Cond, then: Vec<Stmt>, els: Vec<Stmt>, line: u32 },
    While { cond: Cond, body: Vec<Stmt>, line: u32 },
}

/// Surface expression: `constant + Σ coeff·name (+ coeff·name·name)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub constant: i64,
    pub terms: Vec<(i64, String)>,
    pub nonlinear: Option<(i64, String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cond {
    Cmp { lhs: Expr, rel: Rel, rhs: Expr },
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
    /// Bare boolean variable; lowers to `name != 0`.
    Var(String),
}

// ---------------------------------------------------------------- parser --

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (u32, u32) {
        (self.toks[self.pos].line, self.toks[self.pos].col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            let (line, col) = self.here();
            Err(ParseError::Syntax { line, col, msg: format!("expected {what}") })
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, u32), ParseError> {
        let (line, col) = self.here();
        match self.bump() {
            Tok::Ident(s) => Ok((s, line)),
            _ => Err(ParseError::Syntax { line, col, msg: format!("expected {what}") }),
        }
    }

    fn program(&mut self) -> Result<Ast, ParseError> {
        let mut decls = Vec::new();
        while *self.peek() == Tok::KwVar {
            self.bump();
            let (name, line) = self.ident("variable name")?;
            let init = if *self.peek() == Tok::Assign {
                self.bump();
                Some(self.int_literal()?)
            } else {
                None
            };
            self.expect(Tok::Semi, "`;` after declaration")?;
            decls.push(Decl { name, init, line });
        }
        let mut stmts = Vec::new();
        while *self.peek() != Tok::Eof {
            stmts.push(self.stmt()?);
        }
        Ok(Ast { decls, stmts })
    }

    fn int_literal(&mut self) -> Result<i64, ParseError> {
        let (line, col) = self.here();
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            Tok::Int(n) => Ok(if neg { -n } else { n }),
            Tok::KwTrue => Ok(1),
            Tok::KwFalse => Ok(0),
            _ => Err(ParseError::Syntax { line, col, msg: "expected integer literal".into() }),
        }
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::KwIf => {
                self.bump();
                self.expect(Tok::LParen, "`(` after `if`")?;
                let cond = self.cond()?;
                self.expect(Tok::RParen, "`)` after condition")?;
                let then = self.block()?;
                let els = if *self.peek() == Tok::KwElse {
                    self.bump();
                    self.block()?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If { cond, then, els, line })
            }
            Tok::KwWhile => {
                self.bump();
                self.expect(Tok::LParen, "`(` after `while`")?;
                let cond = self.cond()?;
                self.expect(Tok::RParen, "`)` after condition")?;
                let body = self.block()?;
                Ok(Stmt::While { cond, body, line })
            }
            Tok::Ident(name) => {
                self.bump();
                self.expect(Tok::Assign, "`=` in assignment")?;
                if *self.peek() == Tok::KwInput {
                    self.bump();
                    self.expect(Tok::LParen, "`(` after `input`")?;
                    self.expect(Tok::RParen, "`)` after `input(`")?;
                    self.expect(Tok::Semi, "`;` after statement")?;
                    Ok(Stmt::Input { name, line })
                } else {
                    let expr = self.expr()?;
                    self.expect(Tok::Semi, "`;` after statement")?;
                    Ok(Stmt::Assign { name, expr, line })
                }
            }
            _ => Err(ParseError::Syntax { line, col, msg: "expected statement".into() }),
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                let (line, col) = self.here();
                return Err(ParseError::Syntax { line, col, msg: "unterminated block".into() });
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(stmts)
    }

    /// `expr := (sign? factor) (("+"|"-") factor)*` where
    /// `factor := INT ("*" IDENT ("*" IDENT)?)? | IDENT ("*" IDENT)?`.
    fn expr(&mut self) -> Result<Expr, ParseError> {
        let (line, _) = self.here();
        let mut out = Expr { constant: 0, terms: Vec::new(), nonlinear: None };
        let mut sign = 1i64;
        if *self.peek() == Tok::Minus {
            self.bump();
            sign = -1;
        }
        loop {
            self.factor(sign, &mut out, line)?;
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    sign = 1;
                }
                Tok::Minus => {
                    self.bump();
                    sign = -1;
                }
                _ => break,
            }
        }
        Ok(out)
    }

    fn factor(&mut self, sign: i64, out: &mut Expr, line: u32) -> Result<(), ParseError> {
        let (l, c) = self.here();
        let mut coeff = sign;
        let first_ident: String;
        match self.bump() {
            Tok::Int(n) => {
                coeff *= n;
                if *self.peek() != Tok::Star {
                    out.constant += coeff;
                    return Ok(());
                }
                self.bump();
                let (name, _) = self.ident("identifier after `*`")?;
                first_ident = name;
            }
            Tok::KwTrue => {
                out.constant += sign;
                return Ok(());
            }
            Tok::KwFalse => {
                return Ok(());
            }
            Tok::Ident(name) => {
                first_ident = name;
            }
            _ => {
                return Err(ParseError::Syntax {
                    line: l,
                    col: c,
                    msg: "expected integer or identifier".into(),
                });
            }
        }
        if *self.peek() == Tok::Star {
            self.bump();
            let (second, _) = self.ident("identifier after `*`")?;
            if out.nonlinear.is_some() {
                return Err(ParseError::NonlinearTooMany { line });
            }
            out.nonlinear = Some((coeff, first_ident, second));
        } else {
            out.terms.push((coeff, first_ident));
        }
        Ok(())
    }

    fn cond(&mut self) -> Result<Cond, ParseError> {
        let mut lhs = self.cond_and()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.cond_and()?;
            lhs = Cond::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_and(&mut self) -> Result<Cond, ParseError> {
        let mut lhs = self.cond_unary()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.cond_unary()?;
            lhs = Cond::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_unary(&mut self) -> Result<Cond, ParseError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(Cond::Not(Box::new(self.cond_unary()?)))
            }
            Tok::LParen => {
                self.bump();
                let c = self.cond()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(c)
            }
            _ => {
                let lhs = self.expr()?;
                let rel = match self.peek() {
                    Tok::Lt => Rel::Lt,
                    Tok::Le => Rel::Le,
                    Tok::EqEq => Rel::Eq,
                    Tok::Ne => Rel::Ne,
                    Tok::Gt => Rel::Gt,
                    Tok::Ge => Rel::Ge,
                    _ => {
                        // bare boolean variable
                        if lhs.constant == 0
                            && lhs.nonlinear.is_none()
                            && lhs.terms.len() == 1
                            && lhs.terms[0].0 == 1
                        {
                            return Ok(Cond::Var(lhs.terms[0].1.clone()));
                        }
                        let (line, col) = self.here();
                        return Err(ParseError::Syntax {
                            line,
                            col,
                            msg: "expected comparison operator".into(),
                        });
                    }
                };
                self.bump();
                let rhs = self.expr()?;
                Ok(Cond::Cmp { lhs, rel, rhs })
            }
        }
    }
}

/// Parses source text into the surface AST.
pub fn parse_ast(source: &str) -> Result<Ast, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser { toks, pos: 0 };
    p.program()
}

/// Parses and lowers source text into a [`Program`].
pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    lower(&parse_ast(source)?)
}

// -------------------------------------------------------------- lowering --

struct Lowerer {
    vars: Vec<Var>,
    var_of: BTreeMap<String, VarId>,
    /// union-find over liberally allocated locations
    uf: Vec<u32>,
    raw: Vec<(u32, Command, u32, u32)>, // src, cmd, dst, line
}

impl Lowerer {
    fn fresh(&mut self) -> u32 {
        let l = self.uf.len() as u32;
        self.uf.push(l);
        l
    }

    fn find(&mut self, mut l: u32) -> u32 {
        while self.uf[l as usize] != l {
            let parent = self.uf[l as usize];
            self.uf[l as usize] = self.uf[parent as usize];
            l = parent;
        }
        l
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller root so numbering follows allocation order
            let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.uf[drop as usize] = keep;
        }
    }

    fn var(&self, name: &str, line: u32) -> Result<VarId, ParseError> {
        self.var_of
            .get(name)
            .copied()
            .ok_or_else(|| ParseError::Undeclared { line, name: name.to_string() })
    }

    fn to_linexpr(&self, e: &Expr, line: u32) -> Result<LinExpr, ParseError> {
        let mut lin = LinComb::constant(e.constant);
        for (c, name) in &e.terms {
            lin.add_term(self.var(name, line)?, *c);
        }
        let nonlinear = match &e.nonlinear {
            None => None,
            Some((c, a, b)) => Some(NonlinFactor {
                coeff: *c,
                a: self.var(a, line)?,
                b: self.var(b, line)?,
            }),
        };
        Ok(LinExpr { lin, nonlinear })
    }

    fn guard_atom(&self, lhs: &Expr, rel: Rel, rhs: &Expr, line: u32) -> Result<Atom<VarId>, ParseError> {
        if lhs.nonlinear.is_some() || rhs.nonlinear.is_some() {
            return Err(ParseError::NonlinearGuard { line });
        }
        let l = self.to_linexpr(lhs, line)?.lin;
        let r = self.to_linexpr(rhs, line)?.lin;
        Ok(Atom::cmp(&l, rel, &r))
    }

    fn stmts(&mut self, stmts: &[Stmt], entry: u32) -> Result<u32, ParseError> {
        let mut cur = entry;
        for s in stmts {
            cur = self.stmt(s, cur)?;
        }
        Ok(cur)
    }

    fn stmt(&mut self, s: &Stmt, cur: u32) -> Result<u32, ParseError> {
        match s {
            Stmt::Assign { name, expr, line } => {
                let x = self.var(name, *line)?;
                let e = self.to_linexpr(expr, *line)?;
                let dst = self.fresh();
                self.raw.push((cur, Command { guard: None, op: Op::Assign(x, e) }, dst, *line));
                Ok(dst)
            }
            Stmt::Input { name, line } => {
                let x = self.var(name, *line)?;
                let dst = self.fresh();
                self.raw.push((cur, Command { guard: None, op: Op::Input(x) }, dst, *line));
                Ok(dst)
            }
            Stmt::If { cond, then, els, line } => {
                let (t_loc, f_loc) = self.cond(cond, cur, *line)?;
                let t_exit = self.stmts(then, t_loc)?;
                let f_exit = self.stmts(els, f_loc)?;
                self.union(t_exit, f_exit);
                Ok(self.find(t_exit))
            }
            Stmt::While { cond, body, line } => {
                let (body_loc, exit_loc) = self.cond(cond, cur, *line)?;
                let body_exit = self.stmts(body, body_loc)?;
                self.union(body_exit, cur);
                Ok(self.find(exit_loc))
            }
        }
    }

    /// Short-circuit expansion. Returns the locations control reaches when
    /// the condition is true and when it is false; the true-arm assume edge
    /// is emitted first at each split, fixing branch-id positions.
    fn cond(&mut self, c: &Cond, entry: u32, line: u32) -> Result<(u32, u32), ParseError> {
        match c {
            Cond::Cmp { lhs, rel, rhs } => {
                let g = self.guard_atom(lhs, *rel, rhs, line)?;
                let t = self.fresh();
                let f = self.fresh();
                self.raw
                    .push((entry, Command { guard: Some(g.clone()), op: Op::Assume }, t, line));
                self.raw
                    .push((entry, Command { guard: Some(g.negate()), op: Op::Assume }, f, line));
                Ok((t, f))
            }
            Cond::Var(name) => {
                let x = self.var(name, line)?;
                let g = Atom::cmp(&LinComb::sym(x), Rel::Ne, &LinComb::constant(0));
                let t = self.fresh();
                let f = self.fresh();
                self.raw
                    .push((entry, Command { guard: Some(g.clone()), op: Op::Assume }, t, line));
                self.raw
                    .push((entry, Command { guard: Some(g.negate()), op: Op::Assume }, f, line));
                Ok((t, f))
            }
            Cond::Not(inner) => {
                let (t, f) = self.cond(inner, entry, line)?;
                Ok((f, t))
            }
            Cond::And(a, b) => {
                let (t1, f1) = self.cond(a, entry, line)?;
                let (t2, f2) = self.cond(b, t1, line)?;
                self.union(f1, f2);
                Ok((t2, self.find(f1)))
            }
            Cond::Or(a, b) => {
                let (t1, f1) = self.cond(a, entry, line)?;
                let (t2, f2) = self.cond(b, f1, line)?;
                self.union(t1, t2);
                Ok((self.find(t1), f2))
            }
        }
    }
}

fn reserved(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next() == Some('r') && chars.all(|c| c.is_ascii_digit())
}

/// Lowers an AST to a [`Program`], running the reserved-name, declaration,
/// and conservative definite-assignment checks.
pub fn lower(ast: &Ast) -> Result<Program, ParseError> {
    let mut lw = Lowerer { vars: Vec::new(), var_of: BTreeMap::new(), uf: Vec::new(), raw: Vec::new() };
    for d in &ast.decls {
        if reserved(&d.name) {
            return Err(ParseError::ReservedName { line: d.line, name: d.name.clone() });
        }
        if lw.var_of.contains_key(&d.name) {
            return Err(ParseError::DuplicateDecl { line: d.line, name: d.name.clone() });
        }
        let id = VarId(lw.vars.len() as u32);
        lw.vars.push(Var { name: d.name.clone() });
        lw.var_of.insert(d.name.clone(), id);
    }
    let entry = lw.fresh();
    let mut cur = entry;
    for d in &ast.decls {
        if let Some(c) = d.init {
            let x = lw.var_of[&d.name];
            let dst = lw.fresh();
            lw.raw.push((
                cur,
                Command { guard: None, op: Op::Assign(x, LinExpr::constant(c)) },
                dst,
                d.line,
            ));
            cur = dst;
        }
    }
    lw.stmts(&ast.stmts, cur)?;

    // compact union-find representatives into dense location numbers
    let mut dense: BTreeMap<u32, Loc> = BTreeMap::new();
    let mut count = 0u32;
    let all: Vec<u32> = (0..lw.uf.len() as u32).collect();
    for l in all {
        let r = lw.find(l);
        dense.entry(r).or_insert_with(|| {
            let d = Loc(count);
            count += 1;
            d
        });
    }
    let mut raw = Vec::with_capacity(lw.raw.len());
    let mut lines = Vec::with_capacity(lw.raw.len());
    let moved: Vec<(u32, Command, u32, u32)> = std::mem::take(&mut lw.raw);
    for (src, cmd, dst, line) in moved {
        let s = dense[&lw.find(src)];
        let d = dense[&lw.find(dst)];
        raw.push((s, cmd, d));
        lines.push(line);
    }
    let init = dense[&lw.find(entry)];
    let program = assemble_self_labeled(lw.vars, count, init, raw, None)?;
    definite_assignment(&program, &lines)?;
    Ok(program)
}

/// Forward must-assign dataflow; rejects any read of a variable that is not
/// assigned on every path from the initial location.
fn definite_assignment(p: &Program, edge_lines: &[u32]) -> Result<(), ParseError> {
    let nvars = p.vars.len();
    let full: Vec<bool> = vec![true; nvars];
    let mut assigned: Vec<Vec<bool>> = vec![full; p.loc_count as usize];
    assigned[p.init.0 as usize] = vec![false; nvars];
    // edges were sorted by source in Program::new; recover lowering order by id
    let mut changed = true;
    while changed {
        changed = false;
        for e in &p.edges {
            let mut flow = assigned[e.src.0 as usize].clone();
            match &e.cmd.op {
                Op::Assign(x, _) | Op::Input(x) => flow[x.0 as usize] = true,
                Op::Assume => {}
            }
            let dst = &mut assigned[e.dst.0 as usize];
            for i in 0..nvars {
                if dst[i] && !flow[i] {
                    dst[i] = false;
                    changed = true;
                }
            }
        }
    }
    for (idx, e) in p.edges.iter().enumerate() {
        let avail = &assigned[e.src.0 as usize];
        let mut reads: Vec<VarId> = Vec::new();
        if let Some(g) = &e.cmd.guard {
            reads.extend(g.syms().copied());
        }
        if let Op::Assign(_, rhs) = &e.cmd.op {
            reads.extend(rhs.vars());
        }
        for v in reads {
            if !avail[v.0 as usize] {
                return Err(ParseError::UninitializedRead {
                    var: p.var_name(v).to_string(),
                    line: edge_lines.get(idx).copied().unwrap_or(0),
                });
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- pretty --

fn pretty_expr(e: &Expr) -> String {
    let mut parts: Vec<String> = Vec::new();
    for (c, name) in &e.terms {
        parts.push(match *c {
            1 => name.clone(),
            -1 => format!("-1*{name}"),
            c => format!("{c}*{name}"),
        });
    }
    if let Some((c, a, b)) = &e.nonlinear {
        parts.push(match *c {
            1 => format!("{a}*{b}"),
            c => format!("{c}*{a}*{b}"),
        });
    }
    if e.constant != 0 || parts.is_empty() {
        parts.push(e.constant.to_string());
    }
    let mut out = String::new();
    for (i, p) in parts.iter().enumerate() {
        if i == 0 {
            out.push_str(p);
        } else if let Some(rest) = p.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(rest);
        } else {
            out.push_str(" + ");
            out.push_str(p);
        }
    }
    out
}

fn pretty_cond(c: &Cond) -> String {
    match c {
        Cond::Cmp { lhs, rel, rhs } => {
            format!("{} {} {}", pretty_expr(lhs), rel, pretty_expr(rhs))
        }
        Cond::Var(name) => name.clone(),
        Cond::Not(inner) => format!("!({})", pretty_cond(inner)),
        Cond::And(a, b) => format!("({}) && ({})", pretty_cond(a), pretty_cond(b)),
        Cond::Or(a, b) => format!("({}) || ({})", pretty_cond(a), pretty_cond(b)),
    }
}

fn pretty_stmts(stmts: &[Stmt], indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    for s in stmts {
        match s {
            Stmt::Assign { name, expr, .. } => {
                let _ = writeln!(out, "{pad}{name} = {};", pretty_expr(expr));
            }
            Stmt::Input { name, .. } => {
                let _ = writeln!(out, "{pad}{name} = input();");
            }
            Stmt::If { cond, then, els, .. } => {
                let _ = writeln!(out, "{pad}if ({}) {{", pretty_cond(cond));
                pretty_stmts(then, indent + 1, out);
                if els.is_empty() {
                    let _ = writeln!(out, "{pad}}}");
                } else {
                    let _ = writeln!(out, "{pad}}} else {{");
                    pretty_stmts(els, indent + 1, out);
                    let _ = writeln!(out, "{pad}}}");
                }
            }
            Stmt::While { cond, body, .. } => {
                let _ = writeln!(out, "{pad}while ({}) {{", pretty_cond(cond));
                pretty_stmts(body, indent + 1, out);
                let _ = writeln!(out, "{pad}}}");
            }
        }
    }
}

/// Re-emits an AST as normalized source text that parses back to the same
/// structure.
pub fn pretty(ast: &Ast) -> String {
    let mut out = String::new();
    for d in &ast.decls {
        match d.init {
            Some(c) => {
                let _ = writeln!(out, "var {} = {};", d.name, c);
            }
            None => {
                let _ = writeln!(out, "var {};", d.name);
            }
        }
    }
    pretty_stmts(&ast.stmts, 0, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{graph_signature, TransId, Transition};

    fn sig(p: &Program) -> String {
        let key = |e: &Transition| format!("{}", p.render_command(&e.cmd));
        graph_signature(p, key)
    }

    #[test]
    fn straight_line_counts() {
        let p = parse_program("var x = 1; x = x + 1;").unwrap();
        assert_eq!(p.vars.len(), 1);
        assert_eq!(p.loc_count, 3);
        assert_eq!(p.edges.len(), 2);
        assert!(p.branches().is_empty());
    }

    #[test]
    fn motivating_example_shape() {
        let src = "\
var i = 0;
var b;
var x;
var g;
b = 0;
while (i < 30) { x = input(); if (x != 10) { b = 1; } i = i + 1; }
if (b == 0) { g = 1; }
";
        let p = parse_program(src).unwrap();
        assert_eq!(p.loc_count, 10);
        assert_eq!(p.edges.len(), 12);
        assert_eq!(p.branches().len(), 6);
        assert_eq!(p.graph_reachable_branches().len(), 6);
        // the three two-way splits: loop head, x-test, final b-test
        let splits: std::collections::BTreeSet<Loc> = p
            .branches()
            .iter()
            .map(|id| p.edge_by_id(id).unwrap().src)
            .collect();
        assert_eq!(splits.len(), 3);
    }

    #[test]
    fn empty_else_still_branches() {
        let p = parse_program("var x = 0; if (x < 5) { x = 1; }").unwrap();
        assert_eq!(p.branches().len(), 2);
        // else arm flows straight to the join
        let else_edge = p.edge_by_id(&TransId::new("1#1")).unwrap();
        let then_edge = p.edge_by_id(&TransId::new("1#0")).unwrap();
        let then_exit = p.out_edges(then_edge.dst)[0].dst;
        assert_eq!(else_edge.dst, then_exit);
    }

    #[test]
    fn compound_conditions_expand_short_circuit() {
        let p = parse_program(
            "var i = 0; var x = 0; var b = 0; if (i == 6 && x == 4) { b = 1; }",
        )
        .unwrap();
        // two nested two-way splits
        assert_eq!(p.branches().len(), 4);
        let p = parse_program(
            "var i = 0; var x = 0; var b = 0; if (i == 6 || x == 4) { b = 1; }",
        )
        .unwrap();
        assert_eq!(p.branches().len(), 4);
    }

    #[test]
    fn booleans_lower_to_integers() {
        let p = parse_program("var b = false; if (b) { b = true; } if (!b) { b = false; }")
            .unwrap();
        assert_eq!(p.branches().len(), 4);
        let guard = p.edge_by_id(&TransId::new("1#0")).unwrap().cmd.guard.clone().unwrap();
        assert_eq!(guard.rel, Rel::Ne);
    }

    #[test]
    fn frontend_errors() {
        assert!(matches!(
            parse_program("var r0 = 1;"),
            Err(ParseError::ReservedName { .. })
        ));
        assert!(matches!(
            parse_program("var r;"),
            Err(ParseError::ReservedName { .. })
        ));
        assert!(matches!(
            parse_program("var x; var x;"),
            Err(ParseError::DuplicateDecl { .. })
        ));
        assert!(matches!(
            parse_program("var x = 1; y = 2;"),
            Err(ParseError::Undeclared { .. })
        ));
        assert!(matches!(
            parse_program("var x = 1; x = x*x + x*x;"),
            Err(ParseError::NonlinearTooMany { .. })
        ));
        assert!(matches!(
            parse_program("var x = ;"),
            Err(ParseError::Syntax { .. })
        ));
    }

    #[test]
    fn definite_assignment_rejects_unset_reads() {
        assert!(matches!(
            parse_program("var x; var y; y = x + 1;"),
            Err(ParseError::UninitializedRead { .. })
        ));
        // assigned on only one arm
        let src = "var x; var c = 0; if (c == 0) { x = 1; } c = x;";
        assert!(matches!(
            parse_program(src),
            Err(ParseError::UninitializedRead { .. })
        ));
        // assigned on both arms is fine
        let src = "var x; var c = 0; if (c == 0) { x = 1; } else { x = 2; } c = x;";
        assert!(parse_program(src).is_ok());
    }

    #[test]
    fn nonlinear_factor_parses_in_assignments() {
        let p = parse_program("var x = 2; var y = 3; var z = 0; z = 2*x*y + x - 1;").unwrap();
        let edge = p.edges.iter().find(|e| matches!(&e.cmd.op, Op::Assign(v, e2) if p.var_name(*v) == "z" && e2.nonlinear.is_some())).unwrap();
        if let Op::Assign(_, e2) = &edge.cmd.op {
            let nl = e2.nonlinear.as_ref().unwrap();
            assert_eq!(nl.coeff, 2);
        }
        assert!(matches!(
            parse_program("var x = 1; if (x*x > 0) { x = 0; }"),
            Err(ParseError::NonlinearGuard { .. })
        ));
    }

    #[test]
    fn pretty_round_trip_is_isomorphic() {
        let srcs = [
            "var x = 1; x = x + 1;",
            "var i = 0; var b; var x; var g; b = 0;\nwhile (i < 30) { x = input(); if (x != 10) { b = 1; } i = i + 1; }\nif (b == 0) { g = 1; }",
            "var a = 0; var c = 0; if (!(a < 3) || c == 0) { a = 2*a - 1; } else { c = c + a; }",
            "var n = 5; while (n > 0) { if (n == 2 && n < 4) { n = n - 2; } n = n - 1; }",
        ];
        for src in srcs {
            let ast = parse_ast(src).unwrap();
            let printed = pretty(&ast);
            let reparsed = parse_ast(&printed).unwrap_or_else(|e| panic!("reparse {printed}: {e}"));
            let p1 = lower(&ast).unwrap();
            let p2 = lower(&reparsed).unwrap();
            assert_eq!(p1.loc_count, p2.loc_count, "{src}");
            assert_eq!(sig(&p1), sig(&p2), "{src}");
        }
    }
}
