//! Theory-file parser.
//!
//! A theory file is an ordered list of declarations; names must be declared
//! before use.  The grammar, with `%` starting a line comment:
//!
//! ```text
//! nominal type nm.                      % a nominal base type
//! nominal a : nm.                       % a nominal constant
//! type tm.                              % an ordinary base type
//! const app : tm -> tm -> tm.           % a typed constant
//! pred eval : tm -> tm -> o.            % a predicate (default level 0)
//! level eval 1.                         % overrides a predicate's level
//! define (X : tm) val (abs X) := true.  % a definition clause
//! theorem t : A, B |- C := (impr (id 0)).
//! ```
//!
//! Formulas use `true`, `false`, `/\`, `\/`, `=>`, `t = s`, `nat t` and
//! `forall x : ty, B` (likewise `exists`, `nabla`); `=>` is right
//! associative and binds loosest.  Terms are curried applications of
//! declared names; `\x : ty, t` is abstraction.  Proof scripts are
//! parenthesized trees `(rule payload… subproof…)`; payload terms and
//! formulas are written in braces and resolved against the sequent the
//! rule is applied to.

use std::collections::BTreeMap;

use lg::{Formula, Sequent, Signature, Term, Theory, Ty};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

/// A parsed theory file: the theory itself plus its theorems, whose proof
/// scripts stay in surface form until elaboration.
pub struct TheoryFile {
    pub theory: Theory,
    pub theorems: Vec<Theorem>,
}

pub struct Theorem {
    pub name: String,
    pub sequent: Sequent,
    pub script: SScript,
}

/// Surface terms: names are resolved against an environment later.
#[derive(Clone, Debug)]
pub enum STerm {
    Var(String),
    App(Box<STerm>, Vec<STerm>),
    Lam(String, Ty, Box<STerm>),
}

/// Surface formulas; types are resolved at parse time, names are not.
#[derive(Clone, Debug)]
pub enum SFormula {
    Top,
    Bot,
    And(Box<SFormula>, Box<SFormula>),
    Or(Box<SFormula>, Box<SFormula>),
    Imp(Box<SFormula>, Box<SFormula>),
    Forall(String, Ty, Box<SFormula>),
    Exists(String, Ty, Box<SFormula>),
    Nabla(String, Ty, Box<SFormula>),
    Eq(STerm, STerm),
    Nat(STerm),
    Atom(STerm),
}

/// One proof-script node: a rule name, its payload and its subproofs.
#[derive(Clone, Debug)]
pub struct SScript {
    pub rule: String,
    pub line: usize,
    pub col: usize,
    pub args: Vec<SArg>,
    pub subs: Vec<SScript>,
}

#[derive(Clone, Debug)]
pub enum SArg {
    Num(usize),
    Name(String),
    Term(STerm),
    Formula(SFormula),
    /// A formula abstracted over one named variable, as in `{x. nat x}`.
    Bind(String, SFormula),
    /// Explicit permutation pairs, as in `[a b, b a]`.
    Perm(Vec<(String, String)>),
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(usize),
    Dot,
    Colon,
    Comma,
    LParen,
    RParen,
    LBrack,
    RBrack,
    LBrace,
    RBrace,
    Turnstile,
    ColonEq,
    Arrow,
    FatArrow,
    AndOp,
    OrOp,
    EqOp,
    Backslash,
    Eof,
}

struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Lexed>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0usize;
    let err = |line: usize, col: usize, msg: String| ParseError { line, col, msg };
    while i < bytes.len() {
        let c = bytes[i];
        let (tline, tcol) = (line, col);
        let mut push = |tok: Tok| out.push(Lexed { tok, line: tline, col: tcol });
        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            ' ' | '\t' | '\r' => {}
            '%' => {
                while i < bytes.len() && bytes[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '.' => push(Tok::Dot),
            ',' => push(Tok::Comma),
            '(' => push(Tok::LParen),
            ')' => push(Tok::RParen),
            '[' => push(Tok::LBrack),
            ']' => push(Tok::RBrack),
            '{' => push(Tok::LBrace),
            '}' => push(Tok::RBrace),
            ':' if bytes.get(i + 1) == Some(&'=') => {
                push(Tok::ColonEq);
                i += 1;
                col += 1;
            }
            ':' => push(Tok::Colon),
            '|' if bytes.get(i + 1) == Some(&'-') => {
                push(Tok::Turnstile);
                i += 1;
                col += 1;
            }
            '-' if bytes.get(i + 1) == Some(&'>') => {
                push(Tok::Arrow);
                i += 1;
                col += 1;
            }
            '=' if bytes.get(i + 1) == Some(&'>') => {
                push(Tok::FatArrow);
                i += 1;
                col += 1;
            }
            '=' => push(Tok::EqOp),
            '/' if bytes.get(i + 1) == Some(&'\\') => {
                push(Tok::AndOp);
                i += 1;
                col += 1;
            }
            '\\' if bytes.get(i + 1) == Some(&'/') => {
                push(Tok::OrOp);
                i += 1;
                col += 1;
            }
            '\\' => push(Tok::Backslash),
            c if c.is_ascii_digit() => {
                let mut n = 0usize;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    n = n * 10 + (bytes[i] as usize - '0' as usize);
                    i += 1;
                    col += 1;
                }
                out.push(Lexed { tok: Tok::Num(n), line: tline, col: tcol });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_' || bytes[i] == '\'')
                {
                    s.push(bytes[i]);
                    i += 1;
                    col += 1;
                }
                out.push(Lexed { tok: Tok::Ident(s), line: tline, col: tcol });
                continue;
            }
            c => return Err(err(line, col, format!("unexpected character `{}`", c))),
        }
        i += 1;
        col += 1;
    }
    out.push(Lexed { tok: Tok::Eof, line, col });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

pub fn parse(text: &str) -> Result<TheoryFile, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        theory: Theory::default(),
        nomtys: BTreeMap::new(),
        theorems: Vec::new(),
    };
    p.file()?;
    Ok(TheoryFile { theory: p.theory, theorems: p.theorems })
}

/// Parses a standalone surface term, e.g. from a command-line argument;
/// the theory supplies the type vocabulary for any abstractions.
pub fn parse_standalone_term(text: &str, th: &Theory) -> Result<STerm, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        theory: th.clone(),
        nomtys: nom_table(th),
        theorems: Vec::new(),
    };
    let t = p.term()?;
    p.eat(Tok::Eof, "end of input")?;
    Ok(t)
}

/// Parses a standalone type, e.g. from a `--sig` entry.
pub fn parse_standalone_ty(text: &str, th: &Theory) -> Result<Ty, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        theory: th.clone(),
        nomtys: nom_table(th),
        theorems: Vec::new(),
    };
    let t = p.ty()?;
    p.eat(Tok::Eof, "end of input")?;
    Ok(t)
}

/// The nominal constant table a theory declares: name to its type.
pub fn nom_table(th: &Theory) -> BTreeMap<String, Ty> {
    let mut out = BTreeMap::new();
    for (tyname, names) in &th.declared_noms {
        for n in names {
            out.insert(n.clone(), Ty::nominal(tyname));
        }
    }
    out
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
    theory: Theory,
    nomtys: BTreeMap<String, Ty>,
    theorems: Vec<Theorem>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        (self.toks[self.pos].line, self.toks[self.pos].col)
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError { line, col, msg: msg.into() })
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == &want {
            self.next();
            Ok(())
        } else {
            self.fail(format!("expected {}", what))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            _ => self.fail(format!("expected {}", what)),
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, ParseError> {
        match *self.peek() {
            Tok::Num(n) => {
                self.next();
                Ok(n)
            }
            _ => self.fail(format!("expected {}", what)),
        }
    }

    fn file(&mut self) -> Result<(), ParseError> {
        loop {
            match self.peek().clone() {
                Tok::Eof => return Ok(()),
                Tok::Ident(kw) => match kw.as_str() {
                    "nominal" => self.nominal_decl()?,
                    "type" => self.type_decl()?,
                    "const" => self.const_decl()?,
                    "pred" => self.pred_decl()?,
                    "level" => self.level_decl()?,
                    "define" => self.define_decl()?,
                    "theorem" => self.theorem_decl()?,
                    _ => return self.fail(format!("unknown declaration `{}`", kw)),
                },
                _ => return self.fail("expected a declaration"),
            }
        }
    }

    fn nominal_decl(&mut self) -> Result<(), ParseError> {
        self.next(); // nominal
        if self.peek() == &Tok::Ident("type".into()) {
            self.next();
            let name = self.ident("a type name")?;
            self.theory.nominal_types.push(name.clone());
            self.theory.declared_noms.entry(name).or_default();
        } else {
            let name = self.ident("a nominal constant name")?;
            self.eat(Tok::Colon, "`:`")?;
            let ty = self.ty()?;
            if !ty.is_nominal_base() {
                return self.fail(format!("`{}` must have a nominal type", name));
            }
            let tyname = format!("{}", ty);
            self.theory.declared_noms.entry(tyname).or_default().push(name.clone());
            self.nomtys.insert(name, ty);
        }
        self.eat(Tok::Dot, "`.`")
    }

    fn type_decl(&mut self) -> Result<(), ParseError> {
        self.next();
        let name = self.ident("a type name")?;
        self.theory.base_types.push(name);
        self.eat(Tok::Dot, "`.`")
    }

    fn const_decl(&mut self) -> Result<(), ParseError> {
        self.next();
        let name = self.ident("a constant name")?;
        self.eat(Tok::Colon, "`:`")?;
        let ty = self.ty()?;
        self.theory.consts.insert(name, ty);
        self.eat(Tok::Dot, "`.`")
    }

    fn pred_decl(&mut self) -> Result<(), ParseError> {
        self.next();
        let name = self.ident("a predicate name")?;
        self.eat(Tok::Colon, "`:`")?;
        let ty = self.ty()?;
        if !ends_in_o(&ty) {
            return self.fail(format!("predicate `{}` must target `o`", name));
        }
        self.theory.preds.insert(name, (ty, 0));
        self.eat(Tok::Dot, "`.`")
    }

    fn level_decl(&mut self) -> Result<(), ParseError> {
        self.next();
        let name = self.ident("a predicate name")?;
        let lvl = self.number("a level")?;
        match self.theory.preds.get_mut(&name) {
            Some(entry) => entry.1 = lvl,
            None => return self.fail(format!("`{}` is not a declared predicate", name)),
        }
        self.eat(Tok::Dot, "`.`")
    }

    fn define_decl(&mut self) -> Result<(), ParseError> {
        self.next();
        let mut vars: Vec<(String, Ty)> = Vec::new();
        if self.peek() == &Tok::LParen {
            self.next();
            loop {
                let v = self.ident("a clause variable")?;
                self.eat(Tok::Colon, "`:`")?;
                let ty = self.ty()?;
                vars.push((v, ty));
                match self.next() {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    _ => return self.fail("expected `,` or `)`"),
                }
            }
        }
        let pred = self.ident("a predicate name")?;
        if !self.theory.preds.contains_key(&pred) {
            return self.fail(format!("`{}` is not a declared predicate", pred));
        }
        let mut head_args = Vec::new();
        while !matches!(self.peek(), Tok::ColonEq) {
            head_args.push(self.term_atom()?);
        }
        self.eat(Tok::ColonEq, "`:=`")?;
        let body = self.formula()?;
        self.eat(Tok::Dot, "`.`")?;
        let env = ResolveEnv {
            th: &self.theory,
            sig: &Signature::new(),
            vars: &vars,
            nomtys: &self.nomtys,
        };
        let (line, col) = self.here();
        let at = |msg: String| ParseError { line, col, msg };
        let head_args = head_args
            .iter()
            .map(|a| env.term(a, &mut Vec::new()).map(|(t, _)| t))
            .collect::<Result<Vec<_>, _>>()
            .map_err(at)?;
        let body = env
            .formula(&body, &mut Vec::new())
            .map_err(|msg| ParseError { line, col, msg })?;
        self.theory.clauses.push(lg::DefClause { vars, head_pred: pred, head_args, body });
        Ok(())
    }

    fn theorem_decl(&mut self) -> Result<(), ParseError> {
        self.next();
        let name = self.ident("a theorem name")?;
        self.eat(Tok::Colon, "`:`")?;
        let mut left = Vec::new();
        if self.peek() != &Tok::Turnstile {
            loop {
                left.push(self.formula()?);
                match self.next() {
                    Tok::Comma => continue,
                    Tok::Turnstile => break,
                    _ => return self.fail("expected `,` or `|-`"),
                }
            }
        } else {
            self.next();
        }
        let right = self.formula()?;
        self.eat(Tok::ColonEq, "`:=`")?;
        let script = self.script()?;
        self.eat(Tok::Dot, "`.`")?;
        let env = ResolveEnv {
            th: &self.theory,
            sig: &Signature::new(),
            vars: &[],
            nomtys: &self.nomtys,
        };
        let (line, col) = self.here();
        let at = |msg: String| ParseError { line, col, msg };
        let left = left
            .iter()
            .map(|f| env.formula(f, &mut Vec::new()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(&at)?;
        let right = env.formula(&right, &mut Vec::new()).map_err(at)?;
        let sequent = Sequent::new(Signature::new(), left, right);
        self.theorems.push(Theorem { name, sequent, script });
        Ok(())
    }

    // -- types --------------------------------------------------------------

    fn ty(&mut self) -> Result<Ty, ParseError> {
        let lhs = self.ty_atom()?;
        if self.peek() == &Tok::Arrow {
            self.next();
            let rhs = self.ty()?;
            Ok(Ty::arrow(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn ty_atom(&mut self) -> Result<Ty, ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.next();
                let t = self.ty()?;
                self.eat(Tok::RParen, "`)`")?;
                Ok(t)
            }
            Tok::Ident(name) => {
                self.next();
                if name == "o" {
                    Ok(Ty::o())
                } else if self.theory.nominal_types.contains(&name) {
                    Ok(Ty::nominal(&name))
                } else if self.theory.base_types.contains(&name) {
                    Ok(Ty::base(&name))
                } else {
                    self.fail(format!("unknown type `{}`", name))
                }
            }
            _ => self.fail("expected a type"),
        }
    }

    // -- formulas and terms (surface) ---------------------------------------

    fn formula(&mut self) -> Result<SFormula, ParseError> {
        let lhs = self.formula_or()?;
        if self.peek() == &Tok::FatArrow {
            self.next();
            let rhs = self.formula()?;
            Ok(SFormula::Imp(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn formula_or(&mut self) -> Result<SFormula, ParseError> {
        let mut lhs = self.formula_and()?;
        while self.peek() == &Tok::OrOp {
            self.next();
            let rhs = self.formula_and()?;
            lhs = SFormula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn formula_and(&mut self) -> Result<SFormula, ParseError> {
        let mut lhs = self.formula_unit()?;
        while self.peek() == &Tok::AndOp {
            self.next();
            let rhs = self.formula_unit()?;
            lhs = SFormula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn formula_unit(&mut self) -> Result<SFormula, ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.next();
                let f = self.formula()?;
                self.eat(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(kw) if kw == "true" => {
                self.next();
                Ok(SFormula::Top)
            }
            Tok::Ident(kw) if kw == "false" => {
                self.next();
                Ok(SFormula::Bot)
            }
            Tok::Ident(kw) if kw == "nat" => {
                self.next();
                Ok(SFormula::Nat(self.term_atom()?))
            }
            Tok::Ident(kw) if kw == "forall" || kw == "exists" || kw == "nabla" => {
                self.next();
                let x = self.ident("a bound variable")?;
                self.eat(Tok::Colon, "`:`")?;
                let ty = self.ty()?;
                self.eat(Tok::Comma, "`,`")?;
                let body = Box::new(self.formula()?);
                Ok(match kw.as_str() {
                    "forall" => SFormula::Forall(x, ty, body),
                    "exists" => SFormula::Exists(x, ty, body),
                    _ => SFormula::Nabla(x, ty, body),
                })
            }
            _ => {
                let t = self.term()?;
                if self.peek() == &Tok::EqOp {
                    self.next();
                    let u = self.term()?;
                    Ok(SFormula::Eq(t, u))
                } else {
                    Ok(SFormula::Atom(t))
                }
            }
        }
    }

    fn term(&mut self) -> Result<STerm, ParseError> {
        let head = self.term_atom()?;
        let mut args = Vec::new();
        while matches!(self.peek(), Tok::Ident(_) | Tok::LParen | Tok::Backslash) {
            // Stop at formula keywords so atoms end where connectives start.
            if let Tok::Ident(k) = self.peek() {
                if matches!(k.as_str(), "true" | "false" | "nat" | "forall" | "exists" | "nabla") {
                    break;
                }
            }
            args.push(self.term_atom()?);
        }
        if args.is_empty() {
            Ok(head)
        } else {
            Ok(STerm::App(Box::new(head), args))
        }
    }

    fn term_atom(&mut self) -> Result<STerm, ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.next();
                let t = self.term()?;
                self.eat(Tok::RParen, "`)`")?;
                Ok(t)
            }
            Tok::Backslash => {
                self.next();
                let x = self.ident("a bound variable")?;
                self.eat(Tok::Colon, "`:`")?;
                let ty = self.ty()?;
                self.eat(Tok::Comma, "`,`")?;
                let body = self.term()?;
                Ok(STerm::Lam(x, ty, Box::new(body)))
            }
            Tok::Ident(name) => {
                self.next();
                Ok(STerm::Var(name))
            }
            _ => self.fail("expected a term"),
        }
    }

    // -- proof scripts ------------------------------------------------------

    fn script(&mut self) -> Result<SScript, ParseError> {
        let (line, col) = self.here();
        self.eat(Tok::LParen, "`(` starting a proof step")?;
        let rule = self.ident("a rule name")?;
        let args = self.script_args(&rule)?;
        let mut subs = Vec::new();
        while self.peek() == &Tok::LParen {
            subs.push(self.script()?);
        }
        self.eat(Tok::RParen, "`)` closing the proof step")?;
        Ok(SScript { rule, line, col, args, subs })
    }

    fn script_args(&mut self, rule: &str) -> Result<Vec<SArg>, ParseError> {
        let shapes: &[Shape] = match rule {
            "id" | "botl" | "orl" | "impl" | "eql" | "defl" | "defr" => &[Shape::Num],
            "idp" => &[Shape::Num, Shape::Perm, Shape::Perm],
            "cl" | "andl" => &[Shape::Num, Shape::Num],
            "orr" => &[Shape::Num],
            "topr" | "andr" | "impr" | "eqr" | "natrz" | "natrs" | "auto" => &[],
            "foralll" => &[Shape::Num, Shape::Term],
            "forallr" | "nablar" => &[Shape::Name],
            "existsl" | "nablal" => &[Shape::Num, Shape::Name],
            "existsr" => &[Shape::Term],
            "natl" => &[Shape::Num, Shape::Bind, Shape::Name],
            "cut" => &[Shape::Num, Shape::Formula],
            _ => return self.fail(format!("unknown rule `{}`", rule)),
        };
        let mut out = Vec::new();
        for shape in shapes {
            out.push(match shape {
                Shape::Num => SArg::Num(self.number("an index")?),
                Shape::Name => SArg::Name(self.ident("a name")?),
                Shape::Term => {
                    self.eat(Tok::LBrace, "`{` starting a term")?;
                    let t = self.term()?;
                    self.eat(Tok::RBrace, "`}`")?;
                    SArg::Term(t)
                }
                Shape::Formula => {
                    self.eat(Tok::LBrace, "`{` starting a formula")?;
                    let f = self.formula()?;
                    self.eat(Tok::RBrace, "`}`")?;
                    SArg::Formula(f)
                }
                Shape::Bind => {
                    self.eat(Tok::LBrace, "`{` starting an invariant")?;
                    let x = self.ident("the bound variable")?;
                    self.eat(Tok::Dot, "`.`")?;
                    let f = self.formula()?;
                    self.eat(Tok::RBrace, "`}`")?;
                    SArg::Bind(x, f)
                }
                Shape::Perm => {
                    self.eat(Tok::LBrack, "`[` starting a permutation")?;
                    let mut pairs = Vec::new();
                    if self.peek() != &Tok::RBrack {
                        loop {
                            let a = self.ident("a nominal constant")?;
                            let b = self.ident("a nominal constant")?;
                            pairs.push((a, b));
                            match self.next() {
                                Tok::Comma => continue,
                                Tok::RBrack => break,
                                _ => return self.fail("expected `,` or `]`"),
                            }
                        }
                    } else {
                        self.next();
                    }
                    SArg::Perm(pairs)
                }
            });
        }
        Ok(out)
    }
}

enum Shape {
    Num,
    Name,
    Term,
    Formula,
    Bind,
    Perm,
}

fn ends_in_o(ty: &Ty) -> bool {
    match ty {
        Ty::Arrow(_, t) => ends_in_o(t),
        t => t.is_o(),
    }
}

// ---------------------------------------------------------------------------
// Name resolution
// ---------------------------------------------------------------------------

/// Resolves surface terms and formulas against a theory, a signature of
/// eigenvariables and a list of clause variables.
pub struct ResolveEnv<'a> {
    pub th: &'a Theory,
    pub sig: &'a Signature,
    pub vars: &'a [(String, Ty)],
    pub nomtys: &'a BTreeMap<String, Ty>,
}

impl ResolveEnv<'_> {
    pub fn term(
        &self,
        st: &STerm,
        stack: &mut Vec<(String, Ty)>,
    ) -> Result<(Term, Ty), String> {
        match st {
            STerm::Var(name) => self.name_term(name, stack),
            STerm::App(head, args) => {
                let (h, hty) = self.term(head, stack)?;
                let mut rargs = Vec::new();
                let mut ty = hty;
                for a in args {
                    let (at, aty) = self.term(a, stack)?;
                    match ty {
                        Ty::Arrow(dom, cod) => {
                            if *dom != aty {
                                return Err(format!(
                                    "argument `{}` has type {}, expected {}",
                                    at, aty, dom
                                ));
                            }
                            ty = *cod;
                        }
                        t => return Err(format!("`{}` of type {} applied to arguments", h, t)),
                    }
                    rargs.push(at);
                }
                Ok((Term::apply(&h, &rargs), ty))
            }
            STerm::Lam(x, xty, body) => {
                stack.push((x.clone(), xty.clone()));
                let (b, bty) = self.term(body, stack)?;
                stack.pop();
                Ok((Term::lam(vec![xty.clone()], b), Ty::arrow(xty.clone(), bty)))
            }
        }
    }

    fn name_term(&self, name: &str, stack: &[(String, Ty)]) -> Result<(Term, Ty), String> {
        if let Some(pos) = stack.iter().rposition(|(n, _)| n == name) {
            let ty = stack[pos].1.clone();
            return Ok((Term::bound(stack.len() - 1 - pos, &ty), ty));
        }
        for (v, ty) in self.vars {
            if v == name {
                return Ok((Term::var(name, ty), ty.clone()));
            }
        }
        if let Some(ty) = self.sig.get(name) {
            return Ok((Term::var(name, ty), ty.clone()));
        }
        if let Some(ty) = self.nomtys.get(name) {
            return Ok((Term::nom(name, ty), ty.clone()));
        }
        if let Some(ty) = self.th.consts.get(name) {
            return Ok((Term::konst(name, ty), ty.clone()));
        }
        Err(format!("unknown name `{}`", name))
    }

    pub fn formula(
        &self,
        sf: &SFormula,
        stack: &mut Vec<(String, Ty)>,
    ) -> Result<Formula, String> {
        Ok(match sf {
            SFormula::Top => Formula::Top,
            SFormula::Bot => Formula::Bot,
            SFormula::And(a, b) => {
                Formula::and(self.formula(a, stack)?, self.formula(b, stack)?)
            }
            SFormula::Or(a, b) => Formula::or(self.formula(a, stack)?, self.formula(b, stack)?),
            SFormula::Imp(a, b) => {
                Formula::imp(self.formula(a, stack)?, self.formula(b, stack)?)
            }
            SFormula::Forall(x, ty, b) => {
                stack.push((x.clone(), ty.clone()));
                let body = self.formula(b, stack)?;
                stack.pop();
                Formula::forall(ty.clone(), body)
            }
            SFormula::Exists(x, ty, b) => {
                stack.push((x.clone(), ty.clone()));
                let body = self.formula(b, stack)?;
                stack.pop();
                Formula::exists(ty.clone(), body)
            }
            SFormula::Nabla(x, ty, b) => {
                stack.push((x.clone(), ty.clone()));
                let body = self.formula(b, stack)?;
                stack.pop();
                Formula::nabla(ty.clone(), body)
            }
            SFormula::Eq(s, t) => {
                let (ls, lty) = self.term(s, stack)?;
                let (rt, rty) = self.term(t, stack)?;
                if lty != rty {
                    return Err(format!("equating `{}` : {} with `{}` : {}", ls, lty, rt, rty));
                }
                Formula::Eq(ls, rt, lty)
            }
            SFormula::Nat(t) => Formula::Nat(self.term(t, stack)?.0),
            SFormula::Atom(t) => {
                let (head, args) = match t {
                    STerm::App(h, args) => match &**h {
                        STerm::Var(p) => (p.clone(), args.clone()),
                        _ => return Err("an atom's head must be a predicate".into()),
                    },
                    STerm::Var(p) => (p.clone(), vec![]),
                    _ => return Err("an atom's head must be a predicate".into()),
                };
                if !self.th.preds.contains_key(&head) {
                    return Err(format!("`{}` is not a declared predicate", head));
                }
                let args = args
                    .iter()
                    .map(|a| self.term(a, stack).map(|(t, _)| t))
                    .collect::<Result<Vec<_>, _>>()?;
                Formula::Atom(head, args)
            }
        })
    }
}
