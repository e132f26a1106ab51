//! Two-way regular path query syntax.
//!
//! A query is `term expr term`. Terms are `<name>` or a bare identifier for a
//! constant and `?name` for a variable. Expressions combine atoms with `/`
//! (concatenation), `|` (alternation), postfix `*`, `+` and `?`, prefix `^`
//! (inverse) and parentheses; `()` is the empty path. Binding strength, from
//! tightest: `^`, postfix, `/`, `|`.
//!
//! Inverses are pushed down to atoms while parsing, so the AST has no inverse
//! node, and `E?` becomes `() | E`.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Epsilon,
    Atom { name: String, inverted: bool },
    Concat(Box<Expr>, Box<Expr>),
    Alt(Box<Expr>, Box<Expr>),
    Star(Box<Expr>),
    Plus(Box<Expr>),
}

impl Expr {
    pub fn atom(name: &str) -> Expr {
        Expr::Atom {
            name: name.to_string(),
            inverted: false,
        }
    }

    pub fn inv_atom(name: &str) -> Expr {
        Expr::Atom {
            name: name.to_string(),
            inverted: true,
        }
    }

    pub fn concat(a: Expr, b: Expr) -> Expr {
        Expr::Concat(Box::new(a), Box::new(b))
    }

    pub fn alt(a: Expr, b: Expr) -> Expr {
        Expr::Alt(Box::new(a), Box::new(b))
    }

    pub fn star(a: Expr) -> Expr {
        Expr::Star(Box::new(a))
    }

    pub fn plus(a: Expr) -> Expr {
        Expr::Plus(Box::new(a))
    }

    pub fn optional(a: Expr) -> Expr {
        Expr::alt(Expr::Epsilon, a)
    }

    /// Inverse path: mirrors concatenations and toggles every atom.
    pub fn inverse(&self) -> Expr {
        match self {
            Expr::Epsilon => Expr::Epsilon,
            Expr::Atom { name, inverted } => Expr::Atom {
                name: name.clone(),
                inverted: !inverted,
            },
            Expr::Concat(a, b) => Expr::concat(b.inverse(), a.inverse()),
            Expr::Alt(a, b) => Expr::alt(a.inverse(), b.inverse()),
            Expr::Star(a) => Expr::star(a.inverse()),
            Expr::Plus(a) => Expr::plus(a.inverse()),
        }
    }

    /// Number of atom occurrences.
    pub fn count_literals(&self) -> usize {
        match self {
            Expr::Epsilon => 0,
            Expr::Atom { .. } => 1,
            Expr::Concat(a, b) | Expr::Alt(a, b) => a.count_literals() + b.count_literals(),
            Expr::Star(a) | Expr::Plus(a) => a.count_literals(),
        }
    }

    /// Whether the empty word belongs to the language.
    pub fn nullable(&self) -> bool {
        match self {
            Expr::Epsilon | Expr::Star(_) => true,
            Expr::Atom { .. } => false,
            Expr::Concat(a, b) => a.nullable() && b.nullable(),
            Expr::Alt(a, b) => a.nullable() || b.nullable(),
            Expr::Plus(a) => a.nullable(),
        }
    }

    /// Atoms in left-to-right order.
    pub fn atoms(&self) -> Vec<(&str, bool)> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<(&'a str, bool)>) {
        match self {
            Expr::Epsilon => {}
            Expr::Atom { name, inverted } => out.push((name, *inverted)),
            Expr::Concat(a, b) | Expr::Alt(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
            Expr::Star(a) | Expr::Plus(a) => a.collect_atoms(out),
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
        let open = match self {
            Expr::Alt(a, _) if **a == Expr::Epsilon => false,
            Expr::Alt(..) => ctx > 0,
            Expr::Concat(..) => ctx > 1,
            _ => false,
        };
        if open {
            f.write_str("(")?;
        }
        match self {
            Expr::Epsilon => f.write_str("()")?,
            Expr::Atom { name, inverted } => {
                if *inverted {
                    f.write_str("^")?;
                }
                write!(f, "<{name}>")?;
            }
            Expr::Alt(a, b) if **a == Expr::Epsilon => {
                b.write_prec(f, 2)?;
                f.write_str("?")?;
            }
            Expr::Alt(a, b) => {
                a.write_prec(f, 0)?;
                f.write_str("|")?;
                b.write_prec(f, 1)?;
            }
            Expr::Concat(a, b) => {
                a.write_prec(f, 1)?;
                f.write_str("/")?;
                b.write_prec(f, 2)?;
            }
            Expr::Star(a) => {
                a.write_prec(f, 2)?;
                f.write_str("*")?;
            }
            Expr::Plus(a) => {
                a.write_prec(f, 2)?;
                f.write_str("+")?;
            }
        }
        if open {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

/// Expression for the reversed query: `(s, E, o)` and `(o, reverse_expr(E), s)`
/// have the same solutions.
pub fn reverse_expr(e: &Expr) -> Expr {
    e.inverse()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Const(String),
    Var(String),
}

impl Term {
    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => write!(f, "<{c}>"),
            Term::Var(v) => write!(f, "?{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    ConstConst,
    ConstVar,
    VarConst,
    VarVar,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    pub subject: Term,
    pub expr: Expr,
    pub object: Term,
}

impl Query {
    pub fn shape(&self) -> Shape {
        match (self.subject.is_var(), self.object.is_var()) {
            (false, false) => Shape::ConstConst,
            (false, true) => Shape::ConstVar,
            (true, false) => Shape::VarConst,
            (true, true) => Shape::VarVar,
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.expr, self.object)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("syntax error at {pos}: {msg}")]
pub struct ParseError {
    /// Byte offset into the query text.
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Iri(String),
    Ident(String),
    Var(String),
    Slash,
    Bar,
    Star,
    Plus,
    Question,
    Caret,
    LParen,
    RParen,
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | ':' | '.' | '-')
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut out = Vec::new();
    let mut it = text.char_indices().peekable();
    while let Some((pos, c)) = it.next() {
        let tok = match c {
            c if c.is_whitespace() => continue,
            '/' => Tok::Slash,
            '|' => Tok::Bar,
            '*' => Tok::Star,
            '+' => Tok::Plus,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '<' => {
                let mut name = String::new();
                loop {
                    match it.next() {
                        Some((_, '>')) => break,
                        Some((_, c)) => name.push(c),
                        None => {
                            return Err(ParseError {
                                pos,
                                msg: "unterminated '<'".into(),
                            })
                        }
                    }
                }
                if name.is_empty() {
                    return Err(ParseError {
                        pos,
                        msg: "empty name".into(),
                    });
                }
                Tok::Iri(name)
            }
            '?' => {
                let mut name = String::new();
                while let Some(&(_, c)) = it.peek() {
                    if !is_ident_char(c) {
                        break;
                    }
                    name.push(c);
                    it.next();
                }
                if name.is_empty() {
                    Tok::Question
                } else {
                    Tok::Var(name)
                }
            }
            c if is_ident_char(c) => {
                let mut name = c.to_string();
                while let Some(&(_, c)) = it.peek() {
                    if !is_ident_char(c) {
                        break;
                    }
                    name.push(c);
                    it.next();
                }
                Tok::Ident(name)
            }
            c => {
                return Err(ParseError {
                    pos,
                    msg: format!("unexpected character {c:?}"),
                })
            }
        };
        out.push((pos, tok));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn term(&mut self, which: &str) -> Result<Term, ParseError> {
        let t = match self.peek() {
            Some(Tok::Iri(n)) | Some(Tok::Ident(n)) => Term::Const(n.clone()),
            Some(Tok::Var(n)) => Term::Var(n.clone()),
            _ => return self.err(format!("expected {which} term")),
        };
        self.at += 1;
        Ok(t)
    }

    fn starts_primary(&self) -> bool {
        matches!(
            self.peek(),
            Some(Tok::Iri(_) | Tok::Ident(_) | Tok::Caret | Tok::LParen)
        )
    }

    /// An operand is required here; `op` names the operator that asked for it.
    fn operand(&mut self, op: &str, op_pos: usize) -> Result<(), ParseError> {
        if self.starts_primary() {
            Ok(())
        } else {
            Err(ParseError {
                pos: op_pos,
                msg: format!("dangling operator '{op}'"),
            })
        }
    }

    fn alt(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.concat()?;
        while let Some(Tok::Bar) = self.peek() {
            let p = self.pos();
            self.at += 1;
            self.operand("|", p)?;
            e = Expr::alt(e, self.concat()?);
        }
        Ok(e)
    }

    fn concat(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.postfix()?;
        while let Some(Tok::Slash) = self.peek() {
            let p = self.pos();
            self.at += 1;
            self.operand("/", p)?;
            e = Expr::concat(e, self.postfix()?);
        }
        Ok(e)
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.unary()?;
        loop {
            e = match self.peek() {
                Some(Tok::Star) => Expr::star(e),
                Some(Tok::Plus) => Expr::plus(e),
                Some(Tok::Question) => Expr::optional(e),
                _ => return Ok(e),
            };
            self.at += 1;
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Tok::Caret) = self.peek() {
            let p = self.pos();
            self.at += 1;
            self.operand("^", p)?;
            return Ok(self.unary()?.inverse());
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let e = match self.peek() {
            Some(Tok::Iri(n)) | Some(Tok::Ident(n)) => Expr::atom(n),
            Some(Tok::LParen) => {
                self.at += 1;
                if let Some(Tok::RParen) = self.peek() {
                    self.at += 1;
                    return Ok(Expr::Epsilon);
                }
                let e = self.alt()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected ')'");
                }
                e
            }
            _ => return self.err("expected a path expression"),
        };
        self.at += 1;
        Ok(e)
    }
}

/// Parses one query.
pub fn parse(text: &str) -> Result<Query, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
    };
    let subject = p.term("subject")?;
    if !p.starts_primary() {
        return p.err("empty expression");
    }
    let expr = p.alt()?;
    let object = p.term("object")?;
    if p.peek().is_some() {
        return p.err("unexpected trailing input");
    }
    Ok(Query {
        subject,
        expr,
        object,
    })
}

/// Parses an expression on its own.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
    };
    if !p.starts_primary() {
        return p.err("empty expression");
    }
    let e = p.alt()?;
    if p.peek().is_some() {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

/// Query pattern with endpoints mapped to `c`/`v` and predicates erased,
/// keeping only operators in textual order, e.g. `v /* c`.
pub fn pattern(text: &str) -> Result<String, ParseError> {
    let q = parse(text)?;
    let toks = tokenize(text)?;
    let ops: String = toks[1..toks.len() - 1]
        .iter()
        .filter_map(|(_, t)| match t {
            Tok::Slash => Some('/'),
            Tok::Bar => Some('|'),
            Tok::Star => Some('*'),
            Tok::Plus => Some('+'),
            Tok::Question => Some('?'),
            Tok::Caret => Some('^'),
            _ => None,
        })
        .collect();
    let end = |t: &Term| if t.is_var() { "v" } else { "c" };
    Ok(if ops.is_empty() {
        format!("{} {}", end(&q.subject), end(&q.object))
    } else {
        format!("{} {} {}", end(&q.subject), ops, end(&q.object))
    })
}
