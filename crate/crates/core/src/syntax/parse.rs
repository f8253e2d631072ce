//! Recursive-descent parser for the formula text syntax.
//!
//! ```text
//! formula := disj ( "->" formula )?
//! disj    := conj ( "|" disj )?
//! conj    := unary ( "&" conj )?
//! unary   := "!" unary | quant | primary
//! quant   := ("E" | "A") var+ "." formula | ("E2" | "A2") Rel "." formula
//! primary := "true" | "(" formula ")" | Rel "(" vars? ")" | var "=" var
//! ```
//!
//! Binary connectives associate to the right. A quantifier body extends as
//! far right as possible.

use thiserror::Error;

use super::{Formula, RelSym, Signature, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("undeclared relation symbol '{name}' at offset {offset}")]
    UndeclaredSymbol { name: String, offset: usize },
    #[error("relation '{name}' has arity {expected} but is applied to {found} arguments at offset {offset}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
        offset: usize,
    },
    #[error("variable '{name}' is bound twice by one quantifier at offset {offset}")]
    DuplicateBinder { name: String, offset: usize },
    #[error("cannot infer the arity of second-order variable '{name}' at offset {offset}: it is undeclared and unused")]
    UnknownArity { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UndeclaredSymbol { offset, .. }
            | ParseError::ArityMismatch { offset, .. }
            | ParseError::DuplicateBinder { offset, .. }
            | ParseError::UnknownArity { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Comma,
    Dot,
    Equals,
    Bang,
    Amp,
    Pipe,
    Arrow,
    Ident(String),
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Comma => "','".into(),
        Tok::Dot => "'.'".into(),
        Tok::Equals => "'='".into(),
        Tok::Bang => "'!'".into(),
        Tok::Amp => "'&'".into(),
        Tok::Pipe => "'|'".into(),
        Tok::Arrow => "'->'".into(),
        Tok::Ident(s) => format!("'{s}'"),
        Tok::End => "end of input".into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let single = match c {
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            b'.' => Some(Tok::Dot),
            b'=' => Some(Tok::Equals),
            b'!' => Some(Tok::Bang),
            b'&' => Some(Tok::Amp),
            b'|' => Some(Tok::Pipe),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, i));
            i += 1;
        } else if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'-' && bytes.get(i + 1) == Some(&b'>') {
            out.push((Tok::Arrow, i));
            i += 2;
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            return Err(ParseError::Syntax {
                offset: i,
                message: format!("unexpected character '{ch}'"),
            });
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

/// A second-order binder in scope; `arity` is `None` until the first use
/// fixes it (only for symbols absent from the signature).
struct SoScope {
    name: String,
    arity: Option<usize>,
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    sig: &'a Signature,
    scopes: Vec<SoScope>,
}

/// Parses `text` against `sig`. Every relation symbol must be declared, unless
/// it is bound by an enclosing second-order quantifier, in which case its
/// arity is taken from the signature if declared there and otherwise from
/// its first occurrence.
pub fn parse(text: &str, sig: &Signature) -> Result<Formula, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0, sig, scopes: Vec::new() };
    let f = p.formula()?;
    match p.peek() {
        Tok::End => Ok(f),
        t => Err(p.unexpected(t.clone(), "end of input")),
    }
}

fn is_var_name(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_lowercase()) && s != "true"
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, t: Tok, wanted: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            message: format!("expected {wanted}, found {}", describe(&t)),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        let t = self.peek().clone();
        if t == want {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(t, &describe(&want)))
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let left = self.disj()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let right = self.formula()?;
            return Ok(Formula::implies(left, right));
        }
        Ok(left)
    }

    fn disj(&mut self) -> Result<Formula, ParseError> {
        let left = self.conj()?;
        if *self.peek() == Tok::Pipe {
            self.bump();
            let right = self.disj()?;
            return Ok(Formula::or(left, right));
        }
        Ok(left)
    }

    fn conj(&mut self) -> Result<Formula, ParseError> {
        let left = self.unary()?;
        if *self.peek() == Tok::Amp {
            self.bump();
            let right = self.conj()?;
            return Ok(Formula::and(left, right));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Ident(k) if k == "E" || k == "A" => {
                self.bump();
                self.fo_quantifier(k == "E")
            }
            Tok::Ident(k) if k == "E2" || k == "A2" => {
                self.bump();
                self.so_quantifier(k == "E2")
            }
            _ => self.primary(),
        }
    }

    fn fo_quantifier(&mut self, existential: bool) -> Result<Formula, ParseError> {
        let mut vs: Vec<Var> = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Ident(name) if is_var_name(&name) => {
                    let v = Var::new(name.clone());
                    if vs.contains(&v) {
                        return Err(ParseError::DuplicateBinder { name, offset: self.offset() });
                    }
                    vs.push(v);
                    self.bump();
                }
                Tok::Dot if !vs.is_empty() => {
                    self.bump();
                    break;
                }
                t => {
                    let wanted = if vs.is_empty() { "a variable" } else { "a variable or '.'" };
                    return Err(self.unexpected(t, wanted));
                }
            }
        }
        let body = Box::new(self.formula()?);
        Ok(if existential { Formula::Exists(vs, body) } else { Formula::Forall(vs, body) })
    }

    fn so_quantifier(&mut self, existential: bool) -> Result<Formula, ParseError> {
        let offset = self.offset();
        let name = match self.peek().clone() {
            Tok::Ident(n) if n.starts_with(|c: char| c.is_ascii_uppercase()) && !is_keyword(&n) => n,
            t => return Err(self.unexpected(t, "a relation symbol")),
        };
        self.bump();
        self.expect(Tok::Dot)?;
        self.scopes.push(SoScope { name: name.clone(), arity: self.sig.arity(&name) });
        let body = self.formula();
        let scope = self.scopes.pop().expect("scope pushed above");
        let body = body?;
        let arity = scope.arity.ok_or(ParseError::UnknownArity { name: name.clone(), offset })?;
        let rel = RelSym { name, arity };
        Ok(if existential { Formula::so_exists(rel, body) } else { Formula::so_forall(rel, body) })
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        let offset = self.offset();
        match self.bump() {
            Tok::LParen => {
                let f = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Ident(k) if k == "true" => Ok(Formula::Top),
            Tok::Ident(name) if is_var_name(&name) => {
                self.expect(Tok::Equals)?;
                match self.bump() {
                    Tok::Ident(r) if is_var_name(&r) => Ok(Formula::Eq(Var::new(name), Var::new(r))),
                    t => {
                        self.pos -= usize::from(t != Tok::End);
                        Err(self.unexpected(t, "a variable"))
                    }
                }
            }
            Tok::Ident(name) if !is_keyword(&name) => self.atom(name, offset),
            t => {
                self.pos -= usize::from(t != Tok::End);
                Err(self.unexpected(t, "a formula"))
            }
        }
    }

    fn atom(&mut self, name: String, offset: usize) -> Result<Formula, ParseError> {
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            if *self.peek() != Tok::RParen {
                loop {
                    match self.peek().clone() {
                        Tok::Ident(v) if is_var_name(&v) => {
                            args.push(Var::new(v));
                            self.bump();
                        }
                        t => return Err(self.unexpected(t, "a variable")),
                    }
                    match self.peek().clone() {
                        Tok::Comma => {
                            self.bump();
                        }
                        Tok::RParen => break,
                        t => return Err(self.unexpected(t, "',' or ')'")),
                    }
                }
            }
            self.expect(Tok::RParen)?;
        }
        let arity = self.resolve_arity(&name, args.len(), offset)?;
        if arity != args.len() {
            return Err(ParseError::ArityMismatch { name, expected: arity, found: args.len(), offset });
        }
        Ok(Formula::Atom(RelSym { name, arity }, args))
    }

    fn resolve_arity(&mut self, name: &str, used: usize, offset: usize) -> Result<usize, ParseError> {
        if let Some(scope) = self.scopes.iter_mut().rev().find(|s| s.name == name) {
            return Ok(*scope.arity.get_or_insert(used));
        }
        self.sig
            .arity(name)
            .ok_or_else(|| ParseError::UndeclaredSymbol { name: name.to_string(), offset })
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "E" | "A" | "E2" | "A2" | "true")
}
