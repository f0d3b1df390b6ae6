//! Recursive-descent parser for the textual specification language.
//!
//! ```text
//! spec    := ["exists" varlist "."] formula
//! varlist := IDENT ("," IDENT)*
//! formula := disj
//! disj    := conj ("|" conj)*
//! conj    := unary ("U" unary | "&" unary)*     -- U binds tighter than &, right-assoc
//! unary   := ("!" | "X" | "G" | "F")* primary
//! primary := atom | "(" formula ")" ["@" IDENT]
//! atom    := IDENT "(" term ("," term)* ")"
//! term    := IDENT | "_"
//! ```
//!
//! `forall` is accepted in place of `exists`; integrity constraints read
//! their variable list universally.

use super::ast::{Atom, Formula, Label, Node, Specification, Term};
use super::SpecError;
use crate::fact_db::Schema;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Wildcard,
    Exists,
    Forall,
    Next,
    Always,
    Finally,
    Until,
    Not,
    And,
    Or,
    LParen,
    RParen,
    Comma,
    Dot,
    At,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Wildcard => "`_`".into(),
            Tok::Exists => "`exists`".into(),
            Tok::Forall => "`forall`".into(),
            Tok::Next => "`X`".into(),
            Tok::Always => "`G`".into(),
            Tok::Finally => "`F`".into(),
            Tok::Until => "`U`".into(),
            Tok::Not => "`!`".into(),
            Tok::And => "`&`".into(),
            Tok::Or => "`|`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::At => "`@`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, SpecError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '.' => Some(Tok::Dot),
            '@' => Some(Tok::At),
            '!' => Some(Tok::Not),
            '&' => Some(Tok::And),
            '|' => Some(Tok::Or),
            _ => None,
        };
        if let Some(t) = single {
            out.push((i, t));
            i += 1;
            continue;
        }
        if is_ident_char(c) {
            let start = i;
            while i < bytes.len() && is_ident_char(bytes[i] as char) {
                i += 1;
            }
            let word = &text[start..i];
            let tok = match word {
                "_" => Tok::Wildcard,
                "exists" => Tok::Exists,
                "forall" => Tok::Forall,
                "X" => Tok::Next,
                "G" => Tok::Always,
                "F" => Tok::Finally,
                "U" => Tok::Until,
                w => Tok::Ident(w.to_string()),
            };
            out.push((start, tok));
            continue;
        }
        let ch = text[i..].chars().next().unwrap_or('?');
        return Err(SpecError::Syntax {
            offset: i,
            expected: vec!["a token".into()],
            found: format!("character `{ch}`"),
        });
    }
    out.push((text.len(), Tok::Eof));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    vars: Vec<String>,
    labels: Vec<String>,
    schema: &'a Schema,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> SpecError {
        SpecError::Syntax {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), SpecError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[what]))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, SpecError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn spec(&mut self) -> Result<Vec<String>, SpecError> {
        let mut vars = Vec::new();
        if matches!(self.peek(), Tok::Exists | Tok::Forall) {
            self.bump();
            loop {
                let at = self.offset();
                let v = self.ident("variable name")?;
                if vars.contains(&v) {
                    return Err(SpecError::Syntax {
                        offset: at,
                        expected: vec!["a fresh variable name".into()],
                        found: format!("duplicate variable `{v}`"),
                    });
                }
                vars.push(v);
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::Dot => {
                        self.bump();
                        break;
                    }
                    _ => return Err(self.error(&["`,`", "`.`"])),
                }
            }
        }
        Ok(vars)
    }

    fn formula(&mut self) -> Result<Formula, SpecError> {
        let mut lhs = self.conj()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.conj()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Formula, SpecError> {
        // Collect `&`-separated groups of `U`-chains.
        let mut groups: Vec<Vec<Formula>> = vec![vec![self.unary()?]];
        loop {
            match self.peek() {
                Tok::Until => {
                    self.bump();
                    let u = self.unary()?;
                    groups.last_mut().expect("nonempty").push(u);
                }
                Tok::And => {
                    self.bump();
                    groups.push(vec![self.unary()?]);
                }
                _ => break,
            }
        }
        let mut chains = groups.into_iter().map(|chain| {
            let mut it = chain.into_iter().rev();
            let last = it.next().expect("nonempty chain");
            it.fold(last, |acc, f| Formula::until(f, acc))
        });
        let first = chains.next().expect("nonempty");
        Ok(chains.fold(first, Formula::and))
    }

    fn unary(&mut self) -> Result<Formula, SpecError> {
        let ctor: fn(Formula) -> Formula = match self.peek() {
            Tok::Not => Formula::not,
            Tok::Next => Formula::next,
            Tok::Always => Formula::always,
            Tok::Finally => Formula::finally,
            _ => return self.primary(),
        };
        self.bump();
        Ok(ctor(self.unary()?))
    }

    fn primary(&mut self) -> Result<Formula, SpecError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let mut f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                if *self.peek() == Tok::At {
                    self.bump();
                    let at = self.offset();
                    let l = self.ident("witness label")?;
                    if f.label.is_some() {
                        return Err(SpecError::Syntax {
                            offset: at,
                            expected: vec!["an unlabeled subformula".into()],
                            found: format!("second label `{l}`"),
                        });
                    }
                    if self.labels.contains(&l) {
                        return Err(SpecError::Syntax {
                            offset: at,
                            expected: vec!["a fresh witness label".into()],
                            found: format!("duplicate label `{l}`"),
                        });
                    }
                    self.labels.push(l.clone());
                    f.label = Some(Label::from(l.as_str()));
                }
                Ok(f)
            }
            Tok::Ident(_) => Ok(Formula::new(Node::Atom(self.atom()?))),
            _ => Err(self.error(&["atom", "`(`", "`!`", "`X`", "`G`", "`F`"])),
        }
    }

    fn atom(&mut self) -> Result<Atom, SpecError> {
        let at = self.offset();
        let pred = self.ident("predicate name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        loop {
            let term = match self.bump() {
                Tok::Wildcard => Term::Wildcard,
                Tok::Ident(s) if self.vars.contains(&s) => Term::Var(s),
                Tok::Ident(s) => Term::Const(s),
                _ => {
                    self.pos -= 1;
                    return Err(self.error(&["term"]));
                }
            };
            args.push(term);
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RParen => {
                    self.bump();
                    break;
                }
                _ => return Err(self.error(&["`,`", "`)`"])),
            }
        }
        let decl = self
            .schema
            .get(&pred)
            .ok_or_else(|| SpecError::UnknownPredicate { name: pred.clone(), offset: at })?;
        if decl.arity != args.len() {
            return Err(SpecError::ArityMismatch {
                name: pred,
                expected: decl.arity,
                found: args.len(),
                offset: at,
            });
        }
        Ok(Atom { predicate: pred, args })
    }
}

/// Parses a specification against `schema`.
pub fn parse_spec(text: &str, schema: &Schema) -> Result<Specification, SpecError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, vars: Vec::new(), labels: Vec::new(), schema };
    let vars = p.spec()?;
    p.vars = vars.clone();
    let body = p.formula()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error(&["`&`", "`|`", "`U`", "end of input"]));
    }
    Specification::new(vars, body)
}
