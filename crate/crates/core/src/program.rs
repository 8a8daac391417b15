//! Logic-program terms, atoms and rules, with a textual syntax:
//!
//! ```text
//! what_be_genes(GN1) :- gene_gene(GN1,"DLG4"), drug_gene("Epinephrine",GN1).
//! ```
//!
//! Variables start with an uppercase letter, constants are double-quoted
//! strings (bare lowercase identifiers and integers are also read as
//! constants), `%` starts a comment.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn constant(value: impl Into<String>) -> Self {
        Term::Const(value.into())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::as_var)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Rule {
    pub fn new(head: Atom, body: Vec<Atom>) -> Self {
        Rule { head, body }
    }

    pub fn fact(head: Atom) -> Self {
        Rule {
            head,
            body: Vec::new(),
        }
    }

    /// Head variables that do not occur in the body, in head order.
    pub fn unbound_head_vars(&self) -> Vec<&str> {
        let bound: BTreeSet<&str> = self.body.iter().flat_map(Atom::vars).collect();
        let mut out: Vec<&str> = Vec::new();
        for v in self.head.vars() {
            if !bound.contains(v) && !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    pub fn is_safe(&self) -> bool {
        self.unbound_head_vars().is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Program {
    pub rules: Vec<Rule>,
}

impl Program {
    pub fn new(rules: Vec<Rule>) -> Self {
        Program { rules }
    }
}

/// Quotes a constant, escaping backslashes, quotes and newlines.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => f.write_str(&quote(c)),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        for (i, b) in self.body.iter().enumerate() {
            f.write_str(if i == 0 { " :- " } else { ", " })?;
            write!(f, "{b}")?;
        }
        f.write_str(".")
    }
}

/// Renders one rule per line.
pub fn render(program: &Program) -> String {
    program.rules.iter().map(|r| format!("{r}\n")).collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A parsed rule with the line it started on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceRule {
    pub rule: Rule,
    pub line: usize,
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn line_col(&self, pos: usize) -> (usize, usize) {
        let before = &self.src[..pos];
        let line = before.matches('\n').count() + 1;
        let column = before.rfind('\n').map_or(pos, |i| pos - i - 1) + 1;
        (line, column)
    }

    fn error_at(&self, pos: usize, message: impl Into<String>) -> SyntaxError {
        let (line, column) = self.line_col(pos);
        SyntaxError {
            line,
            column,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else if c == '%' {
                self.pos = self.src[self.pos..]
                    .find('\n')
                    .map_or(self.src.len(), |i| self.pos + i);
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), SyntaxError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.error_at(self.pos, format!("expected `{s}`")))
        }
    }

    fn ident(&mut self) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        &self.src[start..self.pos]
    }

    fn atom(&mut self) -> Result<Atom, SyntaxError> {
        self.skip_ws();
        let start = self.pos;
        let name = self.ident();
        if name.is_empty() || !name.starts_with(|c: char| c.is_ascii_lowercase()) {
            return Err(self.error_at(start, "expected a predicate name"));
        }
        if name == "not" {
            return Err(self.error_at(start, "negation is not supported"));
        }
        let mut args = Vec::new();
        if self.eat("(") {
            loop {
                args.push(self.term()?);
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        Ok(Atom::new(name, args))
    }

    fn term(&mut self) -> Result<Term, SyntaxError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some('"') => {
                self.pos += 1;
                let mut value = String::new();
                loop {
                    let Some(c) = self.peek() else {
                        return Err(self.error_at(start, "unterminated string"));
                    };
                    self.pos += c.len_utf8();
                    match c {
                        '"' => break,
                        '\\' => {
                            let esc = self.peek();
                            self.pos += esc.map_or(0, char::len_utf8);
                            match esc {
                                Some('\\') => value.push('\\'),
                                Some('"') => value.push('"'),
                                Some('n') => value.push('\n'),
                                _ => return Err(self.error_at(self.pos - 1, "invalid escape")),
                            }
                        }
                        c => value.push(c),
                    }
                }
                Ok(Term::Const(value))
            }
            Some(c) if c.is_ascii_uppercase() => Ok(Term::Var(self.ident().to_string())),
            Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() => {
                Ok(Term::Const(self.ident().to_string()))
            }
            _ => Err(self.error_at(start, "expected a term")),
        }
    }

    fn rule(&mut self) -> Result<Rule, SyntaxError> {
        let head = self.atom()?;
        let mut body = Vec::new();
        if self.eat(":-") {
            loop {
                body.push(self.atom()?);
                if self.eat(".") {
                    break;
                }
                self.expect(",")?;
            }
        } else {
            self.expect(".")?;
        }
        Ok(Rule::new(head, body))
    }
}

/// Parses rule text, keeping the starting line of every rule.
pub fn parse_program_lines(text: &str) -> Result<Vec<SourceRule>, SyntaxError> {
    let mut reader = Reader { src: text, pos: 0 };
    let mut out = Vec::new();
    loop {
        reader.skip_ws();
        if reader.pos == text.len() {
            return Ok(out);
        }
        let line = reader.line_col(reader.pos).0;
        out.push(SourceRule {
            rule: reader.rule()?,
            line,
        });
    }
}

/// Parses rule text without any semantic checks.
pub fn parse_program(text: &str) -> Result<Program, SyntaxError> {
    Ok(Program::new(
        parse_program_lines(text)?
            .into_iter()
            .map(|r| r.rule)
            .collect(),
    ))
}
