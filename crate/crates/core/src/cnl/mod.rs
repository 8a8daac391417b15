//! The controlled query language: tokenizer, parser, and next-token
//! prediction for autocomplete.
//!
//! ```text
//! Query    := "What" "are" "the" TypePlural RelChain "?"
//!           | "Which" TypePlural VP { "and" VP } "?"
//! RelChain := "that" VP { "and" "that" VP }
//! VP       := ActiveVerb NPObj | ("is" | "are") PassiveParticiple "by" NPObj
//! NPObj    := "the" TypeSingular ProperName | "the" TypePlural RelChain
//! ```
//!
//! `and that` continues the innermost relative clause; a bare `and` in a
//! `Which` query continues the top-level one.

mod ir;
mod parser;
mod token;

use std::fmt;
use std::ops::Range;

use serde::{Serialize, Serializer};
use thiserror::Error;

pub use ir::{IrArg, IrAtom, QueryIr, VarId};
pub use parser::{expected_next, parse};
pub use token::{tokenize, Number, Token, TokenKind};

use crate::lexicon::Lexicon;

/// Something the parser is willing to accept next.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expected {
    /// A keyword, type noun, verb word or `?`, in canonical spelling.
    Literal(String),
    /// A proper name of the given entity type.
    Name(String),
    /// The query is complete.
    End,
}

impl Expected {
    pub fn literal(s: &str) -> Self {
        Expected::Literal(s.to_string())
    }

    /// Whether `token` is an instance of this expectation.
    pub fn admits(&self, token: &Token) -> bool {
        match self {
            Expected::Literal(lit) => {
                token.kind != TokenKind::ProperName && token.lower() == lit.to_lowercase()
            }
            Expected::Name(_) => token.kind == TokenKind::ProperName,
            Expected::End => false,
        }
    }
}

impl fmt::Display for Expected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expected::Literal(s) => f.write_str(s),
            Expected::Name(ty) => write!(f, "<{ty} name>"),
            Expected::End => f.write_str("<end>"),
        }
    }
}

impl Serialize for Expected {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn join_expected(expected: &[Expected]) -> String {
    expected
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CnlError {
    #[error("empty query")]
    EmptyInput,
    #[error("unknown word \"{surface}\" at {}", span.start)]
    UnknownWord { surface: String, span: Range<usize> },
    #[error("unterminated quote at {position}")]
    UnterminatedQuote { position: usize },
    #[error("unexpected input at {position}; expected one of: {}", join_expected(expected))]
    Grammar {
        position: usize,
        expected: Vec<Expected>,
    },
    #[error("\"{verb}\" needs a {expected} but got a {found} at {position}")]
    TypeMismatch {
        verb: String,
        expected: String,
        found: String,
        position: usize,
    },
}

impl CnlError {
    /// Byte offset the error refers to, if any.
    pub fn position(&self) -> Option<usize> {
        match self {
            CnlError::EmptyInput => None,
            CnlError::UnknownWord { span, .. } => Some(span.start),
            CnlError::UnterminatedQuote { position }
            | CnlError::Grammar { position, .. }
            | CnlError::TypeMismatch { position, .. } => Some(*position),
        }
    }
}

/// Tokenizes and parses in one step.
pub fn parse_query(text: &str, lexicon: &Lexicon) -> Result<QueryIr, CnlError> {
    let tokens = tokenize(text, lexicon)?;
    parse(&tokens, lexicon)
}
