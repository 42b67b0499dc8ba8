//! Restricted pandas-chain query language: lexer, parser, sandboxed
//! evaluator and the literal-masking canonicalizers used by the diversity
//! metrics.
//!
//! Code outside the supported subset fails with [`ErrorKind::UnknownMethod`]
//! rather than running anything on the host.

pub mod ast;
mod eval;
mod lexer;
mod mask;
mod parser;
mod value;

use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

pub use eval::{evaluate, EvalLimits};
pub use lexer::{lex, unquote, Token, TokenKind};
pub use mask::{mask_constants, strip_string_literals};
pub use parser::{parse, parse_source};
pub use value::{render_value, Frame, Grouped, ListSeries, Mask, Series, Value};

use crate::table::Table;

/// Half-open byte range into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn join(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.start, self.end].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [start, end] = <[usize; 2]>::deserialize(d)?;
        Ok(Span { start, end })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorKind {
    LexError,
    ParseError,
    UnknownColumn,
    UnknownMethod,
    TypeError,
    IndexError,
    LimitExceeded,
    DivisionByZero,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Any failure while lexing, parsing or evaluating; serializes as
/// `{kind, span: [start, end], message}`.
#[derive(Debug, Clone, PartialEq, Eq, Error, Deserialize)]
#[error("{kind} at {}..{}: {message}", span.start, span.end)]
pub struct DslError {
    pub kind: ErrorKind,
    pub span: Span,
    pub message: String,
}

impl DslError {
    pub fn new(kind: ErrorKind, span: Span, message: impl Into<String>) -> Self {
        DslError {
            kind,
            span,
            message: message.into(),
        }
    }
}

impl Serialize for DslError {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("DslError", 3)?;
        st.serialize_field("kind", &self.kind)?;
        st.serialize_field("span", &self.span)?;
        st.serialize_field("message", &self.message)?;
        st.end()
    }
}

/// Lex, parse and evaluate `source` against `table`.
pub fn run(source: &str, table: &Table, limits: &EvalLimits) -> Result<Value, DslError> {
    let expr = parse_source(source)?;
    evaluate(&expr, table, limits)
}
