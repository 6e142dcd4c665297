//! Error-tolerant Solidity front end.
//!
//! Parses complete files and audit-report snippets alike into a structural
//! model (contracts, functions, modifiers, state variables, statements) with
//! byte spans into the original text. Parsing never fails; problems are
//! reported as diagnostics on the [`SourceUnit`].

mod lexer;
mod model;
mod ops;
mod parser;
mod version;

pub use lexer::{tokenize, Token, TokenKind};
pub use model::*;
pub use ops::{
    idents_in, is_ambient, is_builtin_function, is_builtin_member, is_elementary_type,
    is_keyword, split_statement, CallExpr, CallKind, OpRole, Operation,
};
pub use parser::{parse_source, parse_sources};
pub use version::{SemVer, VersionConstraint, VersionRange};

use serde::{Deserialize, Serialize};

/// Half-open byte range into a source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
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

    pub fn contains(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }
}
