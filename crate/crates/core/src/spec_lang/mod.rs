//! Specification language: syntax tree, parser, negation normal form and
//! the two experiment-shaped spec builders.

mod ast;
mod build;
mod nnf;
mod parser;

pub use ast::{Atom, Formula, Label, Node, Specification, Term};
pub use build::{build_action_chain_spec, build_pre_post_spec};
pub use nnf::{is_nnf, to_nnf};
pub use parser::parse_spec;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
    Syntax { offset: usize, expected: Vec<String>, found: String },
    #[error("unknown predicate `{name}` at byte {offset}")]
    UnknownPredicate { name: String, offset: usize },
    #[error("predicate `{name}` takes {expected} arguments, found {found} (byte {offset})")]
    ArityMismatch { name: String, expected: usize, found: usize, offset: usize },
    #[error("variable `{0}` is not bound by the quantifier list")]
    UnboundVariable(String),
    #[error("variable `{0}` is quantified twice")]
    DuplicateVariable(String),
    #[error("witness label `{0}` is used more than once")]
    DuplicateLabel(String),
    #[error("pre/post conditions must not contain temporal operators")]
    TemporalOperatorInCondition,
    #[error("action chain must contain at least one action")]
    EmptyActionList,
}

impl SpecError {
    /// Byte offset into the source text, when the error came from parsing.
    pub fn offset(&self) -> Option<usize> {
        match self {
            SpecError::Syntax { offset, .. }
            | SpecError::UnknownPredicate { offset, .. }
            | SpecError::ArityMismatch { offset, .. } => Some(*offset),
            _ => None,
        }
    }
}
