use thiserror::Error;

use crate::ops::Element;

/// Crate-wide error type.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("domain size mismatch: expected {expected}, found {found}")]
    DomainMismatch { expected: usize, found: usize },

    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("value {value} out of range for domain of size {domain}")]
    ValueOutOfRange { value: usize, domain: usize },

    #[error("coordinate {index} out of range 1..={arity}")]
    CoordinateOutOfRange { index: usize, arity: usize },

    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    #[error("{needed} candidates exceed the cap of {cap}")]
    CapExceeded { needed: u128, cap: u128 },

    #[error("structure signature mismatch: {why}")]
    SignatureMismatch { why: String },

    #[error("duplicate relation name `{0}`")]
    DuplicateRelationName(String),

    #[error("unknown relation name `{0}`")]
    UnknownRelation(String),

    #[error("{construction} requires `{role}` to satisfy {condition}: identity `{identity}` fails at {valuation:?}")]
    ConditionViolated {
        construction: &'static str,
        role: &'static str,
        condition: String,
        identity: String,
        valuation: Vec<Element>,
    },

    #[error("{construction}: {requirement}")]
    Precondition {
        construction: &'static str,
        requirement: String,
    },

    #[error("rainbow entries of a symmetric ternary operation disagree: {values:?}")]
    NonConstantRainbow { values: Vec<Element> },

    #[error("composed switch table differs from its closed form at {input:?}: got {got}, closed form {expected}")]
    ClosedFormMismatch {
        input: Vec<Element>,
        got: Element,
        expected: Element,
    },

    #[error("chain invalid: {why}")]
    ChainInvalid { why: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            why: why.into(),
        }
    }
}
