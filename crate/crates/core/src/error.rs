use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors raised by the core routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A mechanism failed structural validation.
    InvalidMechanism(String),
    /// A reaction id was outside `0..n_reactions`.
    ReactionOutOfRange { id: usize, n_reactions: usize },
    /// A time index was outside `1..=T`.
    TimeOutOfRange { t: usize, horizon: usize },
    /// A vector had the wrong length.
    DimensionMismatch { expected: usize, found: usize, what: &'static str },
    /// Invalid numeric argument (non-finite, non-positive, ...).
    InvalidArgument(String),
    /// The explicit Euler integration left the overflow bound.
    Divergence { condition_id: u64, t: usize },
    /// The step problem was flagged degenerate by the assembler.
    DegenerateStep { condition_id: u64, t: usize },
    /// No binary selection satisfies the tolerance.
    Infeasible { condition_id: u64, t: usize },
    /// The brute-force oracle only accepts small instances.
    TooLarge { n_reactions: usize, limit: usize },
    /// Steps whose full mechanism already violates the tolerance.
    InfeasibleSteps { steps: Vec<(u64, usize)> },
    /// A training or holdout set was empty.
    EmptyInput(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidMechanism(msg) => write!(f, "invalid mechanism: {msg}"),
            Error::ReactionOutOfRange { id, n_reactions } => {
                write!(f, "reaction id {id} out of range (mechanism has {n_reactions} reactions)")
            }
            Error::TimeOutOfRange { t, horizon } => {
                write!(f, "time index {t} out of range 1..={horizon}")
            }
            Error::DimensionMismatch { expected, found, what } => {
                write!(f, "{what}: expected length {expected}, found {found}")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Divergence { condition_id, t } => {
                write!(f, "condition {condition_id}: integration diverged at t={t}")
            }
            Error::DegenerateStep { condition_id, t } => {
                write!(f, "condition {condition_id}, t={t}: degenerate step problem")
            }
            Error::Infeasible { condition_id, t } => {
                write!(f, "condition {condition_id}, t={t}: no selection meets the tolerance")
            }
            Error::TooLarge { n_reactions, limit } => {
                write!(f, "{n_reactions} reactions exceeds the enumeration limit of {limit}")
            }
            Error::InfeasibleSteps { steps } => {
                write!(f, "{} step(s) infeasible even with the full mechanism:", steps.len())?;
                for (j, t) in steps.iter().take(8) {
                    write!(f, " (condition {j}, t={t})")?;
                }
                if steps.len() > 8 {
                    write!(f, " ...")?;
                }
                write!(f, "; raise epsilon or reduce the noise level")
            }
            Error::EmptyInput(what) => write!(f, "{what} is empty"),
        }
    }
}

impl core::error::Error for Error {}
