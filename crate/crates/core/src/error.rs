//! Error type shared by every module of the crate.
//!
//! Each variant maps to one of four coarse [`ErrorClass`]es, which the CLI
//! turns into process exit codes (validation, infeasible plan, state cap).

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification of an [`Error`], used for exit codes and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    /// Malformed or inconsistent input (model, config, plan file).
    Validation,
    /// The distribution / block length cannot realize the requested plan.
    Infeasible,
    /// Exact enumeration would exceed the configured state-space cap.
    StateCap,
    /// Decoding-time inconsistency or I/O failure.
    Runtime,
}

/// All failures reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A probability entry is negative.
    #[error("negative probability {value} at {location}")]
    NegativeProbability { location: String, value: f64 },
    /// A probability row does not sum to one within tolerance.
    #[error("probabilities at {location} sum to {sum}, expected 1")]
    RowSumError { location: String, sum: f64 },
    /// The X table is stochastic rather than a function of (v, u1, u2).
    #[error("X is not a deterministic function of (v,u1,u2) at {location}")]
    NonDeterministicX { location: String },
    /// Structural problem in a model, config, profile or plan file.
    #[error("parse error: {0}")]
    Parse(String),
    /// Parameter outside its admissible range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// Sequence length is not a power of two.
    #[error("length {0} is not a power of two")]
    LengthNotPowerOfTwo(usize),
    /// The conditioning event of an SC step has probability zero.
    #[error("zero evidence at polar index {index}")]
    ZeroEvidence { index: usize },
    /// Exact enumeration would exceed the state-space cap.
    #[error("state space too large: {size} exceeds cap {cap}")]
    StateSpaceTooLarge { size: f64, cap: f64 },
    /// Case pattern contradicts the situation's chain of inequalities.
    #[error("inadmissible combination: {0}")]
    InadmissibleCombination(String),
    /// A required set size is negative / does not fit at this block length.
    #[error("infeasible plan: {0}")]
    InfeasiblePlan(String),
    /// Messages, keys or observations do not match the plan ledger.
    #[error("plan mismatch: {0}")]
    PlanMismatch(String),
    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Coarse class of this error.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NegativeProbability { .. }
            | Error::RowSumError { .. }
            | Error::NonDeterministicX { .. }
            | Error::Parse(_)
            | Error::InvalidConfig(_)
            | Error::LengthNotPowerOfTwo(_)
            | Error::PlanMismatch(_) => ErrorClass::Validation,
            Error::InadmissibleCombination(_) | Error::InfeasiblePlan(_) => ErrorClass::Infeasible,
            Error::StateSpaceTooLarge { .. } => ErrorClass::StateCap,
            Error::ZeroEvidence { .. } | Error::Io(_) => ErrorClass::Runtime,
        }
    }

    /// Short machine-readable variant name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NegativeProbability { .. } => "NegativeProbability",
            Error::RowSumError { .. } => "RowSumError",
            Error::NonDeterministicX { .. } => "NonDeterministicX",
            Error::Parse(_) => "Parse",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::LengthNotPowerOfTwo(_) => "LengthNotPowerOfTwo",
            Error::ZeroEvidence { .. } => "ZeroEvidence",
            Error::StateSpaceTooLarge { .. } => "StateSpaceTooLarge",
            Error::InadmissibleCombination(_) => "InadmissibleCombination",
            Error::InfeasiblePlan(_) => "InfeasiblePlan",
            Error::PlanMismatch(_) => "PlanMismatch",
            Error::Io(_) => "Io",
        }
    }
}
