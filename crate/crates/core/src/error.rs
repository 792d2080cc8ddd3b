use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate denominator: theta1 - theta2^2 = {denominator:e}")]
    DegenerateDenominator { denominator: f64 },

    #[error("pilot needs {needed} evaluations but the per-branch budget is {budget}")]
    PilotExceedsBudget { needed: u64, budget: u64 },

    #[error("budget exceeded: {spent} spent, {requested} requested, capacity {capacity}")]
    BudgetExceeded {
        capacity: u64,
        spent: u64,
        requested: u64,
    },

    #[error("budget already consumed by the pilot (n={n}, m={m}, r0={r0}, l={l})")]
    BudgetAlreadyConsumed { n: u64, m: u64, r0: u64, l: u64 },

    #[error("external model: {message} (request: {request:?})")]
    Protocol { request: String, message: String },

    #[error("evaluation table: {0}")]
    TableFormat(String),

    #[error("evaluation table version {found} is not supported")]
    VersionMismatch { found: u8 },

    #[error("evaluation table checksum mismatch")]
    Checksum,

    #[error("no analytic truth for group {0}")]
    MissingTruth(String),

    #[error("T={budget}, strategy={strategy}, replication={replication}: {source}")]
    Replication {
        budget: u64,
        strategy: String,
        replication: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Strips replication context added by the experiment runner.
    pub fn root(&self) -> &Error {
        match self {
            Error::Replication { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_budget(&self) -> bool {
        matches!(
            self.root(),
            Error::PilotExceedsBudget { .. }
                | Error::BudgetExceeded { .. }
                | Error::BudgetAlreadyConsumed { .. }
        )
    }

    pub fn is_protocol(&self) -> bool {
        matches!(self.root(), Error::Protocol { .. })
    }
}
