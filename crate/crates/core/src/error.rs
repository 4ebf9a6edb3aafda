use thiserror::Error;

use crate::bounds::ConstraintReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),

    #[error("variable `{0}` appears in sets that must be disjoint")]
    Overlap(String),

    #[error("invalid alphabet `{name}`: {reason}")]
    InvalidAlphabet { name: String, reason: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("table needs {required} cells, cap is {cap}")]
    CellCap { required: u128, cap: usize },

    #[error("conditioning event has zero probability")]
    ZeroProbabilityEvidence,

    #[error("invalid payoff: {0}")]
    InvalidPayoff(String),

    #[error("candidate violates constraints: {}", .0.summary())]
    Constraints(Box<ConstraintReport>),

    #[error("source sequence outside scheme support")]
    OutsideSupport,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
