use thiserror::Error;

/// Errors raised by set operations, identification, reachability and estimation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("binary enumeration exceeded the cap of {cap} branching levels")]
    EnumerationCap { cap: usize },

    #[error("set is empty")]
    EmptySet,

    #[error("{what} is rank deficient: rank {rank}, required {required}")]
    RankDeficient {
        what: String,
        rank: usize,
        required: usize,
    },

    #[error("mode {mode} has no data")]
    EmptyMode { mode: usize },

    #[error("sample {index} lies in no region")]
    NoRegion { index: usize },

    #[error("corrected set is empty at step {step}")]
    InfeasibleEstimate { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(op: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            op,
            expected,
            found,
        })
    }
}
