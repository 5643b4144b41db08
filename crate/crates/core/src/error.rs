use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian: |H[{row}][{col}] - conj(H[{col}][{row}])| = {deviation:e}")]
    NotHermitian {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("dimension {dim} exceeds the eigensolver cap of {cap}")]
    Capacity { dim: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("functional is not invariant under a global phase (deviation {deviation:e})")]
    PhaseDependent { deviation: f64 },

    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    /// Validation failures are caller errors; everything else is an
    /// internal contract breach.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParameter(_))
    }
}

pub(crate) fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
