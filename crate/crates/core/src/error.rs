use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max |M_ij - conj(M_ji)| = {0:e})")]
    NotHermitian(f64),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NonConvergence { sweeps: usize, off_norm: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state is not normalised (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid measurement setting '{label}': {reason}")]
    InvalidMeasurement { label: String, reason: String },

    #[error("no coincidences recorded for setting pair {0}")]
    ZeroCoincidence(String),

    #[error("structure violation: {0}")]
    StructureViolation(String),

    #[error("outcome probabilities sum to {0}, expected 1")]
    InconsistentProbabilities(f64),

    #[error("malformed input: {0}")]
    Input(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
