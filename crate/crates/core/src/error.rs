//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-square matrix: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid density operator: {0}")]
    InvalidState(String),

    #[error("stationary state not full rank (min eigenvalue {min_eig:.3e}, tolerance {tol:.3e})")]
    RankDeficientState { min_eig: f64, tol: f64 },

    #[error("non-unique stationary state: {0}")]
    NonUniqueStationaryState(String),

    #[error("kernel vector not positive-normalizable (trace magnitude {0:.3e})")]
    NonNormalizableKernel(f64),

    #[error("input has a kernel component (trace overlap {0:.3e}); not in the range of the generator")]
    KernelComponent(f64),

    #[error("singular projected system in group-inverse solve")]
    SingularProjectedSystem,

    #[error("negative horizon: {0}")]
    NegativeHorizon(f64),

    #[error("entropy production undefined without local detailed balance")]
    NoPairing,

    #[error("pairing does not cover channel {0}")]
    UnpairedChannel(u32),

    #[error("unknown channel id {0}")]
    UnknownChannel(u32),

    #[error("counting vector missing weight for channel {0}")]
    MissingWeight(u32),

    #[error("counting vector is not a current (weights not antisymmetric under channel reversal)")]
    NotACurrent,

    #[error("zero mean current; relative quantities undefined")]
    ZeroMeanCurrent,

    #[error("dead channel pair ({k}, {k_star}): zero total traffic")]
    DeadPair { k: u32, k_star: u32 },

    #[error("zero variance with nonzero response")]
    ZeroVariance,

    #[error("argument out of domain: {0}")]
    OutOfDomain(String),

    #[error("numerical consistency failure: {0}")]
    NumericalConsistency(String),

    #[error("norm increase detected during nonunitary evolution (effective Hamiltonian mis-built)")]
    NormIncrease,

    #[error("monte carlo: {0}")]
    MonteCarlo(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("linear algebra backend error: {0}")]
    Backend(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend(e.to_string())
    }
}
