use thiserror::Error;

/// Errors from the dense linear-algebra layer.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix data length {got} does not match {rows}x{cols}")]
    BadDimensions {
        rows: usize,
        cols: usize,
        got: usize,
    },
    #[error("non-finite entry at ({row},{col})")]
    NotFinite { row: usize, col: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(
        "iteration failed to converge after {sweeps} sweeps (off-diagonal residual {residual:e})"
    )]
    NonConvergence { sweeps: usize, residual: f64 },
    #[error("rank-deficient input: |R[{index},{index}]| = {pivot:e} below threshold")]
    RankDeficient { index: usize, pivot: f64 },
    #[error("matrix is not symmetric within tolerance (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("digamma domain error: x = {0} is not positive")]
    DigammaDomain(f64),
    #[error("compound matrix dimension C({n},{t}) = {dim} exceeds capacity {cap}")]
    WedgeCapacity {
        n: usize,
        t: usize,
        dim: u64,
        cap: u64,
    },
    #[error("columns are not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
}

/// Errors from the random-ensemble samplers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum EnsembleError {
    #[error("invalid ensemble parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "rank-conditioned gate rejection cap of {cap} attempts exceeded \
         (estimated acceptance probability {acceptance:e})"
    )]
    RejectionCapExceeded { cap: usize, acceptance: f64 },
}

/// Errors from spectrum estimation: sampling failures or numerical failures
/// of the underlying factorizations.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpectrumError {
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Errors from alignment analyses.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum AlignmentError {
    #[error("degenerate support: {0}")]
    DegenerateSupport(String),
    #[error("alignment hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Errors from model construction and training.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum DynamicsError {
    #[error("infeasible construction: {0}")]
    Infeasible(String),
    #[error("training diverged at step {step} (last finite loss {last_loss:e})")]
    Divergence { step: usize, last_loss: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
