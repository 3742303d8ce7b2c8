//! Numerical laboratory for the spectral behavior of deep gated matrix
//! products: Lyapunov exponents of masked random products with finite-depth
//! corrections, separation-induced singular-vector alignment with its
//! Cholesky first-order limits, and singular-value dynamics of fixed-gates
//! linear networks under gradient descent.
//!
//! Everything is seeded and deterministic: the same `(master_seed, stream)`
//! pair reproduces any experiment bit for bit regardless of thread count.

pub mod alignment;
pub mod ensembles;
pub mod error;
pub mod fgln;
pub mod linalg;
pub mod lyapunov;
pub mod rng;
pub mod stats;

pub use ensembles::{Gate, LayerEnsemble};
pub use error::{AlignmentError, DynamicsError, EnsembleError, LinalgError};
pub use linalg::{CholeskyUnitFactors, Matrix, SvdFactors};
pub use rng::RngStream;
