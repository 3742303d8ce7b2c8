//! Dense linear-algebra primitives with the exact ordering, sign, and index
//! conventions the rest of the crate depends on.

mod cholesky;
mod det;
mod digamma;
mod eigen;
mod matrix;
mod qr;
mod svd;
mod wedge;

pub use cholesky::{cholesky_unit, CholeskyUnitFactors};
pub use det::{det, log_abs_det};
pub use digamma::digamma;
pub use eigen::symmetric_eigen;
pub use matrix::Matrix;
pub use qr::qr_positive;
pub use svd::{svd, SvdFactors};
pub use wedge::{binomial, increasing_tuples, wedge, WEDGE_CAPACITY};

use crate::error::LinalgError;

/// Flips columns of `target` so each has non-negative dot product with the
/// corresponding column of `reference`. Matches the sign freedom of singular
/// vectors against a chosen reference basis.
pub fn sign_align(reference: &Matrix, target: &Matrix) -> Result<Matrix, LinalgError> {
    if reference.rows() != target.rows() || reference.cols() != target.cols() {
        return Err(LinalgError::ShapeMismatch(format!(
            "sign_align shapes differ: {}x{} vs {}x{}",
            reference.rows(),
            reference.cols(),
            target.rows(),
            target.cols()
        )));
    }
    let mut out = target.clone();
    for j in 0..target.cols() {
        let mut dot = 0.0;
        for i in 0..target.rows() {
            dot += reference[(i, j)] * target[(i, j)];
        }
        if dot < 0.0 {
            for i in 0..target.rows() {
                out[(i, j)] = -out[(i, j)];
            }
        }
    }
    Ok(out)
}
