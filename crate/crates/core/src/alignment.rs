//! Singular-vector alignment induced by spectral separation: rotation
//! matrices, diagonal correlation, and the Cholesky-based first-order
//! limits describing how fast the off-diagonal mass decays.

use crate::error::AlignmentError;
use crate::linalg::{cholesky_unit, det, sign_align, svd, symmetric_eigen, Matrix};

const ORTHONORMAL_TOL: f64 = 1e-8;

/// Rotation between two left singular bases, sign-aligned so the diagonal
/// of the leading block is non-negative.
#[derive(Debug, Clone)]
pub struct RotationMatrix {
    pub matrix: Matrix,
    pub rank: usize,
}

impl RotationMatrix {
    /// `max |(R^{r,r} - I)_{ij}|`, the working measure of misalignment.
    pub fn sup_deviation(&self) -> f64 {
        self.matrix.top_left(self.rank).max_abs_dev_identity()
    }
}

/// `R = U_ref^T sign_align(U_ref, U_target)`.
pub fn rotation(
    u_ref: &Matrix,
    u_target: &Matrix,
    rank: usize,
) -> Result<RotationMatrix, AlignmentError> {
    for u in [u_ref, u_target] {
        let dev = u.transpose().matmul(u).max_abs_dev_identity();
        if dev > ORTHONORMAL_TOL {
            return Err(crate::error::LinalgError::NotOrthonormal { deviation: dev }.into());
        }
    }
    if u_ref.rows() != u_target.rows() {
        return Err(crate::error::LinalgError::ShapeMismatch(format!(
            "row counts differ: {} vs {}",
            u_ref.rows(),
            u_target.rows()
        ))
        .into());
    }
    let aligned = sign_align(u_ref, u_target)?;
    let matrix = u_ref.transpose().matmul(&aligned);
    let rank = rank.min(matrix.rows()).min(matrix.cols());
    Ok(RotationMatrix { matrix, rank })
}

/// Diagonal correlation coefficient: Pearson correlation of the row/column
/// indices under the entrywise-absolute-value mass distribution. Equals 1
/// exactly for diagonally supported matrices, -1 for antidiagonally
/// supported ones, 0 for constant matrices.
pub fn diagonal_correlation(a: &Matrix) -> Result<f64, AlignmentError> {
    if !a.is_square() {
        return Err(crate::error::LinalgError::ShapeMismatch(format!(
            "diagonal correlation needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        ))
        .into());
    }
    let n = a.rows();
    let scale = a.max_abs();
    if scale == 0.0 {
        return Err(AlignmentError::DegenerateSupport("zero matrix".into()));
    }
    // Normalizing by the largest entry makes the computation scale-free and
    // keeps the quadratic index sums inside f64 range.
    let mut m = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let ri = (i + 1) as f64;
        for j in 0..n {
            let rj = (j + 1) as f64;
            let w = a[(i, j)].abs() / scale;
            m += w;
            sx += ri * w;
            sy += rj * w;
            sxx += ri * ri * w;
            syy += rj * rj * w;
            sxy += ri * rj * w;
        }
    }
    let var_x = m * sxx - sx * sx;
    let var_y = m * syy - sy * sy;
    let tiny = 1e-24 * m * m * (n * n) as f64;
    if var_x <= tiny || var_y <= tiny {
        return Err(AlignmentError::DegenerateSupport(
            "index mass is confined to a single row or column".into(),
        ));
    }
    Ok((m * sxy - sx * sy) / (var_x * var_y).sqrt())
}

/// First-order alignment limits from `C = B B^T`: the unit-triangular
/// Cholesky factor `T` of `C^{r,r}`, its diagonal `Sigma`, and the same
/// diagonal recomputed independently as leading-principal-minor ratios.
#[derive(Debug, Clone)]
pub struct AlignmentPrediction {
    pub t: Matrix,
    pub sigma: Vec<f64>,
    pub ell: Vec<f64>,
    t_inv: Matrix,
}

impl AlignmentPrediction {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn t_inverse(&self) -> &Matrix {
        &self.t_inv
    }

    /// Predicted leading block of the rotation matrix given the separated
    /// factor's top singular values: entry `(i, j)` decays like
    /// `T[i,j] * s_i / s_j` below the diagonal and like
    /// `(T^{-1})[j,i] * s_j / s_i` above it.
    pub fn predicted_rotation(&self, s: &[f64]) -> Matrix {
        let r = self.rank();
        assert!(s.len() >= r, "need at least r singular values");
        Matrix::from_fn(r, r, |i, j| {
            if i == j {
                1.0
            } else if i > j {
                self.t[(i, j)] * s[i] / s[j]
            } else {
                self.t_inv[(j, i)] * s[j] / s[i]
            }
        })
    }
}

/// Cholesky-based alignment prediction for the product `A B` when `A` has
/// separated spectrum and standard right singular basis. Errors when the
/// leading `r x r` block of `B B^T` is not positive definite (the first
/// `r` columns of `B` must be linearly independent).
pub fn predict_alignment(b: &Matrix, rank: usize) -> Result<AlignmentPrediction, AlignmentError> {
    if rank == 0 || rank > b.rows() {
        return Err(crate::error::LinalgError::IndexOutOfRange {
            index: rank,
            dim: b.rows(),
        }
        .into());
    }
    let c = b.matmul(&b.transpose());
    let block = c.top_left(rank);
    let factors = cholesky_unit(&block).map_err(|e| match e {
        crate::error::LinalgError::NotPositiveDefinite { index, pivot } => {
            AlignmentError::HypothesisViolation(format!(
                "C^{{r,r}} is not positive definite (pivot {pivot:e} at index {index}); \
                 the first r columns of B must be linearly independent"
            ))
        }
        other => other.into(),
    })?;
    // Independent route: leading-principal-minor ratios.
    let mut ell = Vec::with_capacity(rank);
    let mut prev = 1.0;
    for i in 1..=rank {
        let d = det(&c.top_left(i));
        ell.push(d / prev);
        prev = d;
    }
    let t_inv = factors.t_inverse();
    Ok(AlignmentPrediction {
        t: factors.t,
        sigma: factors.sigma,
        ell,
        t_inv,
    })
}

/// One point of an alignment experiment: observed rotation statistics plus
/// the first-order predictions at that separation strength.
#[derive(Debug, Clone)]
pub struct AlignmentReport {
    /// Scale parameter tau (synthetic sweep) or split index (products).
    pub parameter: f64,
    /// Strict off-diagonal entries of `R^{r,r}` as `(row, col, value)`.
    pub off_diag_observed: Vec<(usize, usize, f64)>,
    pub off_diag_predicted: Vec<(usize, usize, f64)>,
    pub diag_corr: f64,
    /// `max |(R^{r,r} - I)_{ij}|`.
    pub sup_deviation: f64,
    /// `(S^{r,r})^{-1} R^{r,r} S^{r,r}`; converges to `T_C`.
    pub lower_conjugate: Matrix,
    /// `S^{r,r} R^{r,r} (S^{r,r})^{-1}`; converges to `(T_C^{-1})^T`.
    pub upper_conjugate: Matrix,
    /// `sigma_i(X) / s_i^2`; converges to `ell_i`.
    pub sigma_ratio: Vec<f64>,
}

/// Deterministic alignment sweep: for each separation strength `tau`, the
/// separated factor is `S = diag(e^{(n-1) tau}, ..., e^0)` (its left and
/// right singular bases are the standard one), the product is `S B`, and
/// the rotation is read off the eigenvectors of `X = S C S`.
///
/// The eigensolve goes through the relative-accuracy Jacobi iteration, so
/// the trailing singular directions stay meaningful even at separations far
/// beyond what a backward-stable dense SVD of `S B` could resolve.
pub fn synthetic_alignment_sweep(
    b: &Matrix,
    rank: usize,
    separation_scales: &[f64],
) -> Result<Vec<AlignmentReport>, AlignmentError> {
    if !b.is_square() {
        return Err(crate::error::LinalgError::ShapeMismatch(format!(
            "synthetic sweep needs a square B, got {}x{}",
            b.rows(),
            b.cols()
        ))
        .into());
    }
    let n = b.rows();
    let prediction = predict_alignment(b, rank)?;
    let c = b.matmul(&b.transpose());
    let mut out = Vec::with_capacity(separation_scales.len());
    for &tau in separation_scales {
        if 2.0 * (n as f64 - 1.0) * tau > 690.0 {
            return Err(AlignmentError::HypothesisViolation(format!(
                "separation scale tau = {tau} overflows f64 at width {n}"
            )));
        }
        let s_diag: Vec<f64> = (0..n).map(|i| (((n - 1 - i) as f64) * tau).exp()).collect();
        let x = Matrix::from_fn(n, n, |i, j| s_diag[i] * c[(i, j)] * s_diag[j]);
        let (eigvals, mut eigvecs) = symmetric_eigen(&x)?;
        // Fix signs so the leading diagonal is non-negative.
        for j in 0..n {
            if eigvecs[(j, j)] < 0.0 {
                for i in 0..n {
                    eigvecs[(i, j)] = -eigvecs[(i, j)];
                }
            }
        }
        let r_block = eigvecs.top_left(rank);
        let predicted = prediction.predicted_rotation(&s_diag);
        let mut off_obs = Vec::new();
        let mut off_pred = Vec::new();
        for i in 0..rank {
            for j in 0..rank {
                if i != j {
                    off_obs.push((i, j, r_block[(i, j)]));
                    off_pred.push((i, j, predicted[(i, j)]));
                }
            }
        }
        let lower_conjugate =
            Matrix::from_fn(rank, rank, |i, j| r_block[(i, j)] * s_diag[j] / s_diag[i]);
        let upper_conjugate =
            Matrix::from_fn(rank, rank, |i, j| r_block[(i, j)] * s_diag[i] / s_diag[j]);
        let sigma_ratio: Vec<f64> = (0..rank)
            .map(|i| eigvals[i] / (s_diag[i] * s_diag[i]))
            .collect();
        out.push(AlignmentReport {
            parameter: tau,
            off_diag_observed: off_obs,
            off_diag_predicted: off_pred,
            diag_corr: diagonal_correlation(&eigvecs)?,
            sup_deviation: r_block.max_abs_dev_identity(),
            lower_conjugate,
            upper_conjugate,
            sigma_ratio,
        });
    }
    Ok(out)
}

/// Diagonal-correlation diagnostics for a gated product split at layer
/// `split`: the rotation between the left bases of the full product and of
/// the suffix, plus the two quadratic-form variants.
#[derive(Debug, Clone, Copy)]
pub struct ProductAlignmentReport {
    pub split: usize,
    /// Full-matrix diagonal correlation of `U_J^T U_A`.
    pub diag_corr_uu: f64,
    /// Same quantity on the top-left `block x block` sub-matrix.
    pub diag_corr_uu_block: f64,
    /// Top-left block of `U_J^T A A^T U_J`.
    pub diag_corr_uaau_block: f64,
    /// Top-left block of `A A^T`.
    pub diag_corr_aa_block: f64,
    pub block: usize,
}

/// `layers[k]` is the `(k+1)`-th factor, so the full product is
/// `layers[L-1] ... layers[0]` and the suffix after `split` is
/// `layers[L-1] ... layers[split]`.
pub fn product_alignment_report(
    layers: &[Matrix],
    split: usize,
    block: usize,
) -> Result<ProductAlignmentReport, AlignmentError> {
    let depth = layers.len();
    if split == 0 || split >= depth {
        return Err(crate::error::LinalgError::IndexOutOfRange {
            index: split,
            dim: depth,
        }
        .into());
    }
    let full = normalized_product(layers);
    let suffix = normalized_product(&layers[split..]);
    let u_j = svd(&full)?.u;
    let u_a = svd(&suffix)?.u;
    let r_uu = u_j.transpose().matmul(&u_a);
    let aat = suffix.matmul(&suffix.transpose());
    let uaau = u_j.transpose().matmul(&aat).matmul(&u_j);
    let b = block.min(full.rows());
    Ok(ProductAlignmentReport {
        split,
        diag_corr_uu: diagonal_correlation(&r_uu)?,
        diag_corr_uu_block: diagonal_correlation(&r_uu.top_left(b))?,
        diag_corr_uaau_block: diagonal_correlation(&uaau.top_left(b))?,
        diag_corr_aa_block: diagonal_correlation(&aat.top_left(b))?,
        block: b,
    })
}

/// Product `layers[last] ... layers[0]` with per-step Frobenius rescaling;
/// the overall scale cancels in every consumer here.
pub fn normalized_product(layers: &[Matrix]) -> Matrix {
    assert!(!layers.is_empty());
    let mut p = layers[0].clone();
    let norm0 = p.frobenius_norm();
    if norm0 > 0.0 {
        p = p.scale(1.0 / norm0);
    }
    for m in &layers[1..] {
        p = m.matmul(&p);
        let norm = p.frobenius_norm();
        if norm > 0.0 {
            p = p.scale(1.0 / norm);
        }
    }
    p
}
