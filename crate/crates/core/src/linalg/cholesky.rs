use crate::error::LinalgError;
use crate::linalg::Matrix;

/// Cholesky factorization in unit-triangular form: `C = T diag(Sigma) T^T`
/// with `T` unit lower-triangular.
///
/// `Sigma[i]` equals the ratio of consecutive leading principal minors
/// `det C^{i+1,i+1} / det C^{i,i}`, the quantity the alignment limits are
/// stated in.
#[derive(Debug, Clone)]
pub struct CholeskyUnitFactors {
    pub t: Matrix,
    pub sigma: Vec<f64>,
}

pub fn cholesky_unit(c: &Matrix) -> Result<CholeskyUnitFactors, LinalgError> {
    if !c.is_square() {
        return Err(LinalgError::ShapeMismatch(format!(
            "cholesky_unit needs a square matrix, got {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    let n = c.rows();
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((c[(i, j)] - c[(j, i)]).abs());
        }
    }
    if asym > 1e-10 * (1.0 + c.max_abs()) {
        return Err(LinalgError::NotSymmetric { asymmetry: asym });
    }

    // LDL^T elimination.
    let mut t = Matrix::identity(n);
    let mut sigma = vec![0.0; n];
    for j in 0..n {
        let mut d = c[(j, j)];
        for k in 0..j {
            d -= t[(j, k)] * t[(j, k)] * sigma[k];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { index: j, pivot: d });
        }
        sigma[j] = d;
        for i in j + 1..n {
            let mut v = c[(i, j)];
            for k in 0..j {
                v -= t[(i, k)] * t[(j, k)] * sigma[k];
            }
            t[(i, j)] = v / d;
        }
    }
    Ok(CholeskyUnitFactors { t, sigma })
}

impl CholeskyUnitFactors {
    pub fn reconstruct(&self) -> Matrix {
        let n = self.sigma.len();
        let mut td = self.t.clone();
        for j in 0..n {
            for i in 0..n {
                td[(i, j)] *= self.sigma[j];
            }
        }
        td.matmul(&self.t.transpose())
    }

    /// Inverse of the unit lower-triangular factor (forward substitution).
    pub fn t_inverse(&self) -> Matrix {
        let n = self.sigma.len();
        let mut inv = Matrix::identity(n);
        for j in 0..n {
            for i in 0..n {
                let mut v = if i == j { 1.0 } else { 0.0 };
                for k in 0..i {
                    v -= self.t[(i, k)] * inv[(k, j)];
                }
                inv[(i, j)] = v;
            }
        }
        inv
    }
}
