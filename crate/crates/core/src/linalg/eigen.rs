use crate::error::LinalgError;
use crate::linalg::Matrix;

const MAX_SWEEPS: usize = 64;
const PAIR_TOL: f64 = 1e-14;

/// Symmetric eigendecomposition `A = V diag(lambda) V^T` by cyclic two-sided
/// Jacobi, eigenvalues sorted descending.
///
/// The rotation threshold is relative to `sqrt(a_pp * a_qq)`. For positive
/// semidefinite matrices of the graded form `D A D` (diagonal `D`, well
/// conditioned `A`) this yields eigenvalues and eigenvectors accurate
/// relative to each eigenvalue's own magnitude, which plain QR iteration
/// does not provide. The alignment sweeps rely on that property.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::ShapeMismatch(format!(
            "symmetric_eigen needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if asym > 1e-10 * (1.0 + a.max_abs()) {
        return Err(LinalgError::NotSymmetric { asymmetry: asym });
    }

    let mut h = a.clone();
    let mut v = Matrix::identity(n);
    let mut converged = false;
    let mut worst = 0.0f64;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        worst = 0.0;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = h[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = h[(p, p)];
                let aqq = h[(q, q)];
                let scale = (app.abs() * aqq.abs()).sqrt();
                if apq.abs() <= PAIR_TOL * scale {
                    continue;
                }
                worst = if scale > 0.0 {
                    worst.max(apq.abs() / scale)
                } else {
                    f64::INFINITY
                };
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                h[(p, p)] = app - t * apq;
                h[(q, q)] = aqq + t * apq;
                h[(p, q)] = 0.0;
                h[(q, p)] = 0.0;
                for i in 0..n {
                    if i != p && i != q {
                        let hip = h[(i, p)];
                        let hiq = h[(i, q)];
                        h[(i, p)] = c * hip - s * hiq;
                        h[(p, i)] = h[(i, p)];
                        h[(i, q)] = s * hip + c * hiq;
                        h[(q, i)] = h[(i, q)];
                    }
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NonConvergence {
            sweeps: MAX_SWEEPS,
            residual: worst,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| h[(i, i)]).collect();
    order.sort_by(|&x, &y| diag[y].partial_cmp(&diag[x]).unwrap().then(x.cmp(&y)));
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((values, vectors))
}
