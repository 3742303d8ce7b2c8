use crate::error::LinalgError;
use crate::linalg::Matrix;

/// QR factorization with strictly positive diagonal of `R`, making the
/// factorization unique. Requires `rows >= cols` and full column rank.
///
/// This convention matters downstream: QR of a Ginibre sample with positive
/// `R` diagonal is exactly Haar on the orthogonal group, and the Lyapunov
/// QR sweep stays deterministic given its inputs.
pub fn qr_positive(m: &Matrix) -> Result<(Matrix, Matrix), LinalgError> {
    let rows = m.rows();
    let cols = m.cols();
    if rows < cols {
        return Err(LinalgError::ShapeMismatch(format!(
            "qr_positive needs rows >= cols, got {rows}x{cols}"
        )));
    }
    let mut r = m.clone();
    // Householder vectors, one per column.
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for k in 0..cols {
        let mut v: Vec<f64> = (k..rows).map(|i| r[(i, k)]).collect();
        let alpha = {
            let n = norm(&v);
            if v[0] >= 0.0 {
                -n
            } else {
                n
            }
        };
        let mut push_identity = true;
        if alpha != 0.0 {
            v[0] -= alpha;
            let vn = norm(&v);
            if vn > 0.0 {
                for x in v.iter_mut() {
                    *x /= vn;
                }
                // Apply H = I - 2 v v^T to the trailing block.
                for j in k..cols {
                    let mut dot = 0.0;
                    for (i, vi) in v.iter().enumerate() {
                        dot += vi * r[(k + i, j)];
                    }
                    for (i, vi) in v.iter().enumerate() {
                        r[(k + i, j)] -= 2.0 * vi * dot;
                    }
                }
                push_identity = false;
            }
        }
        if push_identity {
            v = vec![0.0; rows - k];
        }
        reflectors.push(v);
    }

    // Q = H_0 H_1 ... H_{cols-1} applied to the first `cols` identity columns.
    let mut q = Matrix::from_fn(rows, cols, |i, j| if i == j { 1.0 } else { 0.0 });
    for k in (0..cols).rev() {
        let v = &reflectors[k];
        if v.iter().all(|&x| x == 0.0) {
            continue;
        }
        for j in 0..cols {
            let mut dot = 0.0;
            for (i, vi) in v.iter().enumerate() {
                dot += vi * q[(k + i, j)];
            }
            for (i, vi) in v.iter().enumerate() {
                q[(k + i, j)] -= 2.0 * vi * dot;
            }
        }
    }

    // Zero the subdiagonal junk and enforce the sign convention.
    let threshold = 1e-13 * m.max_abs();
    let mut r_out = Matrix::zeros(cols, cols);
    for i in 0..cols {
        for j in i..cols {
            r_out[(i, j)] = r[(i, j)];
        }
    }
    for j in 0..cols {
        let pivot = r_out[(j, j)];
        if pivot.abs() < threshold || pivot == 0.0 {
            return Err(LinalgError::RankDeficient { index: j, pivot });
        }
        if pivot < 0.0 {
            for c in j..cols {
                r_out[(j, c)] = -r_out[(j, c)];
            }
            for i in 0..rows {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok((q, r_out))
}

fn norm(x: &[f64]) -> f64 {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = x.iter().map(|v| (v / m) * (v / m)).sum();
    m * s.sqrt()
}
