use crate::error::LinalgError;
use crate::linalg::Matrix;

/// Singular value decomposition `M = U diag(s) V^T`.
///
/// Conventions enforced by [`svd`]:
/// - `s` is non-increasing and non-negative,
/// - `U` and `V` have orthonormal columns,
/// - each column of `U` has its largest-magnitude entry positive (the sign
///   is propagated to the paired column of `V`).
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

const MAX_SWEEPS: usize = 48;
const PAIR_TOL: f64 = 1e-14;
/// Columns below this fraction of the largest column norm carry no usable
/// directional information (deep gated products leave rounding debris many
/// orders below the top singular value).
const NULL_REL: f64 = 1e-12;
/// Residual allowed on non-null pairs when the sweep cap is reached.
const FAIL_TOL: f64 = 1e-10;

/// One-sided Jacobi SVD.
///
/// The pair criterion is relative (`|u_p . u_q| <= tol |u_p| |u_q|`), so
/// singular vectors of strongly graded matrices keep their accuracy and
/// exactly-zero columns fall out as exact zero singular values. Pairs of
/// numerically-null columns may never satisfy the relative criterion; they
/// are re-orthonormalized directly after the sweeps, which perturbs the
/// reconstruction only at the null level. A residual above `FAIL_TOL` on
/// any meaningful pair is a hard [`LinalgError::NonConvergence`].
pub fn svd(m: &Matrix) -> Result<SvdFactors, LinalgError> {
    if m.rows() < m.cols() {
        let f = svd(&m.transpose())?;
        let mut swapped = SvdFactors { u: f.v, s: f.s, v: f.u };
        // The convention fixes the signs of the LEFT columns, which were
        // the right ones of the transposed problem.
        fix_left_signs(&mut swapped.u, &mut swapped.v);
        return Ok(swapped);
    }
    let n = m.cols();
    let rows = m.rows();

    // Work on M^T so the columns being orthogonalized are contiguous rows.
    let mut w = m.transpose();
    let mut vt = Matrix::identity(n);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let (alpha, beta, gamma) = gram(&w, p, q);
                if gamma.abs() <= PAIR_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut w, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }

    if !converged {
        // Null-level pairs are allowed to stall; anything else failing the
        // loose tolerance is a genuine numerical failure.
        let norms: Vec<f64> = (0..n).map(|i| norm(w.row(i))).collect();
        let max_norm = norms.iter().cloned().fold(0.0f64, f64::max);
        let floor = NULL_REL * max_norm;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                if norms[p] <= floor || norms[q] <= floor {
                    continue;
                }
                let (alpha, beta, gamma) = gram(&w, p, q);
                let rel = gamma.abs() / (alpha * beta).sqrt();
                if rel > FAIL_TOL {
                    return Err(LinalgError::NonConvergence {
                        sweeps: MAX_SWEEPS,
                        residual: rel,
                    });
                }
            }
        }
        reorthogonalize_null_rows(&mut w, floor);
    }

    // Norms of the rotated columns are the singular values.
    let norms: Vec<f64> = (0..n).map(|i| norm(w.row(i))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));

    let mut u = Matrix::zeros(rows, n);
    let mut v = Matrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut null_cols = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let sv = norms[src];
        s.push(sv);
        for i in 0..n {
            v[(i, dst)] = vt[(src, i)];
        }
        if sv > 0.0 {
            let row = w.row(src);
            for i in 0..rows {
                u[(i, dst)] = row[i] / sv;
            }
        } else {
            null_cols.push(dst);
        }
    }
    if !null_cols.is_empty() {
        complete_columns(&mut u, &null_cols);
    }

    fix_left_signs(&mut u, &mut v);

    Ok(SvdFactors { u, s, v })
}

/// Sign convention: flip `(u_j, v_j)` pairs so the largest-magnitude entry
/// of each left column is positive.
fn fix_left_signs(u: &mut Matrix, v: &mut Matrix) {
    for j in 0..u.cols() {
        let mut best = 0usize;
        for i in 1..u.rows() {
            if u[(i, j)].abs() > u[(best, j)].abs() {
                best = i;
            }
        }
        if u[(best, j)] < 0.0 {
            for i in 0..u.rows() {
                u[(i, j)] = -u[(i, j)];
            }
            for i in 0..v.rows() {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }
}

fn gram(w: &Matrix, p: usize, q: usize) -> (f64, f64, f64) {
    let rp = w.row(p);
    let rq = w.row(q);
    let mut a = 0.0;
    let mut b = 0.0;
    let mut g = 0.0;
    for (x, y) in rp.iter().zip(rq) {
        a += x * x;
        b += y * y;
        g += x * y;
    }
    (a, b, g)
}

fn norm(x: &[f64]) -> f64 {
    // Scaled sum of squares so graded rows do not underflow.
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let sum: f64 = x.iter().map(|v| (v / m) * (v / m)).sum();
    m * sum.sqrt()
}

fn rotate_rows(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let (rp, rq) = m.row_pair_mut(p, q);
    for (a, b) in rp.iter_mut().zip(rq.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Gram-Schmidt pass over the rows in descending-norm order. Rows above the
/// null floor move by at most their own rounding level; rows at the floor
/// become exactly orthogonal to everything processed before them.
fn reorthogonalize_null_rows(w: &mut Matrix, floor: f64) {
    let n = w.rows();
    let cols = w.cols();
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|i| norm(w.row(i))).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());
    for (rank, &i) in order.iter().enumerate() {
        if norms[i] > floor {
            continue;
        }
        for _ in 0..2 {
            for &j in order.iter().take(rank) {
                let nj = norm(w.row(j));
                if nj == 0.0 {
                    continue;
                }
                let mut dot = 0.0;
                for k in 0..cols {
                    dot += w[(i, k)] * w[(j, k)];
                }
                let coef = dot / (nj * nj);
                for k in 0..cols {
                    let sub = coef * w[(j, k)];
                    w[(i, k)] -= sub;
                }
            }
        }
    }
}

/// Fills the listed columns of `u` with an orthonormal completion of the
/// remaining columns (two rounds of Gram-Schmidt against everything set so
/// far).
fn complete_columns(u: &mut Matrix, null_cols: &[usize]) {
    let rows = u.rows();
    let cols = u.cols();
    let is_null: Vec<bool> = {
        let mut f = vec![false; cols];
        for &j in null_cols {
            f[j] = true;
        }
        f
    };
    let mut filled: Vec<usize> = (0..cols).filter(|&j| !is_null[j]).collect();
    let orthogonalize = |u: &Matrix, filled: &[usize], e: usize| -> Vec<f64> {
        let mut vec_: Vec<f64> = (0..rows).map(|i| if i == e { 1.0 } else { 0.0 }).collect();
        for _ in 0..2 {
            for &k in filled {
                let dot: f64 = (0..rows).map(|i| vec_[i] * u[(i, k)]).sum();
                for (i, x) in vec_.iter_mut().enumerate() {
                    *x -= dot * u[(i, k)];
                }
            }
        }
        vec_
    };
    for &j in null_cols {
        // The best coordinate direction has residual at least 1/sqrt(rows).
        let mut best: Option<(f64, Vec<f64>)> = None;
        for e in 0..rows {
            let candidate = orthogonalize(&*u, &filled, e);
            let nrm = norm(&candidate);
            if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
                best = Some((nrm, candidate));
            }
        }
        let (nrm, vec_) = best.expect("at least one candidate direction");
        assert!(
            nrm > 0.0,
            "orthonormal completion found no independent direction"
        );
        for i in 0..rows {
            u[(i, j)] = vec_[i] / nrm;
        }
        filled.push(j);
    }
}

impl SvdFactors {
    /// Reconstruction `U diag(s) V^T`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.s.len();
        let mut us = self.u.clone();
        for j in 0..n {
            for i in 0..us.rows() {
                us[(i, j)] *= self.s[j];
            }
        }
        us.matmul(&self.v.transpose())
    }

    /// Checks ordering, orthonormality and reconstruction against `m`.
    pub fn check_invariants(&self, m: &Matrix) -> Result<(), String> {
        for k in 1..self.s.len() {
            if self.s[k] > self.s[k - 1] {
                return Err(format!("singular values out of order at {k}"));
            }
        }
        if self.s.last().is_some_and(|&x| x < 0.0) {
            return Err("negative singular value".into());
        }
        let du = self.u.transpose().matmul(&self.u).max_abs_dev_identity();
        if du > 1e-10 {
            return Err(format!("U^T U deviates from identity by {du:e}"));
        }
        let dv = self.v.transpose().matmul(&self.v).max_abs_dev_identity();
        if dv > 1e-10 {
            return Err(format!("V^T V deviates from identity by {dv:e}"));
        }
        let rec = self.reconstruct().sub(m).max_abs();
        let bound = 1e-8 * (1.0 + m.max_abs());
        if rec > bound {
            return Err(format!("reconstruction error {rec:e} exceeds {bound:e}"));
        }
        Ok(())
    }
}
