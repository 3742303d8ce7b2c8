use crate::linalg::Matrix;

/// `log |det M|` via partially pivoted LU, accumulated in log space.
/// Exactly singular input returns `-inf`; this is a valid result, not an
/// error (gated products are singular by construction).
pub fn log_abs_det(m: &Matrix) -> f64 {
    assert!(m.is_square(), "log_abs_det needs a square matrix");
    let n = m.rows();
    if n == 0 {
        return 0.0;
    }
    let mut a = m.clone();
    let mut acc = 0.0f64;
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if a[(i, k)].abs() > a[(piv, k)].abs() {
                piv = i;
            }
        }
        let p = a[(piv, k)];
        if p == 0.0 {
            return f64::NEG_INFINITY;
        }
        if piv != k {
            for j in 0..n {
                let tmp = a[(k, j)];
                a[(k, j)] = a[(piv, j)];
                a[(piv, j)] = tmp;
            }
        }
        acc += a[(k, k)].abs().ln();
        for i in k + 1..n {
            let f = a[(i, k)] / a[(k, k)];
            if f == 0.0 {
                continue;
            }
            for j in k + 1..n {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    acc
}

/// Signed determinant via partially pivoted LU. Intended for the small
/// minors of compound matrices; use [`log_abs_det`] when magnitude may
/// overflow.
pub fn det(m: &Matrix) -> f64 {
    assert!(m.is_square(), "det needs a square matrix");
    let n = m.rows();
    if n == 0 {
        return 1.0;
    }
    let mut a = m.clone();
    let mut sign = 1.0f64;
    let mut prod = 1.0f64;
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if a[(i, k)].abs() > a[(piv, k)].abs() {
                piv = i;
            }
        }
        if a[(piv, k)] == 0.0 {
            return 0.0;
        }
        if piv != k {
            sign = -sign;
            for j in 0..n {
                let tmp = a[(k, j)];
                a[(k, j)] = a[(piv, j)];
                a[(piv, j)] = tmp;
            }
        }
        prod *= a[(k, k)];
        for i in k + 1..n {
            let f = a[(i, k)] / a[(k, k)];
            if f == 0.0 {
                continue;
            }
            for j in k + 1..n {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    sign * prod
}
