use crate::error::LinalgError;
use crate::linalg::{det, Matrix};

/// Hard cap on the compound-matrix dimension C(n, t).
pub const WEDGE_CAPACITY: u64 = 10_000;

/// `t`-th compound (exterior power) matrix of a square `M`: entry `(I, J)`
/// is `det M^{I,J}` over strictly increasing index tuples in lexicographic
/// order. Multiplicative: `wedge(A B, t) = wedge(A, t) wedge(B, t)`, and the
/// singular values of the compound are the `t`-fold products of those of
/// `M`, which is what makes it a brute-force oracle for trailing singular
/// values.
pub fn wedge(m: &Matrix, t: usize) -> Result<Matrix, LinalgError> {
    assert!(m.is_square(), "wedge needs a square matrix");
    let n = m.rows();
    assert!(t >= 1 && t <= n, "wedge order must satisfy 1 <= t <= n");
    let dim = match binomial(n, t) {
        Some(d) if d <= WEDGE_CAPACITY => d as usize,
        Some(d) => {
            return Err(LinalgError::WedgeCapacity {
                n,
                t,
                dim: d,
                cap: WEDGE_CAPACITY,
            })
        }
        None => {
            return Err(LinalgError::WedgeCapacity {
                n,
                t,
                dim: u64::MAX,
                cap: WEDGE_CAPACITY,
            })
        }
    };
    let tuples = increasing_tuples(n, t);
    debug_assert_eq!(tuples.len(), dim);
    let mut out = Matrix::zeros(dim, dim);
    for (a, rows) in tuples.iter().enumerate() {
        for (b, cols) in tuples.iter().enumerate() {
            out[(a, b)] = det(&m.sub_matrix(rows, cols));
        }
    }
    Ok(out)
}

/// Strictly increasing `t`-tuples from `0..n` in lexicographic order.
pub fn increasing_tuples(n: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..t).collect();
    loop {
        out.push(cur.clone());
        // Advance to the next tuple.
        let mut i = t;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - (t - i) {
                cur[i] += 1;
                for j in i + 1..t {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn binomial(n: usize, t: usize) -> Option<u64> {
    if t > n {
        return Some(0);
    }
    let t = t.min(n - t);
    let mut acc: u64 = 1;
    for i in 0..t {
        acc = acc.checked_mul((n - i) as u64)?;
        acc /= (i + 1) as u64;
    }
    Some(acc)
}
