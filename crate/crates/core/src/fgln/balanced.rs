use rand::Rng;

use crate::ensembles::{ginibre_with, haar_with, Gate};
use crate::error::DynamicsError;
use crate::fgln::FglnModel;
use crate::linalg::{qr_positive, Matrix};
use crate::rng::RngStream;

const BALANCE_TOL: f64 = 1e-10;

/// Builds a width-`n` model whose masked layers satisfy the balancing
/// identity `M_{l+1}^T M_{l+1} = M_l M_l^T` exactly and whose end-to-end
/// map has the prescribed singular spectrum.
///
/// Construction: `M_l = Q_l Lambda^{1/L} Q_{l-1}^T` with `Q_l` an
/// orthonormal `n x m` frame supported on gate `l`'s active coordinates
/// (Haar on the support), which telescopes to `J = Q_L Lambda Q_0^T`.
/// Weight entries outside the supported block are filled with fresh
/// Ginibre draws; the gates annihilate them, so they only make the raw
/// weights generic.
pub fn balanced_init(
    gates: &[Gate],
    spectrum: &[f64],
    stream: RngStream,
) -> Result<FglnModel, DynamicsError> {
    if gates.is_empty() {
        return Err(DynamicsError::InvalidConfig(
            "balanced_init needs at least one gate (depth >= 2)".into(),
        ));
    }
    let n = gates[0].dim();
    if gates.iter().any(|g| g.dim() != n) {
        return Err(DynamicsError::InvalidConfig(
            "gates must share one dimension".into(),
        ));
    }
    let m = spectrum.len();
    if m == 0 || spectrum.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
        return Err(DynamicsError::InvalidConfig(
            "spectrum must be non-empty with positive finite entries".into(),
        ));
    }
    let min_rank = gates.iter().map(Gate::rank).min().unwrap();
    if m > min_rank {
        return Err(DynamicsError::Infeasible(format!(
            "spectrum length {m} exceeds the minimum gate rank {min_rank}"
        )));
    }
    let depth = gates.len() + 1;
    let mut sorted: Vec<f64> = spectrum.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let roots: Vec<f64> = sorted.iter().map(|s| s.powf(1.0 / depth as f64)).collect();

    let mut rng = stream.rng();
    // Orthonormal frames: boundary ones are unrestricted, interior ones are
    // supported on the gate coordinates and rotated by a Haar m x m factor.
    let mut frames: Vec<Matrix> = Vec::with_capacity(depth + 1);
    frames.push(haar_frame(n, m, &mut rng));
    for gate in gates {
        let support = gate.support();
        let local = haar_frame(support.len(), m, &mut rng);
        let rot = haar_with(m, &mut rng);
        let embedded = Matrix::from_fn(n, m, |i, j| match support.iter().position(|&s| s == i) {
            Some(row) => (0..m).map(|k| local[(row, k)] * rot[(k, j)]).sum(),
            None => 0.0,
        });
        frames.push(embedded);
    }
    frames.push(haar_frame(n, m, &mut rng));

    let sigma_fill = 1.0 / (n as f64).sqrt();
    let mut weights = Vec::with_capacity(depth);
    for l in 1..=depth {
        let q_out = &frames[l];
        let q_in = &frames[l - 1];
        // M_l = Q_l diag(roots) Q_{l-1}^T on the supported block.
        let masked = Matrix::from_fn(n, n, |i, j| {
            (0..m)
                .map(|k| q_out[(i, k)] * roots[k] * q_in[(j, k)])
                .sum()
        });
        let fill = ginibre_with(n, n, sigma_fill, &mut rng);
        let row_on = |i: usize| -> bool {
            if l == depth {
                true
            } else {
                gates[l - 1].is_on(i)
            }
        };
        let col_on = |j: usize| -> bool {
            if l == 1 {
                true
            } else {
                gates[l - 2].is_on(j)
            }
        };
        let w = Matrix::from_fn(n, n, |i, j| {
            if row_on(i) && col_on(j) {
                masked[(i, j)]
            } else {
                fill[(i, j)]
            }
        });
        weights.push(w);
    }
    let model = FglnModel::new(weights, gates.to_vec())?;
    let drift = model.balancing_drift();
    if drift >= BALANCE_TOL {
        return Err(DynamicsError::Infeasible(format!(
            "balanced construction left residual {drift:e}"
        )));
    }
    Ok(model)
}

/// `rows x cols` matrix with orthonormal columns, Haar-distributed.
fn haar_frame(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    assert!(cols <= rows);
    loop {
        let g = ginibre_with(rows, cols, 1.0, rng);
        match qr_positive(&g) {
            Ok((q, _)) => return q,
            Err(_) => continue,
        }
    }
}
