use crate::error::DynamicsError;
use crate::fgln::FglnModel;
use crate::linalg::{svd, Matrix, SvdFactors};
use crate::stats::fit_affine;

/// Relative spectral gap below which a singular value counts as degenerate
/// and its derivative prediction is flagged.
pub const SIMPLE_GAP_TOL: f64 = 1e-8;

/// A predicted singular-value velocity; `simple` is false when the singular
/// value sits in a near-degenerate cluster, where the derivative is not
/// well defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdotPrediction {
    pub value: f64,
    pub simple: bool,
}

/// Velocity of the `k`-th singular value (1-based) under gradient flow for
/// a balanced model:
///
/// `sdot_k = -L s_k^{2-2/L} <grad_J, u_k v_k^T>`.
pub fn predicted_sdot_balanced(
    j: &Matrix,
    grad_j: &Matrix,
    depth: usize,
    k: usize,
) -> Result<SdotPrediction, DynamicsError> {
    predicted_sdot_fixed_gates(0.0, j, grad_j, depth, k)
}

/// Fixed-gates variant carrying the depth-scaling intercept: the balanced
/// velocity is rescaled by `e^{(2 + 2/L) delta_k}`. `delta_k = 0` reduces
/// bit-for-bit to [`predicted_sdot_balanced`].
pub fn predicted_sdot_fixed_gates(
    delta_k: f64,
    j: &Matrix,
    grad_j: &Matrix,
    depth: usize,
    k: usize,
) -> Result<SdotPrediction, DynamicsError> {
    let factors = svd(j)?;
    Ok(sdot_from_factors(&factors, delta_k, grad_j, depth, k))
}

/// Same computation from an existing SVD (the trainer batches these).
pub fn sdot_from_factors(
    factors: &SvdFactors,
    delta_k: f64,
    grad_j: &Matrix,
    depth: usize,
    k: usize,
) -> SdotPrediction {
    assert!(
        k >= 1 && k <= factors.s.len(),
        "singular index out of range"
    );
    let idx = k - 1;
    let s = factors.s[idx];
    let g = dyad_inner(factors, grad_j, idx);
    let l = depth as f64;
    let value = -((2.0 + 2.0 / l) * delta_k).exp() * l * s.powf(2.0 - 2.0 / l) * g;
    SdotPrediction {
        value,
        simple: is_simple(&factors.s, idx),
    }
}

/// `<grad, u_k v_k^T> = u_k^T grad v_k`.
pub fn dyad_inner(factors: &SvdFactors, grad_j: &Matrix, idx: usize) -> f64 {
    let rows = grad_j.rows();
    let cols = grad_j.cols();
    let mut gv = vec![0.0; rows];
    for (i, slot) in gv.iter_mut().enumerate() {
        let mut acc = 0.0;
        for c in 0..cols {
            acc += grad_j[(i, c)] * factors.v[(c, idx)];
        }
        *slot = acc;
    }
    (0..rows).map(|i| factors.u[(i, idx)] * gv[i]).sum()
}

fn is_simple(s: &[f64], idx: usize) -> bool {
    let scale = s[0].max(f64::MIN_POSITIVE);
    let gap_up = if idx == 0 {
        f64::INFINITY
    } else {
        s[idx - 1] - s[idx]
    };
    let gap_down = if idx + 1 == s.len() {
        f64::INFINITY
    } else {
        s[idx] - s[idx + 1]
    };
    gap_up.min(gap_down) > SIMPLE_GAP_TOL * scale
}

/// Affine fit of `log s_k(B_l)` against the layer index `l = 2..=L` for
/// each `k`: slope `gamma_k`, intercept `delta_k`, and the max absolute
/// residual (the epsilon of the depth-scaling property).
#[derive(Debug, Clone, Copy)]
pub struct DepthScalingFit {
    /// 1-based singular index.
    pub index: usize,
    pub gamma: f64,
    pub delta: f64,
    pub max_residual: f64,
    /// Points entering the fit; smaller than `L - 1` when indices past the
    /// structural rank were excluded.
    pub points: usize,
    /// True when some depths had to be dropped (zero singular values).
    pub truncated: bool,
}

/// Ordered log-singular values of the prefix partial products: one row
/// `(l, [log s_1(B_l), ..])` per `l = 2..=L`, computed with per-step
/// rescaling so deep prefixes do not underflow. Exact zeros come out as
/// `-inf`.
pub fn prefix_log_spectra(
    model: &FglnModel,
    k_max: usize,
) -> Result<Vec<(usize, Vec<f64>)>, DynamicsError> {
    let depth = model.depth();
    if depth < 2 {
        return Err(DynamicsError::InvalidConfig(
            "depth scaling needs depth >= 2".into(),
        ));
    }
    let k_max = k_max.min(model.input_dim()).min(model.output_dim());
    let mut prefix = Matrix::identity(model.input_dim());
    let mut acc = 0.0f64;
    let mut logs = Vec::with_capacity(depth - 1);
    for l in 2..=depth {
        let layer = model.masked_layer(l - 1);
        prefix = layer.matmul(&prefix);
        let norm = prefix.frobenius_norm();
        if norm > 0.0 {
            prefix = prefix.scale(1.0 / norm);
            acc += norm.ln();
        }
        let s = svd(&prefix)?.s;
        logs.push((
            l,
            (0..k_max)
                .map(|k| {
                    if s[k] > 0.0 {
                        s[k].ln() + acc
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect(),
        ));
    }
    Ok(logs)
}

pub fn depth_scaling_fit(
    model: &FglnModel,
    k_max: usize,
) -> Result<Vec<DepthScalingFit>, DynamicsError> {
    let depth = model.depth();
    let k_max = k_max.min(model.input_dim()).min(model.output_dim());
    let logs = prefix_log_spectra(model, k_max)?;
    let mut out = Vec::with_capacity(k_max);
    for k in 0..k_max {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (l, vals) in &logs {
            if vals[k].is_finite() {
                xs.push(*l as f64);
                ys.push(vals[k]);
            }
        }
        let truncated = xs.len() < depth - 1;
        if xs.len() < 2 {
            out.push(DepthScalingFit {
                index: k + 1,
                gamma: f64::NAN,
                delta: f64::NAN,
                max_residual: f64::NAN,
                points: xs.len(),
                truncated: true,
            });
            continue;
        }
        let (gamma, delta, max_residual) = fit_affine(&xs, &ys);
        out.push(DepthScalingFit {
            index: k + 1,
            gamma,
            delta,
            max_residual,
            points: xs.len(),
            truncated,
        });
    }
    Ok(out)
}

/// Triangular-factor handling for the general dynamics diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriangularFactors {
    /// Estimate `T^-` / `T^+` from the scaled alignment matrices, zeroing
    /// the strictly-upper / strictly-lower parts as the separation
    /// assumption dictates.
    Estimated,
    /// Use identity factors (the order-zero approximation).
    Identity,
}

/// General singular-value velocity diagnostic for a product
/// `J(t) = M_L(t) ... M_1(t)` with layer time-derivatives `rates`:
///
/// `D_k = sum_l s_{A_{l+1},k} s_{B_l,k} (T^-_{l+1} V_{A_{l+1}}^T Mdot_l U_{B_l} T^+_l)_{k,k}`
///
/// which estimates `sdot_k`. Boundary factors (empty suffix/prefix) have no
/// separation structure, so their alignment matrices enter exactly; with
/// `L = 1` the diagnostic collapses to `(U^T Mdot V)_{k,k}`.
#[derive(Debug, Clone, Copy)]
pub struct DynamicsDiagnostic {
    pub value: f64,
    /// True when a singular-value ratio had to be clamped (index past the
    /// structural rank of a partial product).
    pub clamped: bool,
}

pub fn general_dynamics_diagnostic(
    layers: &[Matrix],
    rates: &[Matrix],
    k: usize,
    mode: TriangularFactors,
) -> Result<DynamicsDiagnostic, DynamicsError> {
    let depth = layers.len();
    assert_eq!(depth, rates.len(), "need one rate per layer");
    assert!(depth >= 1);
    let n = layers[0].rows();
    assert!(k >= 1 && k <= n, "singular index out of range");
    let idx = k - 1;

    let full = product(layers);
    let j_factors = svd(&full)?;
    // Suffix products A_{l+1} = M_L..M_{l+1} and prefixes B_l = M_{l-1}..M_1.
    let mut suffix = vec![Matrix::identity(n)];
    for l in (0..depth).rev() {
        let prev = suffix.last().unwrap();
        suffix.push(prev.matmul(&layers[l]));
    }
    suffix.reverse(); // suffix[l] = M_L ... M_{l+1} (0-based l = 0..=depth)
    let mut prefix = vec![Matrix::identity(n)];
    for layer in layers.iter().take(depth) {
        let prev = prefix.last().unwrap();
        prefix.push(layer.matmul(prev));
    }

    let mut clamped = false;
    let mut total = 0.0;
    for l in 0..depth {
        let a = &suffix[l + 1];
        let b = &prefix[l];
        let mut fa = svd(a)?;
        let mut fb = svd(b)?;
        // Resolve the per-factor sign freedom against the full product's
        // bases (left side for the suffix, right side for the prefix), so
        // the diagonal of each alignment factor is non-negative. Boundary
        // (empty) products enter through their exact factors instead.
        if l + 1 < depth {
            align_signs(&mut fa, &j_factors.u, true);
        }
        if l > 0 {
            align_signs(&mut fb, &j_factors.v, false);
        }
        // Boundary (empty) partial products have no separation structure,
        // so their alignment factors enter exactly in either mode; the
        // interior ones switch between estimated-triangular and identity.
        let t_minus = if l + 1 == depth {
            Some(j_factors.u.transpose())
        } else {
            match mode {
                TriangularFactors::Identity => None,
                TriangularFactors::Estimated => {
                    Some(estimated_t_factor(&j_factors.u, &fa, true, &mut clamped))
                }
            }
        };
        let t_plus = if l == 0 {
            Some(j_factors.v.clone())
        } else {
            match mode {
                TriangularFactors::Identity => None,
                TriangularFactors::Estimated => {
                    Some(estimated_t_factor(&j_factors.v, &fb, false, &mut clamped))
                }
            }
        };
        // core = V_A^T Mdot U_B, bracketed by the estimated factors.
        let core = fa.v.transpose().matmul(&rates[l]).matmul(&fb.u);
        let bracketed = match (&t_minus, &t_plus) {
            (None, None) => core,
            (Some(tm), None) => tm.matmul(&core),
            (None, Some(tp)) => core.matmul(tp),
            (Some(tm), Some(tp)) => tm.matmul(&core).matmul(tp),
        };
        let sa = fa.s[idx.min(fa.s.len() - 1)];
        let sb = fb.s[idx.min(fb.s.len() - 1)];
        total += sa * sb * bracketed[(idx, idx)];
    }
    Ok(DynamicsDiagnostic {
        value: total,
        clamped,
    })
}

/// Flips `(u_k, v_k)` pairs of `factors` so the chosen side has
/// non-negative dot products with the reference basis columns.
fn align_signs(factors: &mut SvdFactors, reference: &Matrix, left_side: bool) {
    let cols = factors.u.cols();
    for k in 0..cols {
        let side = if left_side { &factors.u } else { &factors.v };
        let mut dot = 0.0;
        for i in 0..side.rows() {
            dot += side[(i, k)] * reference[(i, k)];
        }
        if dot < 0.0 {
            for i in 0..factors.u.rows() {
                factors.u[(i, k)] = -factors.u[(i, k)];
            }
            for i in 0..factors.v.rows() {
                factors.v[(i, k)] = -factors.v[(i, k)];
            }
        }
    }
}

/// `T^- = tril(S_A^{-1} U^T U_A S_A)` (lower=true) or
/// `T^+ = triu(S_B V_B V^T S_B^{-1})` (lower=false), with ratios clamped to
/// zero past the structural rank.
fn estimated_t_factor(
    j_basis: &Matrix,
    partial: &SvdFactors,
    lower: bool,
    clamped: &mut bool,
) -> Matrix {
    let n = j_basis.rows();
    let smax = partial.s[0].max(f64::MIN_POSITIVE);
    let floor = 1e-13 * smax;
    let raw = if lower {
        j_basis.transpose().matmul(&partial.u)
    } else {
        partial.v.transpose().matmul(j_basis)
    };
    Matrix::from_fn(n, n, |i, j| {
        let keep = if lower { i >= j } else { j >= i };
        if !keep {
            return 0.0;
        }
        let (num, den) = if lower {
            (partial.s[j], partial.s[i])
        } else {
            (partial.s[i], partial.s[j])
        };
        if den <= floor || num <= floor {
            *clamped = true;
            if i == j {
                1.0
            } else {
                0.0
            }
        } else {
            raw[(i, j)] * num / den
        }
    })
}

fn product(layers: &[Matrix]) -> Matrix {
    let mut p = layers[0].clone();
    for m in &layers[1..] {
        p = m.matmul(&p);
    }
    p
}

/// Iterative singular-value prediction: the recursion
/// `s(t+1) = s(t) + C s(t)^{2-2/L} g(t)` driven by the observed gains,
/// with the scalar `C` chosen by least squares against the observed
/// trajectory (the recursion is nonlinear in `C`, so the increment-level
/// estimate only seeds a one-dimensional refinement).
#[derive(Debug, Clone)]
pub struct IterativePrediction {
    pub c: f64,
    pub predicted: Vec<f64>,
    pub rmse: f64,
    /// Span of the observed trajectory, for relative-error reporting.
    pub observed_range: f64,
    /// True when the fit was degenerate (vanishing gains).
    pub degenerate: bool,
}

pub fn iterative_prediction(
    s_observed: &[f64],
    gains: &[f64],
    depth: usize,
) -> Result<IterativePrediction, DynamicsError> {
    let t = s_observed.len();
    if t < 2 || gains.len() + 1 < t {
        return Err(DynamicsError::InvalidConfig(
            "iterative prediction needs at least two observations and their gains".into(),
        ));
    }
    let expo = 2.0 - 2.0 / depth as f64;
    // Increment-level least squares gives the seed for the trajectory fit.
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..t - 1 {
        let phi = s_observed[k].powf(expo) * gains[k];
        num += (s_observed[k + 1] - s_observed[k]) * phi;
        den += phi * phi;
    }
    if den <= f64::MIN_POSITIVE * t as f64 {
        let predicted = vec![s_observed[0]; t];
        let (rmse, observed_range) = trajectory_error(&predicted, s_observed);
        return Ok(IterativePrediction {
            c: 0.0,
            predicted,
            rmse,
            observed_range,
            degenerate: true,
        });
    }
    let c_seed = num / den;
    let objective = |c: f64| {
        let rolled = rollout(s_observed[0], &gains[..t - 1], c, expo);
        trajectory_error(&rolled, s_observed).0
    };
    // Coarse bracket in multiples of the seed, then golden-section refine.
    let mut best = (c_seed, objective(c_seed));
    for mult in [0.0, 0.25, 0.5, 0.75, 1.25, 1.5, 2.0, 3.0, 4.0, -1.0] {
        let c = c_seed * mult;
        let err = objective(c);
        if err < best.1 {
            best = (c, err);
        }
    }
    let width = c_seed.abs().max(f64::MIN_POSITIVE);
    let (mut lo, mut hi) = (best.0 - width, best.0 + width);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (hi - ratio * (hi - lo), lo + ratio * (hi - lo));
    let (mut fa, mut fb) = (objective(a), objective(b));
    for _ in 0..60 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = objective(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = objective(b);
        }
    }
    let c_mid = 0.5 * (lo + hi);
    let c = if objective(c_mid) <= best.1 {
        c_mid
    } else {
        best.0
    };
    let predicted = rollout(s_observed[0], &gains[..t - 1], c, expo);
    let (rmse, observed_range) = trajectory_error(&predicted, s_observed);
    Ok(IterativePrediction {
        c,
        predicted,
        rmse,
        observed_range,
        degenerate: false,
    })
}

fn rollout(s0: f64, gains: &[f64], c: f64, expo: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(gains.len() + 1);
    let mut s = s0;
    out.push(s);
    for &g in gains {
        s += c * s.powf(expo) * g;
        if !s.is_finite() || s < 0.0 {
            s = 0.0;
        }
        out.push(s);
    }
    out
}

fn trajectory_error(predicted: &[f64], observed: &[f64]) -> (f64, f64) {
    let mse = predicted
        .iter()
        .zip(observed)
        .map(|(p, o)| (p - o) * (p - o))
        .sum::<f64>()
        / observed.len() as f64;
    let max = observed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = observed.iter().cloned().fold(f64::INFINITY, f64::min);
    (mse.sqrt(), max - min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::sample_ginibre;
    use crate::rng::RngStream;

    #[test]
    fn sdot_zero_gradient() {
        let j = sample_ginibre(4, 1.0, RngStream::new(1));
        let p = predicted_sdot_balanced(&j, &Matrix::zeros(4, 4), 3, 1).unwrap();
        assert_eq!(p.value, 0.0);
    }

    /// Depth 1: the exponent vanishes and the velocity is exactly
    /// `-<grad, u_k v_k^T>`.
    #[test]
    fn sdot_depth_one_is_dyad_inner() {
        let j = sample_ginibre(4, 1.0, RngStream::new(2));
        let g = sample_ginibre(4, 1.0, RngStream::new(3));
        let p = predicted_sdot_balanced(&j, &g, 1, 2).unwrap();
        let f = svd(&j).unwrap();
        let expected = -dyad_inner(&f, &g, 1);
        assert!((p.value - expected).abs() < 1e-12 * (1.0 + expected.abs()));
    }

    #[test]
    fn fixed_gates_zero_delta_bit_identical() {
        let j = sample_ginibre(5, 1.0, RngStream::new(4));
        let g = sample_ginibre(5, 1.0, RngStream::new(5));
        for k in 1..=5 {
            let a = predicted_sdot_balanced(&j, &g, 4, k).unwrap();
            let b = predicted_sdot_fixed_gates(0.0, &j, &g, 4, k).unwrap();
            assert_eq!(a, b);
        }
    }

    /// Exact geometric chain: log s_k(B_l) is affine in l with zero
    /// residual and slope log(d_k).
    #[test]
    fn depth_scaling_exact_geometric() {
        use crate::ensembles::Gate;
        let d = [2.0f64, 0.5];
        let w = Matrix::diag(&d);
        let depth = 5;
        let model = crate::fgln::FglnModel::new(vec![w; depth], vec![Gate::all_ones(2); depth - 1])
            .unwrap();
        let fits = depth_scaling_fit(&model, 2).unwrap();
        for (k, fit) in fits.iter().enumerate() {
            assert!((fit.gamma - d[k].ln()).abs() < 1e-10, "slope {}", fit.gamma);
            assert!(fit.max_residual < 1e-10);
            assert!(!fit.truncated);
        }
    }

    /// L = 1 diagnostic equals (U^T Mdot V)_{k,k}, the exact velocity.
    #[test]
    fn diagnostic_depth_one_reduces_to_exact() {
        let m = sample_ginibre(4, 1.0, RngStream::new(7));
        let rate = sample_ginibre(4, 1.0, RngStream::new(8));
        let f = svd(&m).unwrap();
        for k in 1..=4 {
            let d = general_dynamics_diagnostic(
                std::slice::from_ref(&m),
                std::slice::from_ref(&rate),
                k,
                TriangularFactors::Estimated,
            )
            .unwrap();
            let exact = {
                let mut acc = 0.0;
                for i in 0..4 {
                    for j in 0..4 {
                        acc += f.u[(i, k - 1)] * rate[(i, j)] * f.v[(j, k - 1)];
                    }
                }
                acc
            };
            assert!(
                (d.value - exact).abs() < 1e-10 * (1.0 + exact.abs()),
                "k={k}: {} vs {}",
                d.value,
                exact
            );
        }
    }

    #[test]
    fn iterative_prediction_zero_gain_degenerate() {
        let s = vec![1.0, 1.0, 1.0, 1.0];
        let g = vec![0.0, 0.0, 0.0];
        let p = iterative_prediction(&s, &g, 4).unwrap();
        assert!(p.degenerate);
        assert!(p.predicted.iter().all(|&x| x == 1.0));
        assert_eq!(p.rmse, 0.0);
    }

    #[test]
    fn iterative_prediction_recovers_exact_recursion() {
        // Generate a trajectory from the recursion itself; the fit must
        // recover C and the prediction must overlay the data.
        let depth = 5;
        let expo = 2.0 - 2.0 / depth as f64;
        let c_true = -0.05;
        let mut s: Vec<f64> = vec![1.2];
        let gains: Vec<f64> = (0..60)
            .map(|t| 0.8 + 0.1 * ((t as f64) * 0.3).sin())
            .collect();
        for &g in &gains {
            let last = *s.last().unwrap();
            s.push(last + c_true * last.powf(expo) * g);
        }
        let p = iterative_prediction(&s, &gains, depth).unwrap();
        assert!((p.c - c_true).abs() < 1e-12);
        assert!(p.rmse < 1e-12);
    }
}
