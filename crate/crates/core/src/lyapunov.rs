//! Lyapunov exponents of gated random products: closed-form values with
//! their finite-depth corrections, and numerically stable estimation of the
//! ordered log-singular values of deep products.

use rayon::prelude::*;

use crate::ensembles::{layer_with, ln_binomial, LayerEnsemble};
use crate::error::{LinalgError, SpectrumError};
use crate::linalg::{digamma, log_abs_det, qr_positive, svd, Matrix};
use crate::rng::RngStream;
use crate::stats::mean_stderr;

use crate::ensembles::haar_with;

/// Trust window of the rescaled-SVD method: once `log(s_1 / s_i)` reaches
/// this, index `i` sits at the double-precision SVD floor and its value is
/// reported but flagged untrusted.
pub const SVD_TRUST_WINDOW: f64 = 30.0;

/// A Lyapunov exponent: finite for indices up to the conditioning rank,
/// `-inf` beyond it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    NegInfinity,
}

/// Conditional rank distribution of an `(r, p)`-gate: pairs `(t, w_t)` with
/// `w_t = P(rank = t | rank >= r)`, computed in log space so `n = 128`
/// does not underflow. `p = 1` collapses to a point mass at `n`.
pub fn conditional_rank_weights(n: usize, r: usize, p: f64) -> Vec<(usize, f64)> {
    if p >= 1.0 {
        return vec![(n, 1.0)];
    }
    let log_terms: Vec<f64> = (r..=n)
        .map(|t| ln_binomial(n, t) + (t as f64) * p.ln() + ((n - t) as f64) * (1.0 - p).ln())
        .collect();
    let m = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = log_terms.iter().map(|&l| (l - m).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    (r..=n).zip(unnorm.into_iter().map(|w| w / total)).collect()
}

/// Closed-form Lyapunov exponent `gamma_i` of an `(r, p, sigma)`-layer
/// product:
///
/// `gamma_i = ln(sqrt(2) sigma) + E[psi((T - i + 1)/2) | T >= r] / 2`
///
/// with `T` the binomial gate rank. Defined for `1 <= i <= r`.
pub fn gamma_theory(e: &LayerEnsemble, i: usize) -> Result<f64, LinalgError> {
    if i == 0 || i > e.r {
        return Err(LinalgError::IndexOutOfRange { index: i, dim: e.r });
    }
    let mut acc = 0.0;
    for (t, w) in conditional_rank_weights(e.n, e.r, e.p) {
        acc += w * digamma((t as f64 - i as f64 + 1.0) / 2.0)?;
    }
    Ok((std::f64::consts::SQRT_2 * e.sigma).ln() + acc / 2.0)
}

/// The exponent as a total function of the index: `-inf` past the
/// conditioning rank.
pub fn exponent(e: &LayerEnsemble, i: usize) -> Result<Exponent, LinalgError> {
    if i == 0 {
        return Err(LinalgError::IndexOutOfRange { index: 0, dim: e.r });
    }
    if i > e.r {
        return Ok(Exponent::NegInfinity);
    }
    gamma_theory(e, i).map(Exponent::Finite)
}

/// Partial-sum form `lambda_i = gamma_1 + ... + gamma_i`, computed from its
/// own closed form
///
/// `lambda_i = (i/2) ln(2 sigma^2) + sum_{k<=i} E[psi((T - k + 1)/2)] / 2`
///
/// so the telescoping identity against [`gamma_theory`] is a genuine
/// consistency check rather than a tautology.
pub fn lambda_theory(e: &LayerEnsemble, i: usize) -> Result<f64, LinalgError> {
    if i > e.r {
        return Err(LinalgError::IndexOutOfRange { index: i, dim: e.r });
    }
    if i == 0 {
        return Ok(0.0);
    }
    let weights = conditional_rank_weights(e.n, e.r, e.p);
    let mut acc = 0.0;
    for k in 1..=i {
        for &(t, w) in &weights {
            acc += w * digamma((t as f64 - k as f64 + 1.0) / 2.0)?;
        }
    }
    Ok((i as f64 / 2.0) * (2.0 * e.sigma * e.sigma).ln() + acc / 2.0)
}

/// `r << np` approximation of `gamma_i` that drops the conditional
/// normalizer (the unconditioned binomial expectation restricted to
/// `t >= r`).
pub fn gamma_theory_unnormalized(e: &LayerEnsemble, i: usize) -> Result<f64, LinalgError> {
    if i == 0 || i > e.r {
        return Err(LinalgError::IndexOutOfRange { index: i, dim: e.r });
    }
    if e.p >= 1.0 {
        return gamma_theory(e, i);
    }
    let n = e.n;
    let mut acc = 0.0;
    for t in e.r..=n {
        let log_w = ln_binomial(n, t) + (t as f64) * e.p.ln() + ((n - t) as f64) * (1.0 - e.p).ln();
        acc += log_w.exp() * digamma((t as f64 - i as f64 + 1.0) / 2.0)?;
    }
    Ok((std::f64::consts::SQRT_2 * e.sigma).ln() + acc / 2.0)
}

/// Monte Carlo estimate of the universal correction
/// `d_i = -E[log |det Omega^{i,i}|]` over the `i x i` corner of an `n x n`
/// Haar orthogonal matrix. `d_0 = 0` exactly, without sampling.
pub fn d_coefficient_mc(i: usize, n: usize, trials: usize, stream: RngStream) -> (f64, f64) {
    assert!(i < n, "corner size must be smaller than the matrix");
    if i == 0 {
        return (0.0, 0.0);
    }
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream.child(t as u64).rng();
            let omega = haar_with(n, &mut rng);
            -log_abs_det(&omega.top_left(i))
        })
        .collect();
    mean_stderr(&samples)
}

/// Monte Carlo profile of `d_0 .. d_imax` and the paired differences
/// `d_{i-1} - d_i`, sharing one Haar sample per trial so the differences
/// have their own (smaller) standard errors.
#[derive(Debug, Clone)]
pub struct DProfile {
    /// `(estimate, stderr)` for `d_i`, index `0..=i_max`.
    pub d: Vec<(f64, f64)>,
    /// `(estimate, stderr)` for `d_{i-1} - d_i`, index `1..=i_max` at
    /// position `i - 1`.
    pub diff: Vec<(f64, f64)>,
}

pub fn d_profile_mc(i_max: usize, n: usize, trials: usize, stream: RngStream) -> DProfile {
    assert!(i_max < n);
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream.child(t as u64).rng();
            let omega = haar_with(n, &mut rng);
            (1..=i_max)
                .map(|i| -log_abs_det(&omega.top_left(i)))
                .collect()
        })
        .collect();
    let mut d = vec![(0.0, 0.0)];
    let mut diff = Vec::new();
    for i in 1..=i_max {
        let xs: Vec<f64> = per_trial.iter().map(|row| row[i - 1]).collect();
        d.push(mean_stderr(&xs));
        let ys: Vec<f64> = per_trial
            .iter()
            .map(|row| {
                if i == 1 {
                    -row[0]
                } else {
                    row[i - 2] - row[i - 1]
                }
            })
            .collect();
        diff.push(mean_stderr(&ys));
    }
    DProfile { d, diff }
}

/// Closed-form Lyapunov data for an ensemble: exponents for `i = 1..=r` and
/// the Monte Carlo correction profile.
#[derive(Debug, Clone)]
pub struct LyapunovTheory {
    pub ensemble: LayerEnsemble,
    pub gamma: Vec<f64>,
    pub corrections: DProfile,
}

pub fn lyapunov_theory(
    e: &LayerEnsemble,
    d_trials: usize,
    stream: RngStream,
) -> Result<LyapunovTheory, LinalgError> {
    let gamma: Result<Vec<f64>, _> = (1..=e.r).map(|i| gamma_theory(e, i)).collect();
    let corrections = d_profile_mc(e.r.min(e.n - 1), e.n, d_trials, stream);
    Ok(LyapunovTheory {
        ensemble: *e,
        gamma: gamma?,
        corrections,
    })
}

/// Stabilization method for deep products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMethod {
    /// Accumulate the explicit product with per-layer Frobenius rescaling,
    /// then one SVD. Exact log-singular values inside the trust window.
    RescaledSvd,
    /// Orthonormal-frame sweep accumulating `log R_ii` per layer. Immune to
    /// underflow at any depth, but returns volume-growth proxies whose O(1)
    /// offset from `log s_i` only vanishes after depth normalization.
    QrSweep,
}

/// One ordered log-singular value; `value` may be `-inf` when the index is
/// past the structural rank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSingularValue {
    pub value: f64,
    pub trusted: bool,
}

/// Ordered log-spectrum of one product trajectory at a fixed depth.
#[derive(Debug, Clone)]
pub struct SpectrumSample {
    pub depth: usize,
    pub log_s: Vec<LogSingularValue>,
    pub scale_accumulator: f64,
}

/// Log-singular values of a depth-`L` product of layers drawn from `e`,
/// top `k` indices.
pub fn product_log_spectrum(
    e: &LayerEnsemble,
    depth: usize,
    k: usize,
    method: SpectrumMethod,
    stream: RngStream,
) -> Result<SpectrumSample, SpectrumError> {
    assert!(depth >= 1, "depth must be at least 1");
    assert!(k >= 1 && k <= e.n, "index count must satisfy 1 <= k <= n");
    match method {
        SpectrumMethod::RescaledSvd => rescaled_svd_spectrum(e, depth, k, stream),
        SpectrumMethod::QrSweep => qr_sweep_spectrum(e, depth, k, stream),
    }
}

fn rescaled_svd_spectrum(
    e: &LayerEnsemble,
    depth: usize,
    k: usize,
    stream: RngStream,
) -> Result<SpectrumSample, SpectrumError> {
    let mut rng = stream.rng();
    let mut product = Matrix::identity(e.n);
    let mut acc = 0.0f64;
    for _ in 0..depth {
        let (_, layer) = layer_with(e, &mut rng)?;
        product = layer.matmul(&product);
        let norm = product.frobenius_norm();
        if norm == 0.0 {
            let log_s = vec![
                LogSingularValue {
                    value: f64::NEG_INFINITY,
                    trusted: true
                };
                k
            ];
            return Ok(SpectrumSample {
                depth,
                log_s,
                scale_accumulator: acc,
            });
        }
        product = product.scale(1.0 / norm);
        acc += norm.ln();
    }
    let factors = svd(&product)?;
    let top = factors.s[0].max(f64::MIN_POSITIVE).ln();
    let log_s = factors.s[..k]
        .iter()
        .map(|&s| {
            if s == 0.0 {
                LogSingularValue {
                    value: f64::NEG_INFINITY,
                    trusted: true,
                }
            } else {
                let value = s.ln() + acc;
                LogSingularValue {
                    value,
                    trusted: top - s.ln() < SVD_TRUST_WINDOW,
                }
            }
        })
        .collect();
    Ok(SpectrumSample {
        depth,
        log_s,
        scale_accumulator: acc,
    })
}

fn qr_sweep_spectrum(
    e: &LayerEnsemble,
    depth: usize,
    k: usize,
    stream: RngStream,
) -> Result<SpectrumSample, SpectrumError> {
    let mut rng = stream.rng();
    let n = e.n;
    let mut frame = Matrix::from_fn(n, k, |i, j| if i == j { 1.0 } else { 0.0 });
    let mut live = k;
    let mut acc = vec![0.0f64; k];
    let mut dead = vec![false; k];
    for _ in 0..depth {
        let (_, layer) = layer_with(e, &mut rng)?;
        if live == 0 {
            break;
        }
        let mut z = layer.matmul(&frame);
        // Gate collapse shows up as rank deficiency: kill the trailing
        // frame columns and keep sweeping the leading ones.
        loop {
            match qr_positive(&z) {
                Ok((q, r)) => {
                    for i in 0..live {
                        acc[i] += r[(i, i)].ln();
                    }
                    frame = q;
                    break;
                }
                Err(LinalgError::RankDeficient { index, .. }) => {
                    for slot in dead.iter_mut().take(live).skip(index) {
                        *slot = true;
                    }
                    live = index;
                    if live == 0 {
                        break;
                    }
                    z = Matrix::from_fn(n, live, |i, j| z[(i, j)]);
                }
                Err(other) => return Err(other.into()),
            }
        }
    }
    let mut values: Vec<f64> = (0..k)
        .map(|i| if dead[i] { f64::NEG_INFINITY } else { acc[i] })
        .collect();
    // Volume-growth proxies are not intrinsically ordered at finite depth;
    // report the sorted spectrum estimate.
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let log_s = values
        .into_iter()
        .map(|value| LogSingularValue {
            value,
            trusted: true,
        })
        .collect();
    Ok(SpectrumSample {
        depth,
        log_s,
        scale_accumulator: 0.0,
    })
}

/// Per-index Monte Carlo estimate of `(1/L) log s_{i,L}`.
#[derive(Debug, Clone, Copy)]
pub struct ExponentEstimate {
    pub depth: usize,
    /// 1-based singular index.
    pub index: usize,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    /// False when any trial put this index at the SVD floor.
    pub trusted: bool,
}

/// Mean and standard error of `(1/L) log s_{i,L}` over independent trials,
/// rescaled-SVD method; trial `t` uses the derived stream `t`.
pub fn empirical_exponents(
    e: &LayerEnsemble,
    depth: usize,
    k: usize,
    trials: usize,
    stream: RngStream,
) -> Result<Vec<ExponentEstimate>, SpectrumError> {
    assert!(trials >= 2, "need at least two trials for a standard error");
    let samples: Result<Vec<SpectrumSample>, SpectrumError> = (0..trials)
        .into_par_iter()
        .map(|t| {
            product_log_spectrum(
                e,
                depth,
                k,
                SpectrumMethod::RescaledSvd,
                stream.child(t as u64),
            )
        })
        .collect();
    let samples = samples?;
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let finite: Vec<f64> = samples
            .iter()
            .filter(|s| s.log_s[i].value.is_finite())
            .map(|s| s.log_s[i].value / depth as f64)
            .collect();
        let trusted = samples
            .iter()
            .all(|s| s.log_s[i].trusted && s.log_s[i].value.is_finite());
        let (mean, stderr) = if finite.is_empty() {
            (f64::NEG_INFINITY, 0.0)
        } else {
            mean_stderr(&finite)
        };
        out.push(ExponentEstimate {
            depth,
            index: i + 1,
            mean,
            stderr,
            trials,
            trusted,
        });
    }
    Ok(out)
}

/// `log(s_{i+1,L} / s_{i,L})` along a single trajectory for
/// `L = 1..=l_max`. The least-squares slope of the finite entries
/// approximates `gamma_{i+1} - gamma_i`.
pub fn separation_trajectory(
    e: &LayerEnsemble,
    l_max: usize,
    i: usize,
    stream: RngStream,
) -> Result<Vec<(usize, f64)>, SpectrumError> {
    assert!(
        i >= 1 && i < e.r,
        "separation index must satisfy 1 <= i < r"
    );
    let mut rng = stream.rng();
    let mut product = Matrix::identity(e.n);
    let mut out = Vec::with_capacity(l_max);
    for depth in 1..=l_max {
        let (_, layer) = layer_with(e, &mut rng)?;
        product = layer.matmul(&product);
        let norm = product.frobenius_norm();
        if norm > 0.0 {
            product = product.scale(1.0 / norm);
        }
        let factors = svd(&product)?;
        // The rescaling cancels in the ratio.
        let hi = factors.s[i - 1];
        let lo = factors.s[i];
        let ratio = if lo == 0.0 || hi == 0.0 {
            f64::NEG_INFINITY
        } else {
            (lo / hi).ln()
        };
        out.push((depth, ratio));
    }
    Ok(out)
}
