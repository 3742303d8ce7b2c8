//! Seeded sampling of the random matrix models: Ginibre weights, Bernoulli
//! gates, rank-conditioned gates, composite layers, Haar orthogonal matrices.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::EnsembleError;
use crate::linalg::{qr_positive, Matrix};
use crate::rng::RngStream;

/// Attempt cap for the rank-conditioned rejection sampler.
pub const RP_GATE_ATTEMPT_CAP: usize = 1_000_000;

/// Sampling model for a gated layer: width `n`, conditioning rank `r`, gate
/// probability `p`, weight standard deviation `sigma`. `p = 1` is the
/// ungated limit where every gate is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerEnsemble {
    pub n: usize,
    pub r: usize,
    pub p: f64,
    pub sigma: f64,
}

impl LayerEnsemble {
    pub fn new(n: usize, r: usize, p: f64, sigma: f64) -> Result<Self, EnsembleError> {
        if n == 0 {
            return Err(EnsembleError::InvalidParameter(
                "width n must be at least 1".into(),
            ));
        }
        if r == 0 || r > n {
            return Err(EnsembleError::InvalidParameter(format!(
                "conditioning rank must satisfy 1 <= r <= n, got r={r}, n={n}"
            )));
        }
        if !(0.0 < p && p <= 1.0) {
            return Err(EnsembleError::InvalidParameter(format!(
                "gate probability must lie in (0, 1], got {p}"
            )));
        }
        if sigma <= 0.0 || sigma.is_nan() || !sigma.is_finite() {
            return Err(EnsembleError::InvalidParameter(format!(
                "weight standard deviation must be positive, got {sigma}"
            )));
        }
        Ok(Self { n, r, p, sigma })
    }
}

/// Diagonal 0/1 gate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    diag: Vec<bool>,
    rank: usize,
}

impl Gate {
    pub fn from_bits(diag: Vec<bool>) -> Self {
        let rank = diag.iter().filter(|&&b| b).count();
        Self { diag, rank }
    }

    pub fn all_ones(n: usize) -> Self {
        Self {
            diag: vec![true; n],
            rank: n,
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn bits(&self) -> &[bool] {
        &self.diag
    }

    pub fn is_on(&self, i: usize) -> bool {
        self.diag[i]
    }

    /// Indices of the active diagonal entries.
    pub fn support(&self) -> Vec<usize> {
        (0..self.diag.len()).filter(|&i| self.diag[i]).collect()
    }

    pub fn matrix(&self) -> Matrix {
        Matrix::from_fn(self.dim(), self.dim(), |i, j| {
            if i == j && self.diag[i] {
                1.0
            } else {
                0.0
            }
        })
    }

    /// `diag(gate) * m`: zeroes the masked rows.
    pub fn apply_left(&self, m: &Matrix) -> Matrix {
        assert_eq!(self.dim(), m.rows());
        Matrix::from_fn(m.rows(), m.cols(), |i, j| {
            if self.diag[i] {
                m[(i, j)]
            } else {
                0.0
            }
        })
    }

    /// `m * diag(gate)`: zeroes the masked columns.
    pub fn apply_right(&self, m: &Matrix) -> Matrix {
        assert_eq!(self.dim(), m.cols());
        Matrix::from_fn(m.rows(), m.cols(), |i, j| {
            if self.diag[j] {
                m[(i, j)]
            } else {
                0.0
            }
        })
    }
}

/// `n x n` matrix of i.i.d. `N(0, sigma^2)` entries.
pub fn sample_ginibre(n: usize, sigma: f64, stream: RngStream) -> Matrix {
    let mut rng = stream.rng();
    ginibre_with(n, n, sigma, &mut rng)
}

pub(crate) fn ginibre_with(rows: usize, cols: usize, sigma: f64, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        sigma * z
    })
}

/// Diagonal gate with i.i.d. Bernoulli(p) bits; `p = 1` yields the all-ones
/// gate without consuming randomness.
pub fn sample_p_gate(n: usize, p: f64, stream: RngStream) -> Gate {
    let mut rng = stream.rng();
    p_gate_with(n, p, &mut rng)
}

pub(crate) fn p_gate_with(n: usize, p: f64, rng: &mut impl Rng) -> Gate {
    if p >= 1.0 {
        return Gate::all_ones(n);
    }
    Gate::from_bits((0..n).map(|_| rng.random::<f64>() < p).collect())
}

/// `p`-gate conditioned on rank at least `r`, by rejection: sample
/// successive `p`-gates and keep the first with enough ones. Fails with an
/// estimate of the acceptance probability if the cap is exceeded.
pub fn sample_rp_gate(
    n: usize,
    r: usize,
    p: f64,
    stream: RngStream,
) -> Result<Gate, EnsembleError> {
    let mut rng = stream.rng();
    rp_gate_with(n, r, p, &mut rng).map(|(g, _)| g)
}

pub(crate) fn rp_gate_with(
    n: usize,
    r: usize,
    p: f64,
    rng: &mut impl Rng,
) -> Result<(Gate, usize), EnsembleError> {
    assert!(r >= 1 && r <= n, "conditioning rank out of range");
    for attempt in 1..=RP_GATE_ATTEMPT_CAP {
        let g = p_gate_with(n, p, rng);
        if g.rank() >= r {
            return Ok((g, attempt));
        }
    }
    Err(EnsembleError::RejectionCapExceeded {
        cap: RP_GATE_ATTEMPT_CAP,
        acceptance: rank_tail_probability(n, r, p),
    })
}

/// `P(Binomial(n, p) >= r)`, evaluated in log space.
pub fn rank_tail_probability(n: usize, r: usize, p: f64) -> f64 {
    if r == 0 || p >= 1.0 {
        return 1.0;
    }
    let log_terms: Vec<f64> = (r..=n)
        .map(|t| ln_binomial(n, t) + (t as f64) * p.ln() + ((n - t) as f64) * (1.0 - p).ln())
        .collect();
    let m = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return 0.0;
    }
    let sum: f64 = log_terms.iter().map(|&l| (l - m).exp()).sum();
    (m + sum.ln()).exp()
}

pub fn ln_binomial(n: usize, t: usize) -> f64 {
    ln_factorial(n) - ln_factorial(t) - ln_factorial(n - t)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// One `(r, p, sigma)`-layer: the gate and the layer matrix `diag(D) W`.
pub fn sample_layer(e: &LayerEnsemble, stream: RngStream) -> Result<(Gate, Matrix), EnsembleError> {
    let mut rng = stream.rng();
    layer_with(e, &mut rng)
}

pub(crate) fn layer_with(
    e: &LayerEnsemble,
    rng: &mut impl Rng,
) -> Result<(Gate, Matrix), EnsembleError> {
    let (gate, _) = rp_gate_with(e.n, e.r, e.p, rng)?;
    let w = ginibre_with(e.n, e.n, e.sigma, rng);
    let layer = gate.apply_left(&w);
    Ok((gate, layer))
}

/// Haar-distributed orthogonal matrix: QR of a Ginibre sample with the
/// positive-diagonal convention.
pub fn sample_haar_orthogonal(n: usize, stream: RngStream) -> Matrix {
    let mut rng = stream.rng();
    haar_with(n, &mut rng)
}

pub(crate) fn haar_with(n: usize, rng: &mut impl Rng) -> Matrix {
    loop {
        let g = ginibre_with(n, n, 1.0, rng);
        // A Ginibre sample is almost surely full rank; retry on the null event.
        match qr_positive(&g) {
            Ok((q, _)) => return q,
            Err(_) => continue,
        }
    }
}
