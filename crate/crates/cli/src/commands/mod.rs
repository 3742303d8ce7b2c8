pub mod alignment;
pub mod d_coefficients;
pub mod depth_scaling;
pub mod lyapunov_convergence;
pub mod spectrum;
pub mod train;

use gated_spectra_core::ensembles::LayerEnsemble;
use gated_spectra_core::lyapunov::gamma_theory;

use crate::CliError;

/// Theory exponent for index `i` when the sampling conditioning rank may be
/// below `i`: the comparison value is the `(max(r, i), p)`-conditioned
/// closed form, which for `i << n p` is indistinguishable from the
/// unconditioned law the samples follow.
pub fn gamma_for_index(n: usize, r: usize, p: f64, sigma: f64, i: usize) -> Result<f64, CliError> {
    let e = LayerEnsemble::new(n, r.max(i), p, sigma)?;
    Ok(gamma_theory(&e, i)?)
}
