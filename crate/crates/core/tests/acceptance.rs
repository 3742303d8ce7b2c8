//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line (run with `--nocapture` to see the lines for passing
//! criteria too). Tolerances are pinned here, not calibrated elsewhere.

use gated_spectra_core::alignment::{
    diagonal_correlation, product_alignment_report, synthetic_alignment_sweep,
};
use gated_spectra_core::ensembles::{
    sample_ginibre, sample_p_gate, sample_rp_gate, Gate, LayerEnsemble,
};
use gated_spectra_core::fgln::{
    balanced_init, iterative_prediction, predicted_sdot_balanced, train, FglnModel, LossKind,
    SyntheticTask, TrainConfig,
};
use gated_spectra_core::linalg::{digamma, svd, wedge, Matrix};
use gated_spectra_core::lyapunov::{
    d_coefficient_mc, d_profile_mc, empirical_exponents, gamma_theory, lambda_theory,
    separation_trajectory,
};
use gated_spectra_core::rng::RngStream;
use gated_spectra_core::stats::{fit_affine, mean_stderr};
use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

fn report(criterion: &str, pass: bool, detail: &str) -> bool {
    println!(
        "acceptance criterion {criterion}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

/// Criterion 1: closed-form consistency. gamma telescopes against lambda to
/// 1e-12 and is strictly decreasing over the full parameter grid.
#[test]
fn criterion_01_closed_form_consistency() {
    let mut worst_telescope = 0.0f64;
    let mut monotone = true;
    for &n in &[8usize, 32, 128] {
        for &p in &[0.25f64, 0.5, 1.0] {
            let r_max = 8.min(((n as f64 * p) / 2.0).floor() as usize).max(1);
            let e = LayerEnsemble::new(n, r_max, p, 1.0 / (n as f64).sqrt()).unwrap();
            let mut prev = f64::INFINITY;
            for i in 1..=r_max {
                let gamma = gamma_theory(&e, i).unwrap();
                let tele =
                    (lambda_theory(&e, i).unwrap() - lambda_theory(&e, i - 1).unwrap() - gamma)
                        .abs();
                worst_telescope = worst_telescope.max(tele);
                if gamma >= prev {
                    monotone = false;
                }
                prev = gamma;
            }
        }
    }
    let pass = worst_telescope <= 1e-12 && monotone;
    assert!(
        report(
            "1 (closed-form consistency)",
            pass,
            &format!("max telescoping residual {worst_telescope:.2e}, strict monotone: {monotone}")
        ),
        "worst telescoping {worst_telescope:e}, monotone {monotone}"
    );
}

/// Criterion 2: Lyapunov convergence. n=64, sigma=1/8, p in {1, 0.5},
/// L=100, 50 trials: the empirical mean of (1/L) log s_1 agrees with the
/// corrected theory within 3 stderr, and the correction improves over the
/// raw exponent at L in {10, 20}.
///
/// The correction enters as +(d_1 - d_0)/L: the sign the subadditivity
/// argument produces and direct simulation confirms (the mean approaches
/// the limit from above for the top index).
#[test]
fn criterion_02_lyapunov_convergence() {
    let n = 64usize;
    let sigma = 1.0 / (n as f64).sqrt();
    let (d1, _) = d_coefficient_mc(1, n, 10_000, RngStream::stream(70, 0));
    let mut pass = true;
    let mut detail = String::new();
    for (pi, &p) in [1.0f64, 0.5].iter().enumerate() {
        let e = LayerEnsemble::new(n, 1, p, sigma).unwrap();
        let gamma1 = gamma_theory(&e, 1).unwrap();
        let corrected = |depth: f64| gamma1 + d1 / depth;
        let at100 =
            empirical_exponents(&e, 100, 1, 50, RngStream::stream(73, pi as u64 * 10)).unwrap();
        let dev = (at100[0].mean - corrected(100.0)).abs();
        let ok_band = dev <= 3.0 * at100[0].stderr;
        pass &= ok_band;
        detail.push_str(&format!(
            "p={p}: dev {dev:.4} vs 3se {:.4}; ",
            3.0 * at100[0].stderr
        ));
        for (di, &depth) in [10usize, 20].iter().enumerate() {
            let est = empirical_exponents(
                &e,
                depth,
                1,
                50,
                RngStream::stream(71 + di as u64, pi as u64 * 10),
            )
            .unwrap();
            let dev_corr = (est[0].mean - corrected(depth as f64)).abs();
            let dev_raw = (est[0].mean - gamma1).abs();
            pass &= dev_corr < dev_raw;
            detail.push_str(&format!(
                "L={depth}: corr {dev_corr:.4} < raw {dev_raw:.4}; "
            ));
        }
    }
    assert!(
        report("2 (Lyapunov convergence)", pass, &detail),
        "{detail}"
    );
}

/// Criterion 3: ordered spectrum at n=128, L=20, p=1, top 16 indices, 30
/// trials, each within 3 stderr of the corrected theory. At this depth the
/// o(1/L) remainder dominates the statistical band for most indices (the
/// equilibration scale exceeds 20 layers), so the criterion fails honestly
/// at those indices; the per-index table is printed for inspection.
#[test]
fn criterion_03_ordered_spectrum() {
    let n = 128usize;
    let depth = 20usize;
    let k_max = 16usize;
    let e = LayerEnsemble::new(n, k_max, 1.0, 1.0 / (n as f64).sqrt()).unwrap();
    let profile = d_profile_mc(k_max, n, 10_000, RngStream::stream(80, 0));
    let estimates = empirical_exponents(&e, depth, k_max, 30, RngStream::stream(81, 0)).unwrap();
    let mut pass = true;
    let mut failing = Vec::new();
    for est in &estimates {
        let gamma = gamma_theory(&e, est.index).unwrap();
        let (diff, diff_se) = profile.diff[est.index - 1];
        let corrected = gamma - diff / depth as f64;
        let tol = 3.0 * (est.stderr.powi(2) + (diff_se / depth as f64).powi(2)).sqrt();
        let dev = (est.mean - corrected).abs();
        println!(
            "  k={:>2}: empirical {:+.5} corrected {corrected:+.5} dev {dev:.5} tol {tol:.5} {}",
            est.index,
            est.mean,
            if dev <= tol { "ok" } else { "off" }
        );
        if dev > tol {
            pass = false;
            failing.push(est.index);
        }
    }
    assert!(
        report(
            "3 (ordered spectrum)",
            pass,
            &format!("indices failing the 3-stderr band at L=20: {failing:?}")
        ),
        "indices outside the band: {failing:?} (finite-depth remainder; see decisions ledger)"
    );
}

/// Criterion 4: spectral separation. Fitted slope of log(s_2/s_1) vs depth
/// within 25% of gamma_2 - gamma_1 (n=32, p=1, depths up to 200, 20-trial
/// average; fit window L in [50, 200] past the mode-equilibration
/// transient).
#[test]
fn criterion_04_spectral_separation() {
    let e = LayerEnsemble::new(32, 4, 1.0, 1.0 / 32f64.sqrt()).unwrap();
    let expected = gamma_theory(&e, 2).unwrap() - gamma_theory(&e, 1).unwrap();
    let slopes: Vec<f64> = (0..20u64)
        .into_par_iter()
        .map(|t| {
            let traj = separation_trajectory(&e, 200, 1, RngStream::stream(1000, t)).unwrap();
            let pts: Vec<(f64, f64)> = traj
                .iter()
                .filter(|&&(l, r)| l >= 50 && r.is_finite())
                .map(|&(l, r)| (l as f64, r))
                .collect();
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            fit_affine(&xs, &ys).0
        })
        .collect();
    let (mean_slope, _) = mean_stderr(&slopes);
    let rel = (mean_slope - expected).abs() / expected.abs();
    let pass = rel < 0.25;
    assert!(
        report(
            "4 (spectral separation)",
            pass,
            &format!("fitted slope {mean_slope:.5} vs theory {expected:.5} (rel dev {rel:.3})")
        ),
        "relative deviation {rel}"
    );
}

/// Criterion 5: d-coefficient oracle. MC d_1 at n=16 within 3 stderr of
/// (psi(8) - psi(1/2))/2, itself pre-verified by an independent
/// Beta(1/2, 15/2) sampling oracle.
#[test]
fn criterion_05_d_coefficient_oracle() {
    let n = 16usize;
    let closed = (digamma(8.0).unwrap() - digamma(0.5).unwrap()) / 2.0;
    // Independent Beta oracle for the closed form itself.
    let beta = rand_distr::Beta::new(0.5, 7.5).unwrap();
    let mut rng = RngStream::stream(90, 0).rng();
    let beta_samples: Vec<f64> = (0..400_000)
        .map(|_| -0.5 * f64::ln(beta.sample(&mut rng)))
        .collect();
    let (bm, bse) = mean_stderr(&beta_samples);
    let beta_ok = (bm - closed).abs() <= 3.0 * bse;
    let (d1, d1se) = d_coefficient_mc(1, n, 10_000, RngStream::stream(90, 1));
    let haar_ok = (d1 - closed).abs() <= 3.0 * d1se;
    let pass = beta_ok && haar_ok;
    assert!(
        report(
            "5 (d-coefficient oracle)",
            pass,
            &format!(
                "closed form {closed:.5}; beta oracle {bm:.5}+-{bse:.5}; haar MC {d1:.5}+-{d1se:.5}"
            )
        ),
        "beta_ok={beta_ok}, haar_ok={haar_ok}"
    );
}

/// Criterion 6: wedge oracle. For 50 random matrices (n <= 6, t <= 3) the
/// sorted singular values of the compound equal the sorted t-fold products
/// of the matrix's singular values within 1e-8 relative, and the compound
/// is multiplicative within 1e-8.
#[test]
fn criterion_06_wedge_oracle() {
    let mut checked = 0usize;
    let mut worst_sv = 0.0f64;
    let mut worst_mult = 0.0f64;
    let mut seed = 0u64;
    'outer: for n in 2..=6usize {
        for t in 1..=3.min(n) {
            loop {
                let m = sample_ginibre(n, 1.0, RngStream::stream(100, seed));
                let b = sample_ginibre(n, 1.0, RngStream::stream(101, seed));
                seed += 1;
                let wm = wedge(&m, t).unwrap();
                let s = svd(&m).unwrap().s;
                let ws = svd(&wm).unwrap().s;
                // All t-fold products of distinct singular values, sorted.
                let tuples = gated_spectra_core::linalg::increasing_tuples(n, t);
                let mut products: Vec<f64> = tuples
                    .iter()
                    .map(|idx| idx.iter().map(|&i| s[i]).product())
                    .collect();
                products.sort_by(|a, b| b.partial_cmp(a).unwrap());
                for (a, b) in ws.iter().zip(&products) {
                    worst_sv = worst_sv.max((a - b).abs() / (1.0 + b.abs()));
                }
                let lhs = wedge(&m.matmul(&b), t).unwrap();
                let rhs = wm.matmul(&wedge(&b, t).unwrap());
                let scale = 1.0 + rhs.max_abs();
                worst_mult = worst_mult.max(lhs.sub(&rhs).max_abs() / scale);
                checked += 1;
                if checked >= 50 {
                    break 'outer;
                }
                if checked.is_multiple_of(5) {
                    break;
                }
            }
        }
    }
    let pass = checked >= 50 && worst_sv < 1e-8 && worst_mult < 1e-8;
    assert!(
        report(
            "6 (wedge oracle)",
            pass,
            &format!(
                "{checked} matrices; worst spectrum mismatch {worst_sv:.2e}, worst multiplicativity {worst_mult:.2e}"
            )
        ),
        "sv {worst_sv:e}, mult {worst_mult:e}"
    );
}

/// Criterion 7: Wishart log-determinant identity at t=6, i=3, sigma=1 over
/// 1e5 samples, within 3 stderr.
#[test]
fn criterion_07_wishart_log_det() {
    let (t, i) = (6usize, 3usize);
    let theory: f64 = (i as f64) * 2f64.ln()
        + (1..=i)
            .map(|k| digamma((t - k + 1) as f64 / 2.0).unwrap())
            .sum::<f64>();
    let vals: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = RngStream::stream(110, trial).rng();
            let x = Matrix::from_fn(t, i, |_, _| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            gated_spectra_core::linalg::log_abs_det(&x.transpose().matmul(&x))
        })
        .collect();
    let (mean, se) = mean_stderr(&vals);
    let pass = (mean - theory).abs() <= 3.0 * se;
    assert!(
        report(
            "7 (Wishart log-det identity)",
            pass,
            &format!("MC {mean:.5}+-{se:.5} vs theory {theory:.5}")
        ),
        "mean {mean}, theory {theory}, se {se}"
    );
}

/// Criterion 8: alignment limit. Synthetic sweep at n=5, r=3: tau=20 gives
/// ||R^{r,r} - I|| < 1e-6, and at tau=4 each observed off-diagonal is
/// within 10% of its first-order prediction.
#[test]
fn criterion_08_alignment_limit() {
    let b = sample_ginibre(5, 1.0, RngStream::new(10));
    let reports = synthetic_alignment_sweep(&b, 3, &[4.0, 20.0]).unwrap();
    let sup20 = reports[1].sup_deviation;
    let mut worst_ratio_dev = 0.0f64;
    for (obs, pred) in reports[0]
        .off_diag_observed
        .iter()
        .zip(&reports[0].off_diag_predicted)
    {
        worst_ratio_dev = worst_ratio_dev.max((obs.2 / pred.2 - 1.0).abs());
    }
    let pass = sup20 < 1e-6 && worst_ratio_dev < 0.10;
    assert!(
        report(
            "8 (alignment limit)",
            pass,
            &format!("sup deviation at tau=20: {sup20:.2e}; worst obs/pred deviation at tau=4: {worst_ratio_dev:.4}")
        ),
        "sup {sup20:e}, ratio dev {worst_ratio_dev}"
    );
}

/// Criterion 9: diagonal correlation exactness and invariance.
#[test]
fn criterion_09_diagonal_correlation() {
    let exact = diagonal_correlation(&Matrix::identity(8)).unwrap() == 1.0
        && diagonal_correlation(&Matrix::from_fn(
            8,
            8,
            |i, j| if i + j == 7 { 1.0 } else { 0.0 },
        ))
        .unwrap()
            == -1.0
        && diagonal_correlation(&Matrix::from_fn(8, 8, |_, _| 1.0)).unwrap() == 0.0;
    let mut invariant = true;
    for trial in 0..100u64 {
        let a = sample_ginibre(7, 1.0, RngStream::stream(120, trial));
        let base = diagonal_correlation(&a).unwrap();
        let scaled = diagonal_correlation(&a.scale(1.7e4)).unwrap();
        let flipped = diagonal_correlation(&Matrix::from_fn(7, 7, |i, j| {
            if (i * 3 + j) % 2 == 0 {
                a[(i, j)]
            } else {
                -a[(i, j)]
            }
        }))
        .unwrap();
        invariant &= (base - scaled).abs() < 1e-12 && (base - flipped).abs() < 1e-12;
    }
    let pass = exact && invariant;
    assert!(
        report(
            "9 (diagonal correlation exactness)",
            pass,
            &format!("exact values: {exact}; scale/sign invariance on 100 matrices: {invariant}")
        ),
        "exact {exact}, invariant {invariant}"
    );
}

/// Criterion 10: alignment at initialization (n=128, p=1). Full-matrix
/// diagonal correlations of U_J^T U_A averaged over 20 seeds at
/// (L, l) = (2,1), (10,5), (20,10), against the published reference values
/// 0.26/0.49/0.84 with a +-0.15 band. The quantity as defined here
/// measures ~0.55/0.82/0.92 (no variant of the definition reproduces all
/// three reference values), so the first two points fail and report the
/// measured numbers.
#[test]
fn criterion_10_alignment_at_init() {
    let n = 128usize;
    let sigma = 1.0 / (n as f64).sqrt();
    let targets = [(2usize, 1usize, 0.26f64), (10, 5, 0.49), (20, 10, 0.84)];
    let mut pass = true;
    let mut detail = String::new();
    for &(depth, split, target) in &targets {
        let vals: Vec<f64> = (0..20u64)
            .into_par_iter()
            .map(|seed| {
                let base = RngStream::stream(130 + seed, 0);
                let layers: Vec<Matrix> = (0..depth)
                    .map(|l| sample_ginibre(n, sigma, base.child(l as u64)))
                    .collect();
                product_alignment_report(&layers, split, 10)
                    .unwrap()
                    .diag_corr_uu
            })
            .collect();
        let (mean, _) = mean_stderr(&vals);
        let ok = (mean - target).abs() <= 0.15;
        pass &= ok;
        detail.push_str(&format!(
            "(L={depth},l={split}): {mean:.3} vs {target} {}; ",
            if ok { "ok" } else { "off" }
        ));
    }
    assert!(
        report("10 (alignment at initialization)", pass, &detail),
        "{detail} (irreproducible figure values; see decisions ledger)"
    );
}

fn balanced_test_model(stream: RngStream) -> FglnModel {
    let gates: Vec<Gate> = (0..3)
        .map(|k| sample_rp_gate(16, 10, 0.7, stream.child(900 + k)).unwrap())
        .collect();
    let spectrum: Vec<f64> = (0..8).map(|i: i32| 1.6f64.powi(-i)).collect();
    balanced_init(&gates, &spectrum, stream.child(1)).unwrap()
}

/// Criterion 11: gradients and balanced dynamics. (a) closed-form gradients
/// match finite differences to 1e-5 relative on 20 instances; (b) balanced
/// training at n=16, L=4, eta=1e-4 matches the predicted velocities within
/// 1e-3 relative at step 0 and 1e-2 after 500 steps (k <= 5); (c) the
/// balancing drift halves when eta halves at fixed total training time
/// (within 30%).
#[test]
fn criterion_11_gradients_and_dynamics() {
    // (a) gradient check.
    let mut grad_ok = true;
    let mut worst_grad = 0.0f64;
    for inst in 0..20u64 {
        let stream = RngStream::stream(140, inst);
        let n = 4usize;
        let weights: Vec<Matrix> = (0..3)
            .map(|l| sample_ginibre(n, 0.6, stream.child(l as u64)))
            .collect();
        let gates: Vec<Gate> = (0..2)
            .map(|l| sample_p_gate(n, 0.7, stream.child(100 + l as u64)))
            .collect();
        let model = FglnModel::new(weights, gates).unwrap();
        let target = sample_ginibre(n, 1.0, stream.child(50));
        let grad_j = model.end_to_end().sub(&target);
        let grads = model.grad_weights(&grad_j).unwrap();
        let h = 1e-6;
        let loss = |m: &FglnModel| 0.5 * m.end_to_end().sub(&target).frobenius_norm().powi(2);
        for (l, grad) in grads.iter().enumerate() {
            for i in 0..n {
                for c in 0..n {
                    let mut up = model.clone();
                    up.set_weight_entry(l, i, c, up.weights()[l][(i, c)] + h);
                    let mut dn = model.clone();
                    dn.set_weight_entry(l, i, c, dn.weights()[l][(i, c)] - h);
                    let fd = (loss(&up) - loss(&dn)) / (2.0 * h);
                    let rel = (fd - grad[(i, c)]).abs() / (1.0 + fd.abs());
                    worst_grad = worst_grad.max(rel);
                    grad_ok &= rel < 1e-5;
                }
            }
        }
    }

    // (b) balanced prediction vs finite differences.
    let stream = RngStream::new(42);
    let mut model = balanced_test_model(stream);
    let task = SyntheticTask::map_matching(sample_ginibre(16, 0.3, stream.child(5)));
    let eta = 1e-4;
    let mut cfg = TrainConfig::new(eta, 501, LossKind::SquaredToTarget);
    cfg.log_every = 1;
    cfg.svd_rank_logged = 6;
    let trace = train(&mut model, &task, &cfg).unwrap();
    let rel_at = |step: usize| -> f64 {
        let rec = &trace.records[step];
        let s_now = &trace.per_step.singular_values[step];
        let s_next = &trace.per_step.singular_values[step + 1];
        (0..5)
            .map(|k| {
                let fd = (s_next[k] - s_now[k]) / eta;
                (fd - rec.predicted_sdot[k]).abs() / fd.abs().max(1e-30)
            })
            .fold(0.0f64, f64::max)
    };
    let rel0 = rel_at(0);
    let rel500 = rel_at(500);
    let dyn_ok = rel0 < 1e-3 && rel500 < 1e-2;

    // (c) drift scaling at fixed total time.
    let target = sample_ginibre(16, 0.3, RngStream::new(43).child(5));
    let mut drifts = Vec::new();
    for (eta, steps) in [(1e-3, 1000usize), (5e-4, 2000)] {
        let mut m = balanced_test_model(RngStream::new(43));
        let task = SyntheticTask::map_matching(target.clone());
        let mut c = TrainConfig::new(eta, steps, LossKind::SquaredToTarget);
        c.log_every = steps;
        c.svd_rank_logged = 4;
        let t = train(&mut m, &task, &c).unwrap();
        drifts.push(t.records.last().unwrap().balancing_drift);
    }
    let ratio = drifts[0] / drifts[1];
    let drift_ok = (ratio - 2.0).abs() <= 0.6;

    let pass = grad_ok && dyn_ok && drift_ok;
    assert!(
        report(
            "11 (gradients and dynamics)",
            pass,
            &format!(
                "grad fd worst {worst_grad:.2e}; velocity rel err step0 {rel0:.2e}, step500 {rel500:.2e}; drift ratio {ratio:.3}"
            )
        ),
        "grad {grad_ok}, dynamics {dyn_ok}, drift {drift_ok}"
    );
}

/// Criterion 12: synthetic rank-10 training (L=10, n=64, p=0.5). The
/// s_10/s_11 gap grows monotonically after burn-in (40% of the run) and
/// the iterative prediction for s_1 achieves RMSE below 10% of the
/// trajectory range.
#[test]
fn criterion_12_synthetic_training() {
    let n = 64usize;
    let depth = 10usize;
    let stream = RngStream::new(7);
    let task = SyntheticTask::rank_k_regression(n, 10, 1000, stream.child(1));
    let sigma = 1.0 / (n as f64).sqrt();
    let weights: Vec<Matrix> = (0..depth)
        .map(|l| sample_ginibre(n, sigma, stream.child(100 + l as u64)))
        .collect();
    let gates: Vec<Gate> = (0..depth - 1)
        .map(|l| sample_p_gate(n, 0.5, stream.child(200 + l as u64)))
        .collect();
    let mut model = FglnModel::new(weights, gates).unwrap();
    let steps = 4000usize;
    let mut cfg = TrainConfig::new(2e-2, steps, LossKind::SquaredOnDataset);
    cfg.log_every = 100;
    cfg.svd_rank_logged = 12;
    let trace = train(&mut model, &task, &cfg).unwrap();

    let burn_in = steps * 2 / 5;
    let gaps: Vec<(usize, f64)> = trace
        .records
        .iter()
        .map(|r| (r.step, r.singular_values[9] / r.singular_values[10]))
        .collect();
    let mut monotone = true;
    let mut last = f64::NEG_INFINITY;
    for &(step, gap) in gaps.iter().filter(|&&(s, _)| s >= burn_in) {
        if gap < last {
            monotone = false;
            println!("  gap decreased at step {step}: {gap:.3} < {last:.3}");
        }
        last = gap;
    }
    let final_gap = gaps.last().unwrap().1;

    let s1: Vec<f64> = trace
        .per_step
        .singular_values
        .iter()
        .map(|v| v[0])
        .collect();
    let g1: Vec<f64> = trace.per_step.gains.iter().map(|v| v[0]).collect();
    let prediction = iterative_prediction(&s1, &g1, depth).unwrap();
    let rel_rmse = prediction.rmse / prediction.observed_range;
    let pass = monotone && rel_rmse < 0.10;
    assert!(
        report(
            "12 (synthetic rank-10 training)",
            pass,
            &format!(
                "gap monotone after step {burn_in}: {monotone} (final gap {final_gap:.1}); prediction RMSE/range {rel_rmse:.4} (C = {:.4})",
                prediction.c
            )
        ),
        "monotone {monotone}, rmse/range {rel_rmse}"
    );
}

/// Smoke check used by criterion 11(b): the scalar balanced chain obeys the
/// closed-form velocity to first order in the step size.
#[test]
fn scalar_chain_first_order() {
    let s0 = 0.49f64;
    let y = 1.21f64;
    let w = s0.sqrt();
    let weights = vec![
        Matrix::from_vec(1, 1, vec![w]).unwrap(),
        Matrix::from_vec(1, 1, vec![w]).unwrap(),
    ];
    let model = FglnModel::new(weights, vec![Gate::all_ones(1)]).unwrap();
    let eta = 1e-5;
    let mut m = model.clone();
    let task = SyntheticTask::map_matching(Matrix::from_vec(1, 1, vec![y]).unwrap());
    let mut cfg = TrainConfig::new(eta, 1, LossKind::SquaredToTarget);
    cfg.log_every = 1;
    cfg.svd_rank_logged = 1;
    let trace = train(&mut m, &task, &cfg).unwrap();
    let ds = trace.per_step.singular_values[1][0] - trace.per_step.singular_values[0][0];
    // sdot = -2 s (s - y) for the balanced two-layer scalar chain.
    let expected = -2.0 * s0 * (s0 - y);
    assert!(
        (ds / eta - expected).abs() < 10.0 * eta * expected.abs().max(1.0),
        "one-step velocity {} vs {expected}",
        ds / eta
    );
    let pred = predicted_sdot_balanced(
        &model.end_to_end(),
        &{
            let j = model.end_to_end();
            j.sub(&task.target)
        },
        2,
        1,
    )
    .unwrap();
    assert!((pred.value - expected).abs() < 1e-10);
}
