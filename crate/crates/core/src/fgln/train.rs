use crate::alignment::rotation;
use crate::ensembles::ginibre_with;
use crate::error::DynamicsError;
use crate::fgln::{depth_scaling_fit, sdot_from_factors, DepthScalingFit, FglnModel};
use crate::linalg::{svd, Matrix};
use crate::rng::RngStream;

/// Loss driving the training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `L(J) = 1/2 ||J - T||_F^2`: match the target map directly.
    SquaredToTarget,
    /// `L(J) = 1/(2N) sum_b ||J x_b - T x_b||^2` over the fixed dataset.
    SquaredOnDataset,
}

/// Regression task with a fixed linear target of prescribed rank, no
/// noise. Inputs are standard Gaussian vectors.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub target: Matrix,
    pub rank: usize,
    /// `n x N` input sample matrix; `None` when only the map-matching loss
    /// is used.
    pub inputs: Option<Matrix>,
}

impl SyntheticTask {
    /// Rank-`k` target `T = F G^T / n` with Gaussian factors, plus `samples`
    /// Gaussian inputs.
    pub fn rank_k_regression(n: usize, rank: usize, samples: usize, stream: RngStream) -> Self {
        let mut rng = stream.rng();
        let f = ginibre_with(n, rank, 1.0, &mut rng);
        let g = ginibre_with(n, rank, 1.0, &mut rng);
        let target = f.matmul(&g.transpose()).scale(1.0 / n as f64);
        let inputs = if samples > 0 {
            Some(ginibre_with(n, samples, 1.0, &mut rng))
        } else {
            None
        };
        Self {
            target,
            rank,
            inputs,
        }
    }

    pub fn map_matching(target: Matrix) -> Self {
        let rank = target.rows().min(target.cols());
        Self {
            target,
            rank,
            inputs: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub step_size: f64,
    pub steps: usize,
    pub loss: LossKind,
    /// Detailed records are taken every `log_every` steps (and at the end).
    pub log_every: usize,
    /// Number of leading singular values tracked.
    pub svd_rank_logged: usize,
    /// Proceed even if the stability heuristic `eta * s_1(J_0)^2 < 1` fails.
    pub override_stability: bool,
    /// Compute depth-scaling fits at record steps.
    pub log_depth_scaling: bool,
    /// Compute the alignment epsilon at record steps.
    pub log_alignment: bool,
}

impl TrainConfig {
    pub fn new(step_size: f64, steps: usize, loss: LossKind) -> Self {
        Self {
            step_size,
            steps,
            loss,
            log_every: 10,
            svd_rank_logged: 8,
            override_stability: false,
            log_depth_scaling: false,
            log_alignment: false,
        }
    }
}

/// Full record at logging cadence.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub step: usize,
    pub loss: f64,
    pub singular_values: Vec<f64>,
    /// `g_k = <grad_J, u_k v_k^T>` per tracked index.
    pub gains: Vec<f64>,
    pub balancing_drift: f64,
    /// Balanced-form velocity prediction per tracked index.
    pub predicted_sdot: Vec<f64>,
    /// False where the singular value is near-degenerate.
    pub prediction_simple: Vec<bool>,
    pub depth_scaling: Option<Vec<DepthScalingFit>>,
    /// Max over interior layers of the r x r rotation deviation, measured
    /// on both the left (U vs U_A) and right (V vs V_B) bases.
    pub alignment_epsilon: Option<f64>,
    pub top_left_vector: Vec<f64>,
    pub top_right_vector: Vec<f64>,
}

/// Per-step series kept at every step (needed by the iterative
/// prediction): top singular values, gains, loss.
#[derive(Debug, Clone, Default)]
pub struct StepSeries {
    pub singular_values: Vec<Vec<f64>>,
    pub gains: Vec<Vec<f64>>,
    pub loss: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub depth: usize,
    pub records: Vec<TraceRecord>,
    pub per_step: StepSeries,
    /// Set when the loss failed to decrease over a 50-step window.
    pub divergence_warning: bool,
    /// Set when the stability heuristic failed but was overridden.
    pub stability_warning: bool,
}

/// Training blew up (non-finite weights or loss); carries the trace up to
/// the last good step.
#[derive(Debug, thiserror::Error)]
#[error("training diverged at step {step} (last finite loss {last_loss:e})")]
pub struct TrainDivergence {
    pub step: usize,
    pub last_loss: f64,
    pub partial: TrainTrace,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainFailure {
    #[error(transparent)]
    Invalid(#[from] DynamicsError),
    #[error(transparent)]
    Diverged(#[from] Box<TrainDivergence>),
}

/// Plain gradient descent (explicit Euler on the gradient flow) on the
/// weights. The gates never move.
pub fn train(
    model: &mut FglnModel,
    task: &SyntheticTask,
    cfg: &TrainConfig,
) -> Result<TrainTrace, TrainFailure> {
    let depth = model.depth();
    let k_max = cfg
        .svd_rank_logged
        .min(model.input_dim())
        .min(model.output_dim());
    // Precompute the dataset second moments: grad_J = (J - T) Sigma_x.
    let sigma_x = match (cfg.loss, &task.inputs) {
        (LossKind::SquaredOnDataset, Some(x)) => {
            let n_samples = x.cols() as f64;
            Some(x.matmul(&x.transpose()).scale(1.0 / n_samples))
        }
        (LossKind::SquaredOnDataset, None) => {
            panic!("dataset loss requires a task with inputs")
        }
        (LossKind::SquaredToTarget, _) => None,
    };

    let mut trace = TrainTrace {
        depth,
        records: Vec::new(),
        per_step: StepSeries::default(),
        divergence_warning: false,
        stability_warning: false,
    };

    let j0 = model.end_to_end();
    let s0 = match svd(&j0) {
        Ok(f) => f.s[0],
        Err(_) => f64::INFINITY,
    };
    if cfg.step_size * s0 * s0 >= 1.0 {
        if !cfg.override_stability {
            return Err(DynamicsError::InvalidConfig(format!(
                "step size heuristic violated: eta * s_1(J_0)^2 = {:.3e} >= 1 \
                 (pass the override to proceed anyway)",
                cfg.step_size * s0 * s0
            ))
            .into());
        }
        trace.stability_warning = true;
    }

    let mut prev_u: Option<Matrix> = None;
    let mut prev_v: Option<Matrix> = None;
    let mut loss_window: Vec<f64> = Vec::new();
    let mut last_loss = f64::NAN;

    for step in 0..=cfg.steps {
        let j = model.end_to_end();
        let diff = j.sub(&task.target);
        let grad_j = match &sigma_x {
            Some(sx) => diff.matmul(sx),
            None => diff.clone(),
        };
        let loss = 0.5 * diff.frobenius_inner(&grad_j);
        if !loss.is_finite() || j.max_abs() > 1e100 {
            return Err(Box::new(TrainDivergence {
                step,
                last_loss,
                partial: trace,
            })
            .into());
        }
        last_loss = loss;

        let factors = svd(&j).map_err(|e| TrainFailure::Invalid(e.into()))?;
        let svals: Vec<f64> = factors.s[..k_max].to_vec();
        let gains: Vec<f64> = (0..k_max)
            .map(|k| crate::fgln::dyad_inner(&factors, &grad_j, k))
            .collect();
        trace.per_step.singular_values.push(svals.clone());
        trace.per_step.gains.push(gains.clone());
        trace.per_step.loss.push(loss);

        if loss_window.len() >= 50 && loss > loss_window[loss_window.len() - 50] {
            trace.divergence_warning = true;
        }
        loss_window.push(loss);

        if step % cfg.log_every.max(1) == 0 || step == cfg.steps {
            let mut predicted = Vec::with_capacity(k_max);
            let mut simple = Vec::with_capacity(k_max);
            for k in 1..=k_max {
                let p = sdot_from_factors(&factors, 0.0, &grad_j, depth, k);
                predicted.push(p.value);
                simple.push(p.simple);
            }
            // Keep reported top vectors continuous across records.
            let (u1, v1) = {
                let u = factors.u.clone();
                let v = factors.v.clone();
                let (ua, va) = match (&prev_u, &prev_v) {
                    (Some(pu), Some(pv)) => {
                        // Flip u and v columns together so u_k v_k^T is intact.
                        let flips: Vec<bool> = (0..u.cols())
                            .map(|c| {
                                let dot: f64 = (0..u.rows()).map(|i| u[(i, c)] * pu[(i, c)]).sum();
                                dot < 0.0
                            })
                            .collect();
                        let mut ua = u.clone();
                        let mut va = v.clone();
                        for (c, &flip) in flips.iter().enumerate() {
                            if flip {
                                for i in 0..ua.rows() {
                                    ua[(i, c)] = -ua[(i, c)];
                                }
                                for i in 0..va.rows() {
                                    va[(i, c)] = -va[(i, c)];
                                }
                            }
                        }
                        let _ = pv;
                        (ua, va)
                    }
                    _ => (u, v),
                };
                prev_u = Some(ua.clone());
                prev_v = Some(va.clone());
                (ua.column(0), va.column(0))
            };
            let depth_scaling = if cfg.log_depth_scaling && depth >= 2 {
                depth_scaling_fit(model, k_max).ok()
            } else {
                None
            };
            let alignment_epsilon = if cfg.log_alignment && depth >= 3 {
                alignment_epsilon(model, &factors.u, &factors.v, k_max).ok()
            } else {
                None
            };
            trace.records.push(TraceRecord {
                step,
                loss,
                singular_values: svals,
                gains,
                balancing_drift: model.balancing_drift(),
                predicted_sdot: predicted,
                prediction_simple: simple,
                depth_scaling,
                alignment_epsilon,
                top_left_vector: u1,
                top_right_vector: v1,
            });
        }

        if step == cfg.steps {
            break;
        }
        let grads = model
            .grad_weights(&grad_j)
            .expect("gradient shapes fixed by model");
        for (w, g) in model.weights_mut().iter_mut().zip(&grads) {
            for i in 0..w.rows() {
                let wr = w.row_mut(i);
                let gr = g.row(i);
                for (wv, gv) in wr.iter_mut().zip(gr) {
                    *wv -= cfg.step_size * gv;
                }
            }
        }
    }
    Ok(trace)
}

/// Max over interior split layers of the leading-block rotation deviation,
/// both sides: `||(U_J^T U_{A_l})^{r,r} - I||` and `||(V_J^T V_{B_l})^{r,r} - I||`.
fn alignment_epsilon(
    model: &FglnModel,
    u_j: &Matrix,
    v_j: &Matrix,
    rank: usize,
) -> Result<f64, DynamicsError> {
    let depth = model.depth();
    let mut worst = 0.0f64;
    for l in 2..depth {
        let (a, b) = model.partial_products(l)?;
        let fa = svd(&a)?;
        let fb = svd(&b)?;
        let left =
            rotation(u_j, &fa.u, rank).map_err(|e| DynamicsError::InvalidConfig(e.to_string()))?;
        let right =
            rotation(v_j, &fb.v, rank).map_err(|e| DynamicsError::InvalidConfig(e.to_string()))?;
        worst = worst.max(left.sup_deviation()).max(right.sup_deviation());
    }
    Ok(worst)
}
