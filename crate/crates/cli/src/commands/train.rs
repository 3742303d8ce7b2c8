use serde::{Deserialize, Serialize};

use gated_spectra_core::ensembles::{sample_ginibre, sample_p_gate, sample_rp_gate, Gate};
use gated_spectra_core::fgln::{
    balanced_init, iterative_prediction, train, FglnModel, LossKind, SyntheticTask, TrainConfig,
    TrainFailure, TrainTrace,
};
use gated_spectra_core::rng::RngStream;
use gated_spectra_core::Matrix;

use crate::config::{load_file_config_with, parse_depth_list, parse_sigma, CommonArgs, FileConfig};
use crate::table::{Cell, ResultTable, RunOutput};
use crate::CliError;

#[derive(clap::Args, Clone, Debug)]
pub struct Args {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Gradient-descent step size.
    #[arg(long = "step-size")]
    pub step_size: Option<f64>,
    /// Number of gradient steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Dataset size for the regression loss.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Rank of the synthetic target map.
    #[arg(long = "target-rank")]
    pub target_rank: Option<usize>,
    /// Record cadence.
    #[arg(long = "log-every")]
    pub log_every: Option<usize>,
    /// Weight initialization: "random" or "balanced".
    #[arg(long)]
    pub init: Option<String>,
    /// Proceed even if the step-size stability heuristic fails.
    #[arg(long = "override-stability")]
    pub override_stability: bool,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct Config {
    pub n: usize,
    pub depth: usize,
    pub p: f64,
    pub r: usize,
    pub sigma: f64,
    pub k_max: usize,
    pub step_size: f64,
    pub steps: usize,
    pub samples: usize,
    pub target_rank: usize,
    pub log_every: usize,
    pub init: String,
    pub override_stability: bool,
    pub seed: u64,
    pub out: String,
}

pub fn resolve(args: &Args) -> Result<Config, CliError> {
    let file = load_file_config_with(&args.common.config, |full: Config| FileConfig {
        n: Some(full.n),
        depth: Some(full.depth.to_string()),
        p: Some(full.p),
        r: Some(full.r),
        sigma: Some(full.sigma.to_string()),
        k_max: Some(full.k_max),
        step_size: Some(full.step_size),
        steps: Some(full.steps),
        samples: Some(full.samples),
        target_rank: Some(full.target_rank),
        log_every: Some(full.log_every),
        init: Some(full.init),
        override_stability: Some(full.override_stability),
        seed: Some(full.seed),
        out: Some(full.out),
        ..FileConfig::default()
    })?;
    let common = args.common.with_file(&file);
    let n = common.n.unwrap_or(64);
    let depth = match &common.depth {
        Some(s) => parse_depth_list(s)?[0],
        None => 10,
    };
    let init = args
        .init
        .clone()
        .or_else(|| file.init.clone())
        .unwrap_or_else(|| "random".into());
    if init != "random" && init != "balanced" {
        return Err(CliError::Config(format!("unknown init mode: {init}")));
    }
    Ok(Config {
        n,
        depth,
        p: common.p.unwrap_or(0.5),
        r: common.r.unwrap_or(1),
        sigma: parse_sigma(common.sigma.as_deref().unwrap_or("auto"), n)?,
        k_max: common.k_max.unwrap_or(12.min(n)),
        step_size: args.step_size.or(file.step_size).unwrap_or(1e-2),
        steps: args
            .steps
            .or(file.steps)
            .unwrap_or(if common.paper { 4000 } else { 300 }),
        samples: args.samples.or(file.samples).unwrap_or(1000),
        target_rank: args.target_rank.or(file.target_rank).unwrap_or(10),
        log_every: args.log_every.or(file.log_every).unwrap_or(10),
        init,
        override_stability: args.override_stability || file.override_stability.unwrap_or(false),
        seed: common.seed.unwrap_or(0),
        out: common
            .out
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "runs/train".into()),
    })
}

/// Builds the network at initialization according to the config.
pub fn build_model(cfg: &Config) -> Result<FglnModel, CliError> {
    let base = RngStream::stream(cfg.seed, 0);
    let gates: Vec<Gate> = (0..cfg.depth.saturating_sub(1))
        .map(|l| {
            if cfg.r > 1 {
                sample_rp_gate(cfg.n, cfg.r, cfg.p, base.child(200 + l as u64))
            } else {
                Ok(sample_p_gate(cfg.n, cfg.p, base.child(200 + l as u64)))
            }
        })
        .collect::<Result<_, _>>()?;
    if cfg.init == "balanced" {
        let min_rank = gates.iter().map(Gate::rank).min().unwrap_or(cfg.n);
        let modes = cfg.k_max.min(min_rank).max(1);
        let spectrum: Vec<f64> = (0..modes).map(|i| 1.5f64.powi(-(i as i32))).collect();
        return Ok(balanced_init(&gates, &spectrum, base.child(300))?);
    }
    let weights: Vec<Matrix> = (0..cfg.depth)
        .map(|l| sample_ginibre(cfg.n, cfg.sigma, base.child(100 + l as u64)))
        .collect();
    Ok(FglnModel::new(weights, gates)?)
}

pub fn build_task(cfg: &Config) -> SyntheticTask {
    SyntheticTask::rank_k_regression(
        cfg.n,
        cfg.target_rank,
        cfg.samples,
        RngStream::stream(cfg.seed, 0).child(1),
    )
}

pub fn run_training(cfg: &Config) -> Result<(FglnModel, TrainTrace), CliError> {
    let mut model = build_model(cfg)?;
    let task = build_task(cfg);
    let mut tc = TrainConfig::new(
        cfg.step_size,
        cfg.steps,
        if cfg.samples > 0 {
            LossKind::SquaredOnDataset
        } else {
            LossKind::SquaredToTarget
        },
    );
    tc.log_every = cfg.log_every;
    tc.svd_rank_logged = cfg.k_max;
    tc.override_stability = cfg.override_stability;
    tc.log_depth_scaling = cfg.depth >= 2;
    tc.log_alignment = cfg.depth >= 3;
    let trace = train(&mut model, &task, &tc).map_err(|e| match e {
        TrainFailure::Invalid(err) => CliError::from(err),
        TrainFailure::Diverged(d) => CliError::Divergence(d.to_string()),
    })?;
    Ok((model, trace))
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let started = std::time::Instant::now();
    let (_, trace) = run_training(&cfg)?;
    let k = cfg.k_max.min(cfg.n);

    let mut columns: Vec<&'static str> = vec!["t", "loss", "balancing_drift", "epsilon_alignment"];
    let names: Vec<String> = (1..=k)
        .map(|i| format!("s_{i}"))
        .chain((1..=k).map(|i| format!("predicted_sdot_{i}")))
        .chain((1..=k).map(|i| format!("fd_sdot_{i}")))
        .collect();
    let leaked: Vec<&'static str> = names
        .into_iter()
        .map(|s| Box::leak(s.into_boxed_str()) as &'static str)
        .collect();
    columns.extend(leaked.iter().copied());
    let mut table = ResultTable::new(columns);

    let eta = cfg.step_size;
    for rec in &trace.records {
        let mut row = vec![
            Cell::from(rec.step),
            Cell::from(rec.loss),
            Cell::from(rec.balancing_drift),
            rec.alignment_epsilon.map(Cell::from).unwrap_or(Cell::Empty),
        ];
        for i in 0..k {
            row.push(Cell::from(rec.singular_values[i]));
        }
        for i in 0..k {
            if rec.prediction_simple[i] {
                row.push(Cell::from(rec.predicted_sdot[i]));
            } else {
                // Near-degenerate singular value: prediction flagged out.
                row.push(Cell::Empty);
            }
        }
        for i in 0..k {
            // Forward finite difference of the singular value over one step.
            let fd = if rec.step + 1 < trace.per_step.singular_values.len() {
                Cell::from(
                    (trace.per_step.singular_values[rec.step + 1][i]
                        - trace.per_step.singular_values[rec.step][i])
                        / eta,
                )
            } else {
                Cell::Empty
            };
            row.push(fd);
        }
        table.push(row);
    }

    // The top singular value against the fitted iterative recursion.
    let s1: Vec<f64> = trace
        .per_step
        .singular_values
        .iter()
        .map(|v| v[0])
        .collect();
    let g1: Vec<f64> = trace.per_step.gains.iter().map(|v| v[0]).collect();
    let prediction = iterative_prediction(&s1, &g1, cfg.depth)?;
    let mut pred_table =
        ResultTable::new(vec!["t", "observed_s1", "predicted_s1", "fitted_c", "rmse"]);
    for (t, (obs, pred)) in s1.iter().zip(&prediction.predicted).enumerate() {
        pred_table.push(vec![
            Cell::from(t),
            Cell::from(*obs),
            Cell::from(*pred),
            Cell::from(prediction.c),
            Cell::from(prediction.rmse),
        ]);
    }

    let output = RunOutput {
        out_dir: std::path::Path::new(&cfg.out),
        subcommand: "train",
        seed: cfg.seed,
        started,
    };
    output.write_table("train", &table)?;
    output.write_table("train-prediction", &pred_table)?;
    output.write_config_and_meta(&cfg)?;
    if trace.divergence_warning {
        eprintln!("warning: loss failed to decrease over a 50-step window");
    }
    Ok(())
}
