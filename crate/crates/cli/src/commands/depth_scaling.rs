use serde::{Deserialize, Serialize};

use gated_spectra_core::ensembles::{sample_ginibre, sample_p_gate, Gate};
use gated_spectra_core::fgln::{depth_scaling_fit, prefix_log_spectra, FglnModel};
use gated_spectra_core::rng::RngStream;
use gated_spectra_core::Matrix;

use crate::config::{load_file_config_with, parse_depth_list, parse_sigma, CommonArgs, FileConfig};
use crate::table::{Cell, ResultTable, RunOutput};
use crate::CliError;

#[derive(clap::Args, Clone, Debug)]
pub struct Args {
    #[command(flatten)]
    pub common: CommonArgs,
    /// "init" (fresh network) or "trained" (after the synthetic regression).
    #[arg(long)]
    pub mode: Option<String>,
    /// Training step size (trained mode).
    #[arg(long = "step-size")]
    pub step_size: Option<f64>,
    /// Training steps (trained mode).
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct Config {
    pub mode: String,
    pub n: usize,
    pub depth: usize,
    pub p: f64,
    pub r: usize,
    pub sigma: f64,
    pub k_max: usize,
    pub step_size: f64,
    pub steps: usize,
    pub seed: u64,
    pub out: String,
}

pub fn resolve(args: &Args) -> Result<Config, CliError> {
    let file = load_file_config_with(&args.common.config, |full: Config| FileConfig {
        mode: Some(full.mode),
        n: Some(full.n),
        depth: Some(full.depth.to_string()),
        p: Some(full.p),
        r: Some(full.r),
        sigma: Some(full.sigma.to_string()),
        k_max: Some(full.k_max),
        step_size: Some(full.step_size),
        steps: Some(full.steps),
        seed: Some(full.seed),
        out: Some(full.out),
        ..FileConfig::default()
    })?;
    let common = args.common.with_file(&file);
    let mode = args
        .mode
        .clone()
        .or_else(|| file.mode.clone())
        .unwrap_or_else(|| "init".into());
    if mode != "init" && mode != "trained" {
        return Err(CliError::Config(format!(
            "unknown depth-scaling mode: {mode}"
        )));
    }
    let trained = mode == "trained";
    let n = common.n.unwrap_or(if trained { 64 } else { 128 });
    let depth = match &common.depth {
        Some(s) => parse_depth_list(s)?[0],
        None if trained => 10,
        None => 100,
    };
    if depth < 2 {
        return Err(CliError::Config("depth scaling needs depth >= 2".into()));
    }
    Ok(Config {
        mode,
        n,
        depth,
        p: common.p.unwrap_or(0.5),
        r: common.r.unwrap_or(1),
        sigma: parse_sigma(common.sigma.as_deref().unwrap_or("auto"), n)?,
        k_max: common.k_max.unwrap_or(30.min(n)),
        step_size: args.step_size.or(file.step_size).unwrap_or(1e-2),
        steps: args
            .steps
            .or(file.steps)
            .unwrap_or(if common.paper { 4000 } else { 300 }),
        seed: common.seed.unwrap_or(0),
        out: common
            .out
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "runs/depth-scaling".into()),
    })
}

fn init_model(cfg: &Config) -> Result<FglnModel, CliError> {
    let base = RngStream::stream(cfg.seed, 0);
    let weights: Vec<Matrix> = (0..cfg.depth)
        .map(|l| sample_ginibre(cfg.n, cfg.sigma, base.child(100 + l as u64)))
        .collect();
    let gates: Vec<Gate> = (0..cfg.depth - 1)
        .map(|l| sample_p_gate(cfg.n, cfg.p, base.child(200 + l as u64)))
        .collect();
    Ok(FglnModel::new(weights, gates)?)
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let started = std::time::Instant::now();
    let model = if cfg.mode == "trained" {
        let train_cfg = super::train::Config {
            n: cfg.n,
            depth: cfg.depth,
            p: cfg.p,
            r: cfg.r,
            sigma: cfg.sigma,
            k_max: cfg.k_max.min(12),
            step_size: cfg.step_size,
            steps: cfg.steps,
            samples: 1000,
            target_rank: 10,
            log_every: cfg.steps.max(1),
            init: "random".into(),
            override_stability: false,
            seed: cfg.seed,
            out: cfg.out.clone(),
        };
        super::train::run_training(&train_cfg)?.0
    } else {
        init_model(&cfg)?
    };

    let spectra = prefix_log_spectra(&model, cfg.k_max)?;
    let mut table = ResultTable::new(vec!["l", "k", "log_s"]);
    for (l, row) in &spectra {
        for (k, v) in row.iter().enumerate() {
            table.push(vec![Cell::from(*l), Cell::from(k + 1), Cell::from(*v)]);
        }
    }
    let fits = depth_scaling_fit(&model, cfg.k_max)?;
    let mut fit_table = ResultTable::new(vec!["k", "gamma", "delta", "residual"]);
    for f in &fits {
        fit_table.push(vec![
            Cell::from(f.index),
            Cell::from(f.gamma),
            Cell::from(f.delta),
            Cell::from(f.max_residual),
        ]);
    }
    let output = RunOutput {
        out_dir: std::path::Path::new(&cfg.out),
        subcommand: "depth-scaling",
        seed: cfg.seed,
        started,
    };
    output.write_table("depth-scaling", &table)?;
    output.write_table("depth-scaling-fit", &fit_table)?;
    output.write_config_and_meta(&cfg)?;
    Ok(())
}
