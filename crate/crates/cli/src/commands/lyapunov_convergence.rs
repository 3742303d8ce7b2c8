use serde::{Deserialize, Serialize};

use gated_spectra_core::ensembles::LayerEnsemble;
use gated_spectra_core::lyapunov::{d_profile_mc, empirical_exponents};
use gated_spectra_core::rng::RngStream;

use crate::config::{load_file_config_with, parse_depth_list, parse_sigma, CommonArgs, FileConfig};
use crate::table::{Cell, ResultTable, RunOutput};
use crate::CliError;

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct Config {
    pub n: usize,
    pub depths: Vec<usize>,
    pub p: f64,
    pub r: usize,
    pub sigma: f64,
    pub k_max: usize,
    pub trials: usize,
    pub d_trials: usize,
    pub seed: u64,
    pub out: String,
}

pub fn resolve(args: &CommonArgs) -> Result<Config, CliError> {
    let file = load_file_config_with(&args.config, |full: Config| FileConfig {
        n: Some(full.n),
        depth: Some(
            full.depths
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(","),
        ),
        p: Some(full.p),
        r: Some(full.r),
        sigma: Some(full.sigma.to_string()),
        k_max: Some(full.k_max),
        trials: Some(full.trials),
        d_trials: Some(full.d_trials),
        seed: Some(full.seed),
        out: Some(full.out),
        ..FileConfig::default()
    })?;
    let args = args.with_file(&file);
    let n = args.n.unwrap_or(128);
    let depths = match &args.depth {
        Some(s) => parse_depth_list(s)?,
        None => vec![5, 10, 20, 50, 100],
    };
    Ok(Config {
        n,
        depths,
        p: args.p.unwrap_or(1.0),
        r: args.r.unwrap_or(1),
        sigma: parse_sigma(args.sigma.as_deref().unwrap_or("auto"), n)?,
        k_max: args.k_max.unwrap_or(1),
        trials: args.trials.unwrap_or(if args.paper { 50 } else { 8 }),
        d_trials: file
            .d_trials
            .unwrap_or(if args.paper { 10_000 } else { 2_000 }),
        seed: args.seed.unwrap_or(0),
        out: args
            .out
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "runs/lyapunov-convergence".into()),
    })
}

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let started = std::time::Instant::now();
    let ensemble = LayerEnsemble::new(cfg.n, cfg.r, cfg.p, cfg.sigma)?;
    if cfg.trials < 2 {
        return Err(CliError::Config("need at least two trials".into()));
    }
    if cfg.k_max == 0 || cfg.k_max > cfg.n {
        return Err(CliError::Config(format!("k_max must lie in 1..={}", cfg.n)));
    }
    let base = RngStream::stream(cfg.seed, 0);
    let profile = d_profile_mc(cfg.k_max.min(cfg.n - 1), cfg.n, cfg.d_trials, base.child(1));

    let mut table = ResultTable::new(vec![
        "L",
        "i",
        "empirical_mean",
        "empirical_stderr",
        "gamma_theory",
        "corrected_theory",
        "d_stderr",
    ]);
    for (grid_idx, &depth) in cfg.depths.iter().enumerate() {
        let estimates = empirical_exponents(
            &ensemble,
            depth,
            cfg.k_max,
            cfg.trials,
            base.child(1000 + grid_idx as u64),
        )?;
        for est in &estimates {
            let gamma = super::gamma_for_index(cfg.n, cfg.r, cfg.p, cfg.sigma, est.index)?;
            // Correction (d_i - d_{i-1})/L; the profile stores d_{i-1} - d_i.
            let (diff, diff_se) = profile.diff[est.index - 1];
            let corrected = gamma - diff / depth as f64;
            table.push(vec![
                Cell::from(depth),
                Cell::from(est.index),
                Cell::from(est.mean),
                Cell::from(est.stderr),
                Cell::from(gamma),
                Cell::from(corrected),
                Cell::from(diff_se),
            ]);
        }
    }
    let output = RunOutput {
        out_dir: std::path::Path::new(&cfg.out),
        subcommand: "lyapunov-convergence",
        seed: cfg.seed,
        started,
    };
    output.write_table("lyapunov-convergence", &table)?;
    output.write_config_and_meta(&cfg)?;
    Ok(())
}
