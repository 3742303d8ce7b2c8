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
    pub depth: usize,
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
        depth: Some(full.depth.to_string()),
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
    let depth = match &args.depth {
        Some(s) => parse_depth_list(s)?[0],
        None => 20,
    };
    let k_max = args.k_max.unwrap_or(64.min(n));
    Ok(Config {
        n,
        depth,
        p: args.p.unwrap_or(1.0),
        r: args.r.unwrap_or(1),
        sigma: parse_sigma(args.sigma.as_deref().unwrap_or("auto"), n)?,
        k_max,
        trials: args.trials.unwrap_or(if args.paper { 30 } else { 8 }),
        d_trials: file
            .d_trials
            .unwrap_or(if args.paper { 10_000 } else { 2_000 }),
        seed: args.seed.unwrap_or(0),
        out: args
            .out
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "runs/spectrum".into()),
    })
}

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let started = std::time::Instant::now();
    let ensemble = LayerEnsemble::new(cfg.n, cfg.r, cfg.p, cfg.sigma)?;
    if cfg.k_max == 0 || cfg.k_max > cfg.n {
        return Err(CliError::Config(format!("k_max must lie in 1..={}", cfg.n)));
    }
    let base = RngStream::stream(cfg.seed, 0);
    let profile = d_profile_mc(cfg.k_max.min(cfg.n - 1), cfg.n, cfg.d_trials, base.child(1));
    let estimates =
        empirical_exponents(&ensemble, cfg.depth, cfg.k_max, cfg.trials, base.child(2))?;

    let mut table = ResultTable::new(vec![
        "k",
        "empirical_mean",
        "stderr",
        "gamma_theory",
        "corrected_theory",
        "untrusted",
    ]);
    for est in &estimates {
        let gamma = super::gamma_for_index(cfg.n, cfg.r, cfg.p, cfg.sigma, est.index)?;
        let (diff, _) = profile.diff[(est.index - 1).min(profile.diff.len() - 1)];
        let corrected = gamma - diff / cfg.depth as f64;
        table.push(vec![
            Cell::from(est.index),
            Cell::from(est.mean),
            Cell::from(est.stderr),
            Cell::from(gamma),
            Cell::from(corrected),
            Cell::from(!est.trusted),
        ]);
    }
    let output = RunOutput {
        out_dir: std::path::Path::new(&cfg.out),
        subcommand: "spectrum",
        seed: cfg.seed,
        started,
    };
    output.write_table("spectrum", &table)?;
    output.write_config_and_meta(&cfg)?;
    Ok(())
}
