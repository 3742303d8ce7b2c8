use serde::{Deserialize, Serialize};

use gated_spectra_core::alignment::{product_alignment_report, synthetic_alignment_sweep};
use gated_spectra_core::ensembles::{sample_ginibre, sample_p_gate, LayerEnsemble};
use gated_spectra_core::rng::RngStream;
use gated_spectra_core::Matrix;

use crate::config::{load_file_config_with, parse_depth_list, parse_sigma, CommonArgs, FileConfig};
use crate::table::{Cell, ResultTable, RunOutput};
use crate::CliError;

const DIAG_BLOCK: usize = 10;

#[derive(clap::Args, Clone, Debug)]
pub struct Args {
    #[command(flatten)]
    pub common: CommonArgs,
    /// "init", "trained", or "synthetic-sweep".
    #[arg(long)]
    pub mode: Option<String>,
    /// Separation scales for the synthetic sweep (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
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
    pub trials: usize,
    pub taus: Vec<f64>,
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
        trials: Some(full.trials),
        taus: Some(full.taus),
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
    if !["init", "trained", "synthetic-sweep"].contains(&mode.as_str()) {
        return Err(CliError::Config(format!("unknown alignment mode: {mode}")));
    }
    let synthetic = mode == "synthetic-sweep";
    let trained = mode == "trained";
    let n = common.n.unwrap_or(if synthetic {
        5
    } else if trained {
        64
    } else {
        128
    });
    let depth = match &common.depth {
        Some(s) => parse_depth_list(s)?[0],
        None if trained => 10,
        None => 20,
    };
    Ok(Config {
        mode,
        n,
        depth,
        p: common.p.unwrap_or(if synthetic { 1.0 } else { 0.5 }),
        r: common.r.unwrap_or(if synthetic { 3 } else { 1 }),
        sigma: parse_sigma(common.sigma.as_deref().unwrap_or("auto"), n)?,
        trials: common.trials.unwrap_or(if common.paper { 20 } else { 3 }),
        taus: args
            .taus
            .clone()
            .or_else(|| file.taus.clone())
            .unwrap_or_else(|| vec![2.0, 3.0, 4.0, 6.0, 8.0, 20.0]),
        step_size: args.step_size.or(file.step_size).unwrap_or(1e-2),
        steps: args
            .steps
            .or(file.steps)
            .unwrap_or(if common.paper { 4000 } else { 300 }),
        seed: common.seed.unwrap_or(0),
        out: common
            .out
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "runs/alignment".into()),
    })
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let started = std::time::Instant::now();
    let output = RunOutput {
        out_dir: std::path::Path::new(&cfg.out),
        subcommand: "alignment",
        seed: cfg.seed,
        started,
    };
    match cfg.mode.as_str() {
        "synthetic-sweep" => {
            let b = sample_ginibre(cfg.n, 1.0, RngStream::stream(cfg.seed, 0));
            let reports = synthetic_alignment_sweep(&b, cfg.r, &cfg.taus)?;
            let mut table = ResultTable::new(vec!["tau", "i", "j", "observed", "predicted"]);
            for rep in &reports {
                for (obs, pred) in rep.off_diag_observed.iter().zip(&rep.off_diag_predicted) {
                    table.push(vec![
                        Cell::from(rep.parameter),
                        Cell::from(obs.0 + 1),
                        Cell::from(obs.1 + 1),
                        Cell::from(obs.2),
                        Cell::from(pred.2),
                    ]);
                }
            }
            output.write_table("alignment", &table)?;
        }
        "init" => {
            let mut table =
                ResultTable::new(vec!["l", "diag_corr_UU", "diag_corr_UAAU", "diag_corr_AA"]);
            let ensemble = LayerEnsemble::new(cfg.n, cfg.r, cfg.p, cfg.sigma)?;
            let _ = ensemble;
            for split in 1..cfg.depth {
                let (mut uu, mut uaau, mut aa) = (0.0, 0.0, 0.0);
                for trial in 0..cfg.trials {
                    let base = RngStream::stream(cfg.seed, trial as u64);
                    let layers: Vec<Matrix> = (0..cfg.depth)
                        .map(|l| {
                            let gate = sample_p_gate(cfg.n, cfg.p, base.child(200 + l as u64));
                            gate.apply_left(&sample_ginibre(
                                cfg.n,
                                cfg.sigma,
                                base.child(100 + l as u64),
                            ))
                        })
                        .collect();
                    let rep = product_alignment_report(&layers, split, DIAG_BLOCK)?;
                    uu += rep.diag_corr_uu;
                    uaau += rep.diag_corr_uaau_block;
                    aa += rep.diag_corr_aa_block;
                }
                let m = cfg.trials as f64;
                table.push(vec![
                    Cell::from(split),
                    Cell::from(uu / m),
                    Cell::from(uaau / m),
                    Cell::from(aa / m),
                ]);
            }
            output.write_table("alignment", &table)?;
        }
        _ => {
            // trained: single run, correlations per split on the trained model.
            let train_cfg = super::train::Config {
                n: cfg.n,
                depth: cfg.depth,
                p: cfg.p,
                r: cfg.r,
                sigma: cfg.sigma,
                k_max: 12.min(cfg.n),
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
            let (model, _) = super::train::run_training(&train_cfg)?;
            let layers = model.masked_layers();
            let mut table =
                ResultTable::new(vec!["l", "diag_corr_UU", "diag_corr_UAAU", "diag_corr_AA"]);
            for split in 1..cfg.depth {
                let rep = product_alignment_report(&layers, split, DIAG_BLOCK)?;
                table.push(vec![
                    Cell::from(split),
                    Cell::from(rep.diag_corr_uu),
                    Cell::from(rep.diag_corr_uaau_block),
                    Cell::from(rep.diag_corr_aa_block),
                ]);
            }
            output.write_table("alignment", &table)?;
        }
    }
    output.write_config_and_meta(&cfg)?;
    Ok(())
}
