use serde::{Deserialize, Serialize};

use gated_spectra_core::linalg::digamma;
use gated_spectra_core::lyapunov::d_profile_mc;
use gated_spectra_core::rng::RngStream;

use crate::config::{load_file_config_with, CommonArgs, FileConfig};
use crate::table::{Cell, ResultTable, RunOutput};
use crate::CliError;

#[derive(clap::Args, Clone, Debug)]
pub struct Args {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Largest corner size to estimate.
    #[arg(long = "i-max")]
    pub i_max: Option<usize>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct Config {
    pub n: usize,
    pub i_max: usize,
    pub trials: usize,
    pub seed: u64,
    pub out: String,
}

pub fn resolve(args: &Args) -> Result<Config, CliError> {
    let file = load_file_config_with(&args.common.config, |full: Config| FileConfig {
        n: Some(full.n),
        i_max: Some(full.i_max),
        trials: Some(full.trials),
        seed: Some(full.seed),
        out: Some(full.out),
        ..FileConfig::default()
    })?;
    let common = args.common.with_file(&file);
    let n = common.n.unwrap_or(16);
    let i_max = args.i_max.or(file.i_max).unwrap_or(8.min(n - 1));
    if i_max >= n {
        return Err(CliError::Config(format!("i_max must be below n = {n}")));
    }
    Ok(Config {
        n,
        i_max,
        trials: common
            .trials
            .unwrap_or(if common.paper { 10_000 } else { 2_000 }),
        seed: common.seed.unwrap_or(0),
        out: common
            .out
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "runs/d-coefficients".into()),
    })
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let started = std::time::Instant::now();
    let profile = d_profile_mc(cfg.i_max, cfg.n, cfg.trials, RngStream::stream(cfg.seed, 0));
    let mut table = ResultTable::new(vec!["i", "estimate", "stderr", "closed_form"]);
    for (i, &(est, se)) in profile.d.iter().enumerate() {
        // The i = 1 corner has the Beta-moment closed form
        // d_1 = (psi(n/2) - psi(1/2)) / 2; it cross-checks the sampler.
        let closed = if i == 1 {
            Cell::from((digamma(cfg.n as f64 / 2.0)? - digamma(0.5)?) / 2.0)
        } else if i == 0 {
            Cell::from(0.0)
        } else {
            Cell::Empty
        };
        table.push(vec![Cell::from(i), Cell::from(est), Cell::from(se), closed]);
    }
    let output = RunOutput {
        out_dir: std::path::Path::new(&cfg.out),
        subcommand: "d-coefficients",
        seed: cfg.seed,
        started,
    };
    output.write_table("d-coefficients", &table)?;
    output.write_config_and_meta(&cfg)?;
    Ok(())
}
