//! Resolved experiment configurations. Resolution order: built-in defaults
//! (scaled for sub-minute smoke runs, full scale behind `--paper`), then
//! the optional `--config FILE` JSON, then explicit command-line flags.
//! The resolved struct is written next to the outputs, so a run is
//! reconstructible from its output directory alone.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(clap::Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Matrix width.
    #[arg(long)]
    pub n: Option<usize>,
    /// Depth, or comma-separated list of depths where a grid applies.
    #[arg(long)]
    pub depth: Option<String>,
    /// Gate probability in (0, 1].
    #[arg(long)]
    pub p: Option<f64>,
    /// Gate conditioning rank.
    #[arg(long)]
    pub r: Option<usize>,
    /// Weight standard deviation, or "auto" for 1/sqrt(n).
    #[arg(long)]
    pub sigma: Option<String>,
    /// Number of leading singular indices.
    #[arg(long = "k-max")]
    pub k_max: Option<usize>,
    /// Monte Carlo trial count.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Master seed; everything derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full-scale trial counts instead of the sub-minute smoke defaults.
    #[arg(long)]
    pub paper: bool,
}

pub fn parse_depth_list(s: &str) -> Result<Vec<usize>, CliError> {
    let list: Result<Vec<usize>, _> = s.split(',').map(|x| x.trim().parse::<usize>()).collect();
    match list {
        Ok(v) if !v.is_empty() && v.iter().all(|&d| d >= 1) => Ok(v),
        _ => Err(CliError::Config(format!("invalid depth list: {s}"))),
    }
}

pub fn parse_sigma(s: &str, n: usize) -> Result<f64, CliError> {
    if s == "auto" {
        return Ok(1.0 / (n as f64).sqrt());
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| *v > 0.0 && v.is_finite())
        .ok_or_else(|| {
            CliError::Config(format!(
                "invalid sigma: {s} (expected a positive float or \"auto\")"
            ))
        })
}

/// Reads the optional `--config` file. Both forms are accepted: the partial
/// experiment file (any subset of the common fields), and the fully
/// resolved `config.json` a previous run wrote (mapped back through
/// `to_partial`), so a run is reconstructible from its output directory.
pub fn load_file_config_with<T, F>(
    path: &Option<PathBuf>,
    to_partial: F,
) -> Result<FileConfig, CliError>
where
    T: for<'de> Deserialize<'de>,
    F: FnOnce(T) -> FileConfig,
{
    let Some(p) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(p)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
    if let Ok(full) = serde_json::from_str::<T>(&text) {
        return Ok(to_partial(full));
    }
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", p.display())))
}

/// Partial config as it may appear in a `--config` file: any subset of the
/// common experiment fields.
#[derive(Serialize, Deserialize, Clone, Debug, Default)]
#[serde(default)]
pub struct FileConfig {
    pub n: Option<usize>,
    pub depth: Option<String>,
    pub p: Option<f64>,
    pub r: Option<usize>,
    pub sigma: Option<String>,
    pub k_max: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub mode: Option<String>,
    pub taus: Option<Vec<f64>>,
    pub step_size: Option<f64>,
    pub steps: Option<usize>,
    pub samples: Option<usize>,
    pub target_rank: Option<usize>,
    pub log_every: Option<usize>,
    pub init: Option<String>,
    pub i_max: Option<usize>,
    pub d_trials: Option<usize>,
    pub override_stability: Option<bool>,
}

impl CommonArgs {
    /// Folds the file config under the CLI flags (flags win).
    pub fn with_file(&self, f: &FileConfig) -> CommonArgs {
        CommonArgs {
            config: self.config.clone(),
            n: self.n.or(f.n),
            depth: self.depth.clone().or_else(|| f.depth.clone()),
            p: self.p.or(f.p),
            r: self.r.or(f.r),
            sigma: self.sigma.clone().or_else(|| f.sigma.clone()),
            k_max: self.k_max.or(f.k_max),
            trials: self.trials.or(f.trials),
            seed: self.seed.or(f.seed),
            out: self
                .out
                .clone()
                .or_else(|| f.out.clone().map(PathBuf::from)),
            paper: self.paper,
        }
    }
}
