//! Plot-ready numeric tables: fixed column schema per subcommand, CSV
//! output (RFC-4180 style, '.' decimal, LF line endings), and a JSON
//! metadata sidecar. Given the same config and seed, the CSV bytes are
//! identical across runs and thread counts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

pub struct ResultTable {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

/// One table cell: a number, or empty for not-applicable fields in flagged
/// columns.
#[derive(Clone, Copy, Debug)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Int(x as i64)
    }
}

impl ResultTable {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row arity mismatch");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for cell in row {
                if !first {
                    out.push(',');
                }
                first = false;
                match cell {
                    // Rust's shortest-roundtrip float formatting keeps the
                    // bytes stable and the values exact.
                    Cell::Float(x) => {
                        if x.is_nan() {
                            out.push_str("NaN");
                        } else {
                            let _ = write!(out, "{x}");
                        }
                    }
                    Cell::Int(x) => {
                        let _ = write!(out, "{x}");
                    }
                    Cell::Empty => {}
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Run metadata written beside every CSV.
#[derive(Serialize)]
pub struct Meta {
    pub subcommand: String,
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub artifact_version: &'static str,
    pub wall_time_secs: f64,
    pub threads: usize,
}

pub const SCHEMA_VERSION: u32 = 1;

/// FNV-1a over the canonical config JSON.
pub fn config_hash(config_json: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in config_json.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

pub struct RunOutput<'a> {
    pub out_dir: &'a Path,
    pub subcommand: &'a str,
    pub seed: u64,
    pub started: std::time::Instant,
}

impl RunOutput<'_> {
    /// Writes `<out>/<name>.csv`.
    pub fn write_table(&self, name: &str, table: &ResultTable) -> std::io::Result<()> {
        fs::create_dir_all(self.out_dir)?;
        fs::write(self.out_dir.join(format!("{name}.csv")), table.to_csv())
    }

    /// Writes the resolved `config.json` and the `meta.json` sidecar.
    pub fn write_config_and_meta<C: Serialize>(&self, config: &C) -> std::io::Result<()> {
        fs::create_dir_all(self.out_dir)?;
        let config_json =
            serde_json::to_string_pretty(config).expect("config serialization is infallible");
        fs::write(self.out_dir.join("config.json"), &config_json)?;
        let meta = Meta {
            subcommand: self.subcommand.to_string(),
            schema_version: SCHEMA_VERSION,
            config_hash: config_hash(&config_json),
            seed: self.seed,
            artifact_version: env!("CARGO_PKG_VERSION"),
            wall_time_secs: self.started.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
        };
        fs::write(
            self.out_dir.join("meta.json"),
            serde_json::to_string_pretty(&meta).expect("meta serialization is infallible"),
        )
    }
}
