use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Parser)]
#[command(
    name = "trends",
    version,
    about = "Sampled search-index experiments: synthetic panels, catalogs, correlations, LASSO selection, nowcasts and vintages",
    args_override_self = true
)]
pub struct Cli {
    /// Master seed; every random draw derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// JSON file of parameters (keys mirror flag names), or a run manifest
    /// to replay. Flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate latent panels and sampled downloads into a catalog.
    Synth(SynthArgs),
    /// Add exported CSV files to a catalog.
    Ingest(IngestArgs),
    /// Cross-sample correlation matrices per term.
    Corr(CorrArgs),
    /// Variable-selection experiment: single-sample vs averaged covariates.
    Simulate(SimulateArgs),
    /// Per-sample and averaged-covariate nowcasts of a target series.
    Nowcast(NowcastArgs),
    /// Rolling-window vintages of a synthetic term.
    Vintages(VintagesArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Ingest(_) => "ingest",
            Command::Corr(_) => "corr",
            Command::Simulate(_) => "simulate",
            Command::Nowcast(_) => "nowcast",
            Command::Vintages(_) => "vintages",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 20 monthly economics terms, 120 months, regions US and BR.
    Regions,
    /// 10 daily symptom terms, February to June 2020, with a target series.
    Waves,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = Preset::Regions)]
    pub preset: Preset,
    /// Regions to generate (default: US and BR for regions, BR for waves).
    #[arg(long, value_delimiter = ',')]
    pub geo: Vec<String>,
    /// Downloads per term (default: 14 for regions, 8 for waves).
    #[arg(long)]
    pub n_samples: Option<usize>,
    /// Share of searches each download keeps.
    #[arg(long)]
    pub sampling_fraction: Option<f64>,
    /// Mean latent searches per term and period, overriding the region's.
    #[arg(long)]
    pub term_rate: Option<f64>,
    /// Catalog directory (default: <out-dir>/catalog).
    #[arg(long)]
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IngestArgs {
    /// Catalog directory.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Download date for every file (default: each file's stem as YYYY-MM-DD).
    #[arg(long)]
    pub date: Option<String>,
    /// Rebuild the index from the directory tree before adding.
    #[arg(long)]
    pub rebuild: bool,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CorrArgs {
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Region (default: the catalog's only region).
    #[arg(long)]
    pub geo: Option<String>,
    /// Terms to load (default: all terms of the region).
    #[arg(long, value_delimiter = ',')]
    pub terms: Vec<String>,
    /// Correlate averages of disjoint groups of this many samples.
    #[arg(long)]
    pub group_size: Option<usize>,
    /// Number of groups (default: as many as fit).
    #[arg(long)]
    pub n_groups: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// 1 (single-sample covariates), 2 (averaged covariates) or both.
    #[arg(long, default_value = "both", value_parser = ["1", "2", "both"])]
    pub setup: String,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// bic, cv (5 folds) or cv:<folds>.
    #[arg(long, default_value = "bic")]
    pub rule: String,
    /// Read pools from a catalog instead of generating the built-in regions.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Regions, in table column order (default: US,BR or all catalog regions).
    #[arg(long, value_delimiter = ',')]
    pub geo: Vec<String>,
    /// Samples per generated pool.
    #[arg(long, default_value_t = 14)]
    pub n_samples: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct NowcastArgs {
    /// Target CSV with header `period,value`.
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub geo: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub terms: Vec<String>,
    /// Training periods `START:END`, inclusive (default: all but the evaluation window).
    #[arg(long)]
    pub train: Option<String>,
    /// Evaluation periods `START:END`, inclusive (default: the last fifth).
    #[arg(long)]
    pub eval: Option<String>,
    #[arg(long, default_value = "cv")]
    pub rule: String,
    /// Fit and score the smoothed trend or the raw target.
    #[arg(long, default_value = "trend", value_parser = ["trend", "raw"])]
    pub target_kind: String,
    /// Odd smoothing window (default: 7 for daily, 3 for monthly targets).
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VintagesArgs {
    #[arg(long, default_value = "US")]
    pub geo: String,
    /// Mean latent searches per month of the term.
    #[arg(long, default_value_t = trends_core::presets::VINTAGE_RARE_RATE)]
    pub term_rate: f64,
    #[arg(long, default_value_t = trends_core::vintage::DEFAULT_N_VINTAGES)]
    pub n_vintages: usize,
    /// Shift between consecutive windows, in months.
    #[arg(long, default_value_t = trends_core::vintage::DEFAULT_STEP)]
    pub step: usize,
    /// Length of each window, in months.
    #[arg(long, default_value_t = trends_core::presets::VINTAGE_BASE_MONTHS)]
    pub window_months: usize,
    /// Independent vintage sets to draw; more than one also writes their average.
    #[arg(long, default_value_t = 1)]
    pub n_sets: usize,
    #[arg(long)]
    pub sampling_fraction: Option<f64>,
}
