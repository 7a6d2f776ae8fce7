use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hgshift::clustering::DEFAULT_PERSISTENCE;
use hgshift::replicator::SeekConfig;
use hgshift::shift::ShiftConfig;
use hgshift::simplex::{DEFAULT_MODE_TOL, DEFAULT_SUPPORT_THRESHOLD};

#[derive(Debug, Parser)]
#[command(name = "hgshift", version, about = "Mode seeking on probabilistic hypergraphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic data.
    Gen(GenArgs),
    /// Run the shift on a hypergraph file.
    Shift(ShiftArgs),
    /// Cluster a point file.
    Cluster(ClusterArgs),
    /// Match correspondences from a file or a generated instance.
    Match(MatchArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(subcommand)]
    pub what: GenWhat,
}

#[derive(Debug, Subcommand)]
pub enum GenWhat {
    /// Five interleaved crescents as `x,y,label` lines.
    Crescents {
        #[arg(long, default_value_t = 600)]
        n: usize,
        /// Per-coordinate noise standard deviation.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// A rigid matching instance as JSON.
    Match {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InstanceArgs {
    /// Number of true correspondences.
    #[arg(long, default_value_t = 15)]
    pub n: usize,
    /// Absolute per-coordinate target noise.
    #[arg(long, default_value_t = 0.0, conflicts_with = "noise_rel")]
    pub noise: f64,
    /// Target noise as a fraction of the source diameter.
    #[arg(long = "noise-rel")]
    pub noise_rel: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub outliers: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Tolerances {
    /// Replicator stops once the density change drops below this.
    #[arg(long, default_value_t = 1e-9)]
    pub eps: f64,
    /// Tolerance of the first-order mode check.
    #[arg(long = "mode-tol", default_value_t = DEFAULT_MODE_TOL)]
    pub mode_tol: f64,
    /// Entries above this count as support.
    #[arg(long = "support-tol", default_value_t = DEFAULT_SUPPORT_THRESHOLD)]
    pub support_tol: f64,
    /// Replicator iteration cap per seek.
    #[arg(long = "max-iter", default_value_t = 1000)]
    pub max_iter: usize,
}

impl Tolerances {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("--eps", self.eps),
            ("--mode-tol", self.mode_tol),
            ("--support-tol", self.support_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.max_iter == 0 {
            return Err("--max-iter must be positive".into());
        }
        Ok(())
    }

    pub fn shift_config(&self) -> ShiftConfig {
        ShiftConfig {
            seek: SeekConfig {
                eps: self.eps,
                max_iter: self.max_iter,
                mode_tol: self.mode_tol,
                support_threshold: self.support_tol,
                trace: false,
            },
            ..ShiftConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct ShiftArgs {
    /// Hypergraph JSON file.
    #[arg(long)]
    pub input: PathBuf,
    /// Seed hyperedge; every hyperedge when omitted.
    #[arg(long)]
    pub start: Option<usize>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trajectory CSV path.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[command(flatten)]
    pub tol: Tolerances,
}

/// `auto` or a positive bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigma(pub Option<f64>);

impl FromStr for Sigma {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Sigma(None));
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Sigma(Some(v))),
            _ => Err(format!("expected `auto` or a positive number, got {s:?}")),
        }
    }
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Point file with `x,y[,label]` lines.
    #[arg(long)]
    pub input: PathBuf,
    /// Assignment CSV path (`x,y,cluster_id`, outliers -1).
    #[arg(long)]
    pub out: PathBuf,
    /// Summary JSON path; stdout when omitted.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Neighbors per hyperedge.
    #[arg(long, default_value_t = hgshift::clustering::KnnConfig::default().k)]
    pub k: usize,
    /// Gaussian bandwidth or `auto`.
    #[arg(long, default_value = "auto")]
    pub sigma: Sigma,
    /// L1 distance under which modes merge.
    #[arg(long = "merge-tol", default_value_t = 0.1)]
    pub merge_tol: f64,
    /// Basin-joining persistence fraction.
    #[arg(long, default_value_t = DEFAULT_PERSISTENCE, conflicts_with = "no_persistence")]
    pub persistence: f64,
    /// Keep every L1-merged mode as its own cluster.
    #[arg(long = "no-persistence")]
    pub no_persistence: bool,
    #[command(flatten)]
    pub tol: Tolerances,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Instance JSON file; a generated instance when omitted.
    #[arg(long, conflicts_with = "batch")]
    pub input: Option<PathBuf>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Generator seed (first seed of a batch).
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Run this many generated instances with consecutive seeds.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Also run the pairwise-edge baseline.
    #[arg(long)]
    pub baseline: bool,
    /// Distance-discrepancy bandwidth or `auto` (0.1 × source diameter).
    #[arg(long = "sigma", default_value = "auto")]
    pub sigma: Sigma,
    #[command(flatten)]
    pub tol: Tolerances,
}
