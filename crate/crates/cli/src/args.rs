use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fdasynth_core::evaluate::{DEFAULT_HEX_DIAGONAL_KM, DEFAULT_HEX_SAMPLES};
use fdasynth_core::ingest::{FilterPolicy, Orientation, ProjectionMode};
use fdasynth_core::karcher::KarcherConfig;
use fdasynth_core::synthesis::{KarcherSettings, Kernel};
use fdasynth_core::tuning::{Criterion, TuningGrid};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Seed used when neither `--seed` nor the config file sets one.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "fdasynth", version, about = "Elastic synthetic trajectory generation")]
pub struct Cli {
    /// Flat `key=value` file; keys are long flag names without dashes.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, project, filter and normalize a signals CSV.
    Ingest(IngestArgs),
    /// Spline-smooth normalized trajectories onto a common grid.
    Smooth(SmoothArgs),
    /// Pairwise amplitude and phase distances.
    Dist(DistArgs),
    /// Sweep the amplitude/phase mixing weight.
    TuneDelta(TuneDeltaArgs),
    /// Complete-linkage clustering with an adaptive cut.
    Cluster(ClusterArgs),
    /// Choose the neighbor count and Dirichlet concentration.
    Tune(TuneArgs),
    /// Generate one synthetic twin per curve.
    Synth(SynthArgs),
    /// Compare original and synthetic datasets.
    Eval(EvalArgs),
    /// Hexagonal point-density heatmap as CSV.
    Heatmap(HeatmapArgs),
    /// Generate a seeded toy corpus.
    Toygen(ToygenArgs),
    /// Run the stages from ingest to eval, or a contiguous part of them.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FilterOptions {
    #[arg(long, default_value_t = 5)]
    pub min_points: usize,
    #[arg(long, default_value_t = 3.0)]
    pub max_gap_km: f64,
    #[arg(long, default_value_t = 30.0)]
    pub max_gap_min: f64,
    #[arg(long, default_value_t = 1200.0)]
    pub max_accuracy_m: f64,
    #[arg(long, default_value_t = 90.0)]
    pub max_speed_kmh: f64,
    #[arg(long, default_value = "local")]
    pub projection: ProjectionMode,
    /// `max0` maps each spatial axis maximum to 0, `min0` the minimum.
    #[arg(long, default_value = "max0")]
    pub normalize_orientation: Orientation,
}

impl FilterOptions {
    pub fn policy(&self) -> FilterPolicy {
        FilterPolicy {
            min_points: self.min_points,
            max_gap_space: self.max_gap_km * 1000.0,
            max_gap_time: self.max_gap_min * 60.0,
            max_accuracy: self.max_accuracy_m,
            max_speed: self.max_speed_kmh,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KernelOptions {
    /// exp, hyp or exp-scaled.
    #[arg(long, default_value = "exp")]
    pub kernel: String,
    /// Rate of the exp-scaled kernel.
    #[arg(long, default_value_t = 1.0)]
    pub beta0: f64,
    #[arg(long, default_value_t = KarcherConfig::default().tol)]
    pub karcher_tol: f64,
    #[arg(long, default_value_t = KarcherConfig::default().max_iter)]
    pub karcher_max_iter: usize,
}

impl KernelOptions {
    pub fn kernel(&self) -> CliResult<Kernel> {
        Ok(Kernel::parse(&self.kernel, self.beta0)?)
    }

    pub fn karcher(&self) -> CliResult<KarcherSettings> {
        if !(self.karcher_tol > 0.0) || self.karcher_max_iter == 0 {
            return Err(CliError::validation(
                "karcher-tol and karcher-max-iter must be positive",
            ));
        }
        Ok(KarcherSettings {
            tol: self.karcher_tol,
            max_iter: self.karcher_max_iter,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TuningOptions {
    /// `start:stop:step` or a comma list.
    #[arg(long, default_value = "3:24:3")]
    pub k_grid: String,
    #[arg(long, default_value = "1:19:2")]
    pub alpha_grid: String,
    #[arg(long, default_value = "elbow")]
    pub criterion: Criterion,
    /// Privacy threshold for the threshold criterion; defaults to the 25th
    /// percentile of nearest-neighbor distances.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = fdasynth_core::tuning::DEFAULT_ELBOW_RATIO)]
    pub elbow_ratio: f64,
}

impl TuningOptions {
    pub fn grid(&self, seed: u64) -> CliResult<TuningGrid> {
        let grid = TuningGrid {
            k_values: parse_usize_grid(&self.k_grid).map_err(|e| e.context("k-grid"))?,
            alpha_values: parse_grid(&self.alpha_grid).map_err(|e| e.context("alpha-grid"))?,
            criterion: self.criterion,
            threshold: self.threshold,
            elbow_ratio: self.elbow_ratio,
            seed,
        };
        grid.validate()?;
        Ok(grid)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestOptions {
    /// Comma list of mean, cov and privacy.
    #[arg(long, default_value = "mean,cov,privacy")]
    pub tests: String,
    #[arg(long, default_value_t = 500)]
    pub permutations: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TestSelection {
    pub mean: bool,
    pub cov: bool,
    pub privacy: bool,
}

impl TestOptions {
    pub fn selection(&self) -> CliResult<TestSelection> {
        let mut s = TestSelection::default();
        for name in self.tests.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match name {
                "mean" => s.mean = true,
                "cov" => s.cov = true,
                "privacy" => s.privacy = true,
                other => return Err(CliError::validation(format!("unknown test `{other}`"))),
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Normalization sidecar; defaults to `<output stem>.norm.json`.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    #[arg(long)]
    pub rejects: Option<PathBuf>,
    #[command(flatten)]
    pub filter: FilterOptions,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Normalization sidecar; defaults to `<input stem>.norm.json`.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = fdasynth_core::functional::DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneDeltaArgs {
    #[arg(long)]
    pub dist: PathBuf,
    #[arg(long, default_value = "0:1:0.05")]
    pub grid: String,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub emit_csv: bool,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub dist: PathBuf,
    /// Mixing weight; defaults to the one stored in the matrix.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = fdasynth_core::tuning::DEFAULT_MIN_CLUSTER_SIZE)]
    pub min_size: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub curves: PathBuf,
    #[arg(long)]
    pub dist: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub tuning: TuningOptions,
    #[command(flatten)]
    pub kernel: KernelOptions,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub emit_csv: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub curves: PathBuf,
    #[arg(long)]
    pub dist: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub k: usize,
    #[arg(long, default_value_t = 7.0)]
    pub alpha0: f64,
    #[arg(long)]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub kernel: KernelOptions,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub orig: PathBuf,
    #[arg(long)]
    pub synth: PathBuf,
    /// Distance matrix of the originals, reused by the privacy audit.
    #[arg(long)]
    pub dist: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[command(flatten)]
    pub tests: TestOptions,
    #[arg(long, default_value_t = KarcherConfig::default().tol)]
    pub karcher_tol: f64,
    #[arg(long, default_value_t = KarcherConfig::default().max_iter)]
    pub karcher_max_iter: usize,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub emit_csv: bool,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub curves: PathBuf,
    /// Ingest sidecar or bare normalization JSON; defaults to the
    /// normalization stored in the curve file.
    #[arg(long)]
    pub norm: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HEX_DIAGONAL_KM)]
    pub diagonal_km: f64,
    #[arg(long, default_value_t = DEFAULT_HEX_SAMPLES)]
    pub samples: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ToygenArgs {
    #[arg(long, default_value_t = 3)]
    pub clusters: usize,
    #[arg(long, default_value_t = 20)]
    pub per_cluster: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = fdasynth_core::functional::DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    /// Curve dataset output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Signals CSV output, for running the full pipeline.
    #[arg(long)]
    pub signals: Option<PathBuf>,
    /// Records per trajectory in the signals CSV.
    #[arg(long, default_value_t = 60)]
    pub points: usize,
    /// Ground-truth cluster labels (JSON).
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PipelineArgs {
    /// Signals CSV; needed when the run starts at ingest.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "ingest")]
    pub from: crate::pipeline::Stage,
    #[arg(long, default_value = "eval")]
    pub to: crate::pipeline::Stage,
    #[command(flatten)]
    pub filter: FilterOptions,
    #[arg(long, default_value_t = fdasynth_core::functional::DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    #[arg(long, default_value = "0:1:0.05")]
    pub delta_grid: String,
    #[arg(long, default_value_t = fdasynth_core::tuning::DEFAULT_MIN_CLUSTER_SIZE)]
    pub min_size: usize,
    #[command(flatten)]
    pub tuning: TuningOptions,
    #[command(flatten)]
    pub kernel: KernelOptions,
    #[command(flatten)]
    pub tests: TestOptions,
    #[arg(long)]
    pub emit_csv: bool,
}

fn round12(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

/// `start:stop:step` (inclusive, `stop` within rounding) or `a,b,c`.
pub fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::validation(format!("invalid grid `{text}`"));
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, h): (f64, f64, f64) = (
                start.parse().map_err(|_| bad())?,
                stop.parse().map_err(|_| bad())?,
                step.parse().map_err(|_| bad())?,
            );
            if !(h > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
                return Err(bad());
            }
            let n = ((b - a) / h + 1e-9).floor() as usize + 1;
            (0..n).map(|i| round12(a + i as f64 * h)).collect()
        }
        [_] => text
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<CliResult<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(values)
}

pub fn parse_usize_grid(text: &str) -> CliResult<Vec<usize>> {
    parse_grid(text)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::validation(format!("`{v}` in grid `{text}` is not a count")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_usize_grid("3:24:3").unwrap(), vec![3, 6, 9, 12, 15, 18, 21, 24]);
        assert_eq!(parse_grid("1:19:2").unwrap().len(), 10);
        let d = parse_grid("0:1:0.05").unwrap();
        assert_eq!(d.len(), 21);
        assert_eq!(d[3], 0.15);
        assert_eq!(d[20], 1.0);
        assert_eq!(parse_grid("3, 6").unwrap(), vec![3.0, 6.0]);
        assert!(parse_grid("1:0:1").is_err());
        assert!(parse_grid("a").is_err());
        assert!(parse_usize_grid("1.5").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
