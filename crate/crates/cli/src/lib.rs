//! The `fdasynth` command line: one subcommand per stage plus `pipeline`.

// `!(x > 0.0)` also rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod artifact;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod stages;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::{Command as ClapCommand, CommandFactory, FromArgMatches};
use fdasynth_core::functional::CurveDataset;
use fdasynth_core::ingest::{IngestSidecar, NormalizationParams};
use fdasynth_core::karcher::KarcherConfig;
use fdasynth_core::synthesis::SynthesisConfig;
use fdasynth_core::toy::{generate_toy, toy_signals, write_signals_csv, ToyDataSpec};

use crate::args::{parse_grid, Cli, Command};
use crate::artifact::{read_curves, read_string, write_bytes, write_curves, write_json};
use crate::config::{config_path, merge_config, ConfigFile};
use crate::error::{CliError, CliResult, EXIT_VALIDATION};
use crate::stages::{EvalInputs, TuneInputs};

/// The clap command with every argument allowed to repeat, the last
/// occurrence winning.
pub fn command() -> ClapCommand {
    let mut cmd = Cli::command().args_override_self(true);
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in names {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    cmd
}

/// Parses `argv` (including the program name) after merging the config
/// file named by `--config`.
pub fn parse(argv: Vec<OsString>) -> Result<Cli, ParseFailure> {
    let root = command();
    let argv = match config_path(&argv) {
        Some(path) => {
            let config = ConfigFile::read(Path::new(&path)).map_err(ParseFailure::Config)?;
            merge_config(&root, argv, &config).map_err(ParseFailure::Config)?
        }
        None => argv,
    };
    let matches = root.try_get_matches_from(argv).map_err(ParseFailure::Clap)?;
    Cli::from_arg_matches(&matches).map_err(ParseFailure::Clap)
}

#[derive(Debug)]
pub enum ParseFailure {
    Clap(clap::Error),
    Config(CliError),
}

/// Runs the command line and returns the process exit code.
pub fn run(argv: impl IntoIterator<Item = impl Into<OsString>>) -> i32 {
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match parse(argv) {
        Ok(cli) => cli,
        Err(ParseFailure::Clap(e)) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
        Err(ParseFailure::Config(e)) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_threads(jobs: Option<usize>) -> CliResult<()> {
    let Some(n) = jobs else { return Ok(()) };
    if n == 0 {
        return Err(CliError::validation("--jobs must be at least 1"));
    }
    // A second call in one process (tests) keeps the first pool.
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::debug!("thread pool already initialized");
    }
    Ok(())
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> CliResult<()> {
    init_threads(cli.jobs)?;
    let seed = cli.seed();
    match &cli.command {
        Command::Ingest(a) => {
            let sidecar = a.sidecar.clone().unwrap_or_else(|| artifact::sidecar_path(&a.output));
            stages::run_ingest(
                &a.input,
                &a.output,
                &sidecar,
                a.rejects.as_deref(),
                a.filter.projection,
                &a.filter.policy(),
                a.filter.normalize_orientation,
            )?;
        }
        Command::Smooth(a) => {
            let sidecar = a.sidecar.clone().unwrap_or_else(|| artifact::sidecar_path(&a.input));
            stages::run_smooth(&a.input, &sidecar, &a.output, a.grid_size)?;
        }
        Command::Dist(a) => {
            stages::run_dist(&a.input, a.delta, &a.output)?;
        }
        Command::TuneDelta(a) => {
            let grid = parse_grid(&a.grid)?;
            let sweep = stages::run_tune_delta(&a.dist, &grid, &a.output, a.emit_csv)?;
            println!("chosen delta: {}", sweep.chosen_delta);
        }
        Command::Cluster(a) => {
            let labels = stages::run_cluster(&a.dist, a.delta, a.min_size, &a.output, None)?;
            println!("clusters: {} (sizes {:?})", labels.g, labels.sizes);
        }
        Command::Tune(a) => {
            let inputs = TuneInputs {
                curves: &a.curves,
                dist: &a.dist,
                labels: &a.labels,
                delta: a.delta,
                grid: a.tuning.grid(seed)?,
                kernel: a.kernel.kernel()?,
                karcher: a.kernel.karcher()?,
            };
            let report = stages::run_tune(&inputs, &a.output, a.emit_csv)?;
            match report.chosen {
                Some((k, alpha0)) => println!("chosen K = {k}, alpha0 = {alpha0}"),
                None => println!("no (K, alpha0) satisfies the criterion"),
            }
        }
        Command::Synth(a) => {
            let matrix_delta = artifact::read_matrix(&a.dist)?.delta();
            let config = SynthesisConfig {
                k: a.k,
                alpha0: a.alpha0,
                kernel: a.kernel.kernel()?,
                delta: a.delta.unwrap_or(matrix_delta),
                seed,
                karcher: a.kernel.karcher()?,
            };
            stages::run_synth(&a.curves, &a.dist, &config, &a.output, a.report.as_deref())?;
        }
        Command::Eval(a) => {
            let inputs = EvalInputs {
                orig: &a.orig,
                synth: &a.synth,
                dist: a.dist.as_deref(),
                delta: a.delta,
                tests: a.tests.selection()?,
                permutations: a.tests.permutations,
                seed,
                karcher: KarcherConfig {
                    tol: a.karcher_tol,
                    max_iter: a.karcher_max_iter,
                },
            };
            let report = stages::run_eval(&inputs, &a.output, a.emit_csv)?;
            print_eval_summary(&report);
        }
        Command::Heatmap(a) => {
            let data = read_curves(&a.curves)?;
            let norm = match &a.norm {
                Some(p) => read_normalization(p)?,
                None => data.normalization.clone(),
            };
            let map = fdasynth_core::evaluate::hex_heatmap(&data, &norm, a.diagonal_km, a.samples)?;
            write_bytes(&a.output, map.to_csv().as_bytes())?;
        }
        Command::Toygen(a) => {
            let mut spec = ToyDataSpec::new(a.clusters, a.per_cluster, a.noise, seed);
            spec.grid_size = a.grid_size;
            spec.validate()?;
            if a.output.is_none() && a.signals.is_none() {
                return Err(CliError::validation("toygen needs --output, --signals or both"));
            }
            if let Some(out) = &a.output {
                let data: CurveDataset = generate_toy(&spec)?;
                write_curves(out, &data)?;
            }
            if let Some(out) = &a.signals {
                let mut csv = Vec::new();
                write_signals_csv(&mut csv, &toy_signals(&spec, a.points)?)?;
                write_bytes(out, &csv)?;
            }
            if let Some(out) = &a.labels {
                let labels: Vec<usize> = (0..spec.len()).map(|i| spec.label_of(i) + 1).collect();
                write_json(out, &labels)?;
            }
        }
        Command::Pipeline(a) => {
            let outcome = pipeline::run_pipeline(a, seed)?;
            let mut out = std::io::stdout().lock();
            for r in &outcome.stages {
                let _ = writeln!(out, "{:<11} {:>8.2} s", r.stage.name(), r.seconds);
            }
            let _ = writeln!(out, "manifest: {}", outcome.manifest.display());
        }
    }
    Ok(())
}

fn print_eval_summary(report: &stages::EvalReport) {
    if let Some(t) = &report.mean_test {
        println!("mean test: statistic {:.6}, p = {:.4}", t.statistic_observed, t.p_value);
    }
    if let Some(t) = &report.covariance_test {
        println!(
            "covariance test: statistic {:.6}, p = {:.4}",
            t.statistic_observed, t.p_value
        );
    }
    if let Some(p) = &report.privacy {
        println!(
            "privacy: median nn orig-orig {:.6}, synth-orig {:.6}, ratio {:.3} ({})",
            p.median_orig_orig,
            p.median_synth_orig,
            p.ratio,
            if p.pass { "pass" } else { "fail" }
        );
    }
}

/// Normalization from an ingest sidecar or a bare parameter file.
fn read_normalization(path: &Path) -> CliResult<NormalizationParams> {
    let text = read_string(path)?;
    if let Ok(sidecar) = serde_json::from_str::<IngestSidecar>(&text) {
        return Ok(sidecar.normalization);
    }
    let norm: NormalizationParams = serde_json::from_str(&text).map_err(|e| CliError::from(e).at(path))?;
    norm.validate()?;
    Ok(norm)
}
