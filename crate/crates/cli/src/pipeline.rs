//! Sequential stage runner with a hash manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use fdasynth_core::karcher::KarcherConfig;
use fdasynth_core::synthesis::SynthesisConfig;
use fdasynth_core::tuning::{DeltaSweepResult, TuningReport};
use serde::{Deserialize, Serialize};

use crate::args::{parse_grid, PipelineArgs};
use crate::artifact::{read_report, sha256_file, write_report};
use crate::error::{CliError, CliResult};
use crate::stages::{self, EvalInputs, TuneInputs, KIND_DELTA, KIND_TUNING};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Smooth,
    Dist,
    TuneDelta,
    Cluster,
    Tune,
    Synth,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Smooth,
        Stage::Dist,
        Stage::TuneDelta,
        Stage::Cluster,
        Stage::Tune,
        Stage::Synth,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Smooth => "smooth",
            Stage::Dist => "dist",
            Stage::TuneDelta => "tune-delta",
            Stage::Cluster => "cluster",
            Stage::Tune => "tune",
            Stage::Synth => "synth",
            Stage::Eval => "eval",
        }
    }

    /// File name of the stage's main artifact inside the output directory.
    pub fn artifact(self) -> &'static str {
        match self {
            Stage::Ingest => "signals.ndjson",
            Stage::Smooth => "curves.json",
            Stage::Dist => "dist.bin",
            Stage::TuneDelta => "delta.json",
            Stage::Cluster => "labels.json",
            Stage::Tune => "tuning.json",
            Stage::Synth => "synth.json",
            Stage::Eval => "eval.json",
        }
    }
}

pub const MANIFEST: &str = "manifest.json";
pub const KIND_MANIFEST: &str = "manifest";
pub const SIDECAR: &str = "signals.norm.json";
pub const REJECTS: &str = "rejects.json";
pub const SYNTH_REPORT: &str = "synth_report.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub config: PipelineArgs,
    pub stages: Vec<StageRecord>,
}

/// The part of an earlier manifest that a partial run keeps.
#[derive(Deserialize)]
struct StoredManifest {
    stages: Vec<StageRecord>,
}

/// Outcome of a pipeline run.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub stages: Vec<StageRecord>,
    pub manifest: PathBuf,
}

struct Paths {
    dir: PathBuf,
}

impl Paths {
    fn of(&self, stage: Stage) -> PathBuf {
        self.dir.join(stage.artifact())
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

fn hash_all(dir: &Path, files: &[PathBuf]) -> CliResult<Vec<FileHash>> {
    files
        .iter()
        .map(|f| {
            let shown = f.strip_prefix(dir).unwrap_or(f);
            Ok(FileHash {
                path: shown.display().to_string(),
                sha256: sha256_file(f)?,
            })
        })
        .collect()
}

fn require(files: &[PathBuf]) -> CliResult<()> {
    for f in files {
        if !f.exists() {
            return Err(CliError::validation(format!("missing input file `{}`", f.display())));
        }
    }
    Ok(())
}

fn previous_records(path: &Path) -> CliResult<Vec<StageRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(read_report::<StoredManifest>(path, KIND_MANIFEST)?.stages)
}

/// Runs stages `args.from ..= args.to` in order.
pub fn run_pipeline(args: &PipelineArgs, seed: u64) -> CliResult<PipelineOutcome> {
    if args.from > args.to {
        return Err(CliError::validation(format!(
            "--from {} comes after --to {}",
            args.from.name(),
            args.to.name()
        )));
    }
    let paths = Paths {
        dir: args.out_dir.clone(),
    };
    std::fs::create_dir_all(&paths.dir).map_err(|e| CliError::from(e).at(&paths.dir))?;
    let manifest_path = paths.file(MANIFEST);
    let mut records = previous_records(&manifest_path)?;

    // Validate everything that does not need data before any work starts.
    let delta_grid = parse_grid(&args.delta_grid).map_err(|e| e.context("delta-grid"))?;
    let tuning_grid = args.tuning.grid(seed)?;
    let kernel = args.kernel.kernel()?;
    let karcher = args.kernel.karcher()?;
    let tests = args.tests.selection()?;
    args.filter.policy().validate()?;

    for stage in Stage::ALL.into_iter().filter(|s| (args.from..=args.to).contains(s)) {
        let started = Instant::now();
        let (inputs, outputs) = run_stage(
            stage,
            args,
            &paths,
            seed,
            &delta_grid,
            &tuning_grid,
            kernel,
            karcher,
            tests,
        )
        .map_err(|e| e.context(format!("stage `{}` failed", stage.name())))?;
        let record = StageRecord {
            stage,
            inputs: hash_all(&paths.dir, &inputs)?,
            outputs: hash_all(&paths.dir, &outputs)?,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!("stage {} done in {:.2} s", stage.name(), record.seconds);
        records.retain(|r| r.stage != stage);
        records.push(record);
        records.sort_by_key(|r| r.stage);
        let manifest = Manifest {
            seed,
            config: args.clone(),
            stages: records.clone(),
        };
        write_report(&manifest_path, KIND_MANIFEST, &manifest)?;
    }
    Ok(PipelineOutcome {
        stages: records,
        manifest: manifest_path,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_stage(
    stage: Stage,
    args: &PipelineArgs,
    paths: &Paths,
    seed: u64,
    delta_grid: &[f64],
    tuning_grid: &fdasynth_core::tuning::TuningGrid,
    kernel: fdasynth_core::synthesis::Kernel,
    karcher: fdasynth_core::synthesis::KarcherSettings,
    tests: crate::args::TestSelection,
) -> CliResult<(Vec<PathBuf>, Vec<PathBuf>)> {
    let chosen_delta = || -> CliResult<f64> {
        let sweep: DeltaSweepResult = read_report(&paths.of(Stage::TuneDelta), KIND_DELTA)?;
        Ok(sweep.chosen_delta)
    };
    let out = paths.of(stage);
    match stage {
        Stage::Ingest => {
            let input = args
                .input
                .clone()
                .ok_or_else(|| CliError::validation("--input is required when the pipeline starts at ingest"))?;
            require(std::slice::from_ref(&input))?;
            let (sidecar, rejects) = (paths.file(SIDECAR), paths.file(REJECTS));
            stages::run_ingest(
                &input,
                &out,
                &sidecar,
                Some(&rejects),
                args.filter.projection,
                &args.filter.policy(),
                args.filter.normalize_orientation,
            )?;
            Ok((vec![input], vec![out, sidecar, rejects]))
        }
        Stage::Smooth => {
            let inputs = vec![paths.of(Stage::Ingest), paths.file(SIDECAR)];
            require(&inputs)?;
            stages::run_smooth(&inputs[0], &inputs[1], &out, args.grid_size)?;
            Ok((inputs, vec![out]))
        }
        Stage::Dist => {
            let inputs = vec![paths.of(Stage::Smooth)];
            require(&inputs)?;
            // Both blocks are stored, so later stages remix to the tuned
            // weight; the amplitude-only mix is an arbitrary starting point.
            stages::run_dist(&inputs[0], 1.0, &out)?;
            Ok((inputs, vec![out]))
        }
        Stage::TuneDelta => {
            let inputs = vec![paths.of(Stage::Dist)];
            require(&inputs)?;
            stages::run_tune_delta(&inputs[0], delta_grid, &out, args.emit_csv)?;
            Ok((inputs, vec![out]))
        }
        Stage::Cluster => {
            let inputs = vec![
                paths.of(Stage::Dist),
                paths.of(Stage::TuneDelta),
                paths.of(Stage::Smooth),
            ];
            require(&inputs)?;
            let data = crate::artifact::read_curves(&inputs[2])?;
            stages::run_cluster(&inputs[0], Some(chosen_delta()?), args.min_size, &out, Some(&data))?;
            Ok((inputs, vec![out]))
        }
        Stage::Tune => {
            let inputs = vec![
                paths.of(Stage::Smooth),
                paths.of(Stage::Dist),
                paths.of(Stage::Cluster),
                paths.of(Stage::TuneDelta),
            ];
            require(&inputs)?;
            let tune = TuneInputs {
                curves: &inputs[0],
                dist: &inputs[1],
                labels: &inputs[2],
                delta: Some(chosen_delta()?),
                grid: tuning_grid.clone(),
                kernel,
                karcher,
            };
            stages::run_tune(&tune, &out, args.emit_csv)?;
            Ok((inputs, vec![out]))
        }
        Stage::Synth => {
            let inputs = vec![
                paths.of(Stage::Smooth),
                paths.of(Stage::Dist),
                paths.of(Stage::Tune),
                paths.of(Stage::TuneDelta),
            ];
            require(&inputs)?;
            let report: TuningReport = read_report(&inputs[2], KIND_TUNING)?;
            let (k, alpha0) = report.chosen.ok_or_else(|| {
                CliError::Numerical(format!(
                    "tuning selected no (K, alpha0); warnings: {}",
                    report.warnings.join("; ")
                ))
            })?;
            let config = SynthesisConfig {
                k,
                alpha0,
                kernel,
                delta: chosen_delta()?,
                seed,
                karcher,
            };
            let report_path = paths.file(SYNTH_REPORT);
            stages::run_synth(&inputs[0], &inputs[1], &config, &out, Some(&report_path))?;
            Ok((inputs, vec![out, report_path]))
        }
        Stage::Eval => {
            let inputs = vec![
                paths.of(Stage::Smooth),
                paths.of(Stage::Synth),
                paths.of(Stage::Dist),
                paths.of(Stage::TuneDelta),
            ];
            require(&inputs)?;
            let eval = EvalInputs {
                orig: &inputs[0],
                synth: &inputs[1],
                dist: Some(&inputs[2]),
                delta: chosen_delta()?,
                tests,
                permutations: args.tests.permutations,
                seed,
                karcher: KarcherConfig::from(karcher),
            };
            stages::run_eval(&eval, &out, args.emit_csv)?;
            Ok((inputs, vec![out]))
        }
    }
}
