//! One function per pipeline stage, shared by the subcommands and
//! `pipeline`. Each reads its inputs from files and writes its artifact.

use std::path::{Path, PathBuf};

use fdasynth_core::elastic::{distance_matrix, srvfs_of, Aligner, DistanceMatrix, Neighborhood};
use fdasynth_core::evaluate::{
    covariance_permutation_test, feature_stats, mean_permutation_test, privacy_audit, FeatureStats, MeanTestConfig,
    PermutationTestResult, PrivacyAudit,
};
use fdasynth_core::functional::{build_dataset, CurveDataset, Grid};
use fdasynth_core::ingest::{ingest, FilterPolicy, IngestSidecar, Orientation, ProjectionMode};
use fdasynth_core::karcher::KarcherConfig;
use fdasynth_core::synthesis::{synthesize_all, KarcherSettings, Kernel, SynthesisConfig, SynthesisReport};
use fdasynth_core::tuning::{
    cluster_curves, tune, tune_delta, ClusterAssignment, DeltaSweepResult, TuningContext, TuningGrid, TuningReport,
};
use serde::{Deserialize, Serialize};

use crate::args::TestSelection;
use crate::artifact::{
    open, read_curves, read_matrix, read_report, read_sidecar, read_trajectories, write_bytes, write_curves,
    write_json, write_matrix, write_report, write_trajectories,
};
use crate::error::{CliError, CliResult};

pub const KIND_DELTA: &str = "delta-sweep";
pub const KIND_LABELS: &str = "cluster-labels";
pub const KIND_TUNING: &str = "tuning";
pub const KIND_SYNTH_REPORT: &str = "synthesis";
pub const KIND_EVAL: &str = "evaluation";

/// `<dir>/<stem>_<suffix>` next to `path`.
pub fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}"))
}

fn aligner_for(data: &CurveDataset) -> CliResult<Aligner> {
    Ok(Aligner::new(data.grid.len(), Neighborhood::default())?)
}

fn at_delta(matrix: DistanceMatrix, delta: Option<f64>) -> CliResult<DistanceMatrix> {
    match delta {
        Some(d) if d != matrix.delta() => Ok(matrix.remix(d)?),
        _ => Ok(matrix),
    }
}

pub fn run_ingest(
    input: &Path,
    output: &Path,
    sidecar: &Path,
    rejects: Option<&Path>,
    mode: ProjectionMode,
    policy: &FilterPolicy,
    orientation: Orientation,
) -> CliResult<IngestSidecar> {
    let out = ingest(open(input)?, mode, policy, orientation).map_err(|e| CliError::from(e).at(input))?;
    log::info!(
        "ingest: kept {} trajectories, excluded {}, rejected {} rows",
        out.trajectories.len(),
        out.rejects.trajectories.len(),
        out.rejects.rows.len()
    );
    write_trajectories(output, &out.trajectories)?;
    write_json(sidecar, &out.sidecar)?;
    if let Some(path) = rejects {
        write_json(path, &out.rejects)?;
    }
    Ok(out.sidecar)
}

pub fn run_smooth(input: &Path, sidecar: &Path, output: &Path, grid_size: usize) -> CliResult<CurveDataset> {
    let trajs = read_trajectories(input)?;
    let sidecar = read_sidecar(sidecar)?;
    let grid = Grid::uniform(grid_size)?;
    let data = build_dataset(&trajs, &sidecar.normalization, &grid)?;
    write_curves(output, &data)?;
    Ok(data)
}

pub fn run_dist(input: &Path, delta: f64, output: &Path) -> CliResult<DistanceMatrix> {
    let data = read_curves(input)?;
    let matrix = distance_matrix(&aligner_for(&data)?, &data.curves, delta)?;
    write_matrix(output, &matrix)?;
    Ok(matrix)
}

pub fn run_tune_delta(dist: &Path, grid: &[f64], output: &Path, emit_csv: bool) -> CliResult<DeltaSweepResult> {
    let matrix = read_matrix(dist)?;
    let sweep = tune_delta(&matrix, grid)?;
    write_report(output, KIND_DELTA, &sweep)?;
    if emit_csv {
        let mut csv = String::from("delta,coph_corr_amp,coph_corr_phase,abs_diff,separating\n");
        for i in 0..sweep.deltas.len() {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                sweep.deltas[i],
                sweep.coph_corr_amp[i],
                sweep.coph_corr_phase[i],
                sweep.abs_diff[i],
                sweep.separating[i]
            ));
        }
        write_bytes(&companion(output, "sweep.csv"), csv.as_bytes())?;
    }
    Ok(sweep)
}

pub fn run_cluster(
    dist: &Path,
    delta: Option<f64>,
    min_size: usize,
    output: &Path,
    ids: Option<&CurveDataset>,
) -> CliResult<ClusterAssignment> {
    let matrix = at_delta(read_matrix(dist)?, delta)?;
    let mut labels = cluster_curves(&matrix, min_size)?;
    if let Some(data) = ids {
        if data.len() != labels.labels.len() {
            return Err(CliError::validation("curve file and distance matrix sizes differ"));
        }
        labels.ids = data.curves.iter().map(|c| c.id.clone()).collect();
    }
    write_report(output, KIND_LABELS, &labels)?;
    Ok(labels)
}

pub struct TuneInputs<'a> {
    pub curves: &'a Path,
    pub dist: &'a Path,
    pub labels: &'a Path,
    pub delta: Option<f64>,
    pub grid: TuningGrid,
    pub kernel: Kernel,
    pub karcher: KarcherSettings,
}

pub fn run_tune(inputs: &TuneInputs<'_>, output: &Path, emit_csv: bool) -> CliResult<TuningReport> {
    let data = read_curves(inputs.curves)?;
    let matrix = at_delta(read_matrix(inputs.dist)?, inputs.delta)?;
    let clusters: ClusterAssignment = read_report(inputs.labels, KIND_LABELS)?;
    check_ids(&clusters, &data).map_err(|e| e.at(inputs.labels))?;
    let aligner = aligner_for(&data)?;
    let ctx = TuningContext {
        aligner: &aligner,
        dataset: &data,
        matrix: &matrix,
        clusters: &clusters,
        kernel: inputs.kernel,
        karcher: inputs.karcher,
    };
    let report = tune(&ctx, &inputs.grid)?;
    write_report(output, KIND_TUNING, &report)?;
    if emit_csv {
        write_bytes(&companion(output, "i1.csv"), report.i1_csv().as_bytes())?;
        write_bytes(&companion(output, "i2.csv"), report.i2_csv().as_bytes())?;
    }
    Ok(report)
}

fn check_ids(clusters: &ClusterAssignment, data: &CurveDataset) -> CliResult<()> {
    clusters.validate(data.len())?;
    if !clusters.ids.is_empty() && clusters.ids.iter().zip(&data.curves).any(|(a, c)| *a != c.id) {
        return Err(CliError::validation(
            "cluster labels list different curve ids than the curve file",
        ));
    }
    Ok(())
}

pub fn run_synth(
    curves: &Path,
    dist: &Path,
    config: &SynthesisConfig,
    output: &Path,
    report_path: Option<&Path>,
) -> CliResult<(CurveDataset, SynthesisReport)> {
    let data = read_curves(curves)?;
    let matrix = read_matrix(dist)?;
    let (synth, report) = synthesize_all(&aligner_for(&data)?, &data, &matrix, config)?;
    write_curves(output, &synth)?;
    if let Some(path) = report_path {
        write_report(path, KIND_SYNTH_REPORT, &report)?;
    }
    Ok((synth, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub delta: f64,
    pub seed: u64,
    pub permutations: usize,
    pub mean_test: Option<PermutationTestResult>,
    pub covariance_test: Option<PermutationTestResult>,
    pub privacy: Option<PrivacyAudit>,
    pub features_original: FeatureStats,
    pub features_synthetic: FeatureStats,
}

pub struct EvalInputs<'a> {
    pub orig: &'a Path,
    pub synth: &'a Path,
    pub dist: Option<&'a Path>,
    pub delta: f64,
    pub tests: TestSelection,
    pub permutations: usize,
    pub seed: u64,
    pub karcher: KarcherConfig,
}

pub fn run_eval(inputs: &EvalInputs<'_>, output: &Path, emit_csv: bool) -> CliResult<EvalReport> {
    let orig = read_curves(inputs.orig)?;
    let synth = read_curves(inputs.synth)?;
    if orig.grid != synth.grid {
        return Err(CliError::validation(
            "original and synthetic curves use different grids",
        ));
    }
    let aligner = aligner_for(&orig)?;
    let (so, ss) = (srvfs_of(&orig.curves), srvfs_of(&synth.curves));
    let mean_test = if inputs.tests.mean {
        let config = MeanTestConfig {
            permutations: inputs.permutations,
            delta: inputs.delta,
            seed: inputs.seed,
            karcher: inputs.karcher,
        };
        Some(mean_permutation_test(&aligner, &so, &ss, &config)?)
    } else {
        None
    };
    let covariance_test = if inputs.tests.cov {
        Some(covariance_permutation_test(
            &orig.curves,
            &synth.curves,
            inputs.permutations,
            inputs.seed,
        )?)
    } else {
        None
    };
    let privacy = if inputs.tests.privacy {
        let matrix = match inputs.dist {
            Some(p) => read_matrix(p)?,
            None => distance_matrix(&aligner, &orig.curves, inputs.delta)?,
        };
        Some(privacy_audit(&aligner, &so, &ss, &matrix, inputs.delta)?)
    } else {
        None
    };
    let report = EvalReport {
        delta: inputs.delta,
        seed: inputs.seed,
        permutations: inputs.permutations,
        mean_test,
        covariance_test,
        privacy,
        features_original: feature_stats(&orig, &orig.normalization),
        features_synthetic: feature_stats(&synth, &orig.normalization),
    };
    write_report(output, KIND_EVAL, &report)?;
    if emit_csv {
        emit_eval_csv(output, &report)?;
    }
    Ok(report)
}

fn null_csv(t: &PermutationTestResult) -> String {
    let mut csv = format!("permutation,statistic\nobserved,{}\n", t.statistic_observed);
    for (i, v) in t.statistic_null.iter().enumerate() {
        csv.push_str(&format!("{i},{v}\n"));
    }
    csv
}

fn emit_eval_csv(output: &Path, report: &EvalReport) -> CliResult<()> {
    if let Some(t) = &report.mean_test {
        write_bytes(&companion(output, "mean_null.csv"), null_csv(t).as_bytes())?;
    }
    if let Some(t) = &report.covariance_test {
        write_bytes(&companion(output, "cov_null.csv"), null_csv(t).as_bytes())?;
    }
    if let Some(p) = &report.privacy {
        let mut csv = String::from("set,index,nn_distance\n");
        for (i, v) in p.nn_orig_orig.iter().enumerate() {
            csv.push_str(&format!("orig-orig,{i},{v}\n"));
        }
        for (i, v) in p.nn_synth_orig.iter().enumerate() {
            csv.push_str(&format!("synth-orig,{i},{v}\n"));
        }
        write_bytes(&companion(output, "privacy.csv"), csv.as_bytes())?;
    }
    let mut csv = String::from("set,index,distance_km,duration_min\n");
    for (name, f) in [
        ("original", &report.features_original),
        ("synthetic", &report.features_synthetic),
    ] {
        for (i, (d, t)) in f.distance_km.iter().zip(&f.duration_min).enumerate() {
            csv.push_str(&format!("{name},{i},{d},{t}\n"));
        }
    }
    write_bytes(&companion(output, "features.csv"), csv.as_bytes())
}
