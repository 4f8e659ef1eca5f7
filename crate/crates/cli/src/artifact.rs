//! Reading and writing artifact files. Every error names the file.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use fdasynth_core::elastic::DistanceMatrix;
use fdasynth_core::functional::CurveDataset;
use fdasynth_core::ingest::{read_ndjson, write_ndjson, IngestSidecar, NormalizedTrajectory, SIDECAR_FORMAT_VERSION};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Version of the JSON reports written by the CLI (delta sweep, labels,
/// tuning, synthesis report, evaluation, manifest).
pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format_version: u32,
    kind: String,
    data: T,
}

#[derive(Deserialize)]
struct EnvelopeProbe {
    format_version: u32,
    kind: String,
}

pub fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::from(e).at(path))
}

pub fn read_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::from(e).at(path))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::from(e).at(dir))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::from(e).at(path))
}

/// Writes `data` wrapped with a format version and a kind tag.
pub fn write_report<T: Serialize>(path: &Path, kind: &str, data: &T) -> CliResult<()> {
    let envelope = Envelope {
        format_version: REPORT_FORMAT_VERSION,
        kind: kind.to_string(),
        data,
    };
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// Reads a report written by [`write_report`], rejecting other versions and
/// kinds.
pub fn read_report<T: DeserializeOwned>(path: &Path, kind: &str) -> CliResult<T> {
    let text = read_string(path)?;
    let probe: EnvelopeProbe = serde_json::from_str(&text).map_err(|e| CliError::from(e).at(path))?;
    if probe.format_version != REPORT_FORMAT_VERSION {
        return Err(CliError::validation(format!(
            "`{}`: report version {} (supported: {REPORT_FORMAT_VERSION})",
            path.display(),
            probe.format_version
        )));
    }
    if probe.kind != kind {
        return Err(CliError::validation(format!(
            "`{}`: expected a {kind} report, found {}",
            path.display(),
            probe.kind
        )));
    }
    let envelope: Envelope<T> = serde_json::from_str(&text).map_err(|e| CliError::from(e).at(path))?;
    Ok(envelope.data)
}

pub fn read_curves(path: &Path) -> CliResult<CurveDataset> {
    CurveDataset::from_json(&read_string(path)?).map_err(|e| CliError::from(e).at(path))
}

pub fn write_curves(path: &Path, data: &CurveDataset) -> CliResult<()> {
    write_bytes(path, data.to_json()?.as_bytes())
}

pub fn read_matrix(path: &Path) -> CliResult<DistanceMatrix> {
    DistanceMatrix::read_from(BufReader::new(open(path)?)).map_err(|e| CliError::from(e).at(path))
}

pub fn write_matrix(path: &Path, matrix: &DistanceMatrix) -> CliResult<()> {
    let mut bytes = Vec::new();
    matrix.write_to(&mut bytes)?;
    write_bytes(path, &bytes)
}

pub fn read_trajectories(path: &Path) -> CliResult<Vec<NormalizedTrajectory>> {
    read_ndjson(BufReader::new(open(path)?)).map_err(|e| CliError::from(e).at(path))
}

pub fn write_trajectories(path: &Path, trajs: &[NormalizedTrajectory]) -> CliResult<()> {
    let mut out = BufWriter::new(Vec::new());
    write_ndjson(&mut out, trajs)?;
    out.flush()?;
    let bytes = out.into_inner().map_err(|e| CliError::validation(e.to_string()))?;
    write_bytes(path, &bytes)
}

pub fn read_sidecar(path: &Path) -> CliResult<IngestSidecar> {
    let text = read_string(path)?;
    let sidecar: IngestSidecar = serde_json::from_str(&text).map_err(|e| CliError::from(e).at(path))?;
    if sidecar.format_version != SIDECAR_FORMAT_VERSION {
        return Err(CliError::validation(format!(
            "`{}`: sidecar version {} (supported: {SIDECAR_FORMAT_VERSION})",
            path.display(),
            sidecar.format_version
        )));
    }
    Ok(sidecar)
}

pub fn write_json<T: Serialize>(path: &Path, data: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(data)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::from(e).at(path))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// `<dir>/<stem>.norm.json` for an NDJSON file `<dir>/<stem>.ndjson`.
pub fn sidecar_path(ndjson: &Path) -> std::path::PathBuf {
    ndjson.with_extension("norm.json")
}
