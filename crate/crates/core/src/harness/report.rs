use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{SweepResult, TrialRecord};
use crate::comms::write_se_csv;
use crate::config::ScenarioConfig;
use crate::error::Result;

/// SHA-256 of the canonical TOML rendering of `config`.
pub fn config_hash(config: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(config.to_toml_string().as_bytes()))
}

#[derive(Serialize)]
struct PdRow {
    gamma: f64,
    n_scan: usize,
    trials: usize,
    gated_detections: usize,
    pd: f64,
    pd_ci_low: f64,
    pd_ci_high: f64,
}

#[derive(Serialize)]
struct RmseRow {
    gamma: f64,
    n_scan: usize,
    gated_detections: usize,
    rmse_m: Option<f64>,
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `pd.csv`, `rmse.csv`, `se.csv` and `manifest.json` into `out_dir`.
pub fn write_report(result: &SweepResult, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let pd = dir.join("pd.csv");
    write_rows(
        &pd,
        result.points.iter().map(|p| PdRow {
            gamma: p.gamma,
            n_scan: p.n_scan,
            trials: p.trials,
            gated_detections: p.gated_detections,
            pd: p.pd,
            pd_ci_low: p.pd_ci_low,
            pd_ci_high: p.pd_ci_high,
        }),
    )?;
    let rmse = dir.join("rmse.csv");
    write_rows(
        &rmse,
        result.points.iter().map(|p| RmseRow {
            gamma: p.gamma,
            n_scan: p.n_scan,
            gated_detections: p.gated_detections,
            rmse_m: p.rmse_m,
        }),
    )?;
    let se = dir.join("se.csv");
    write_se_csv(BufWriter::new(File::create(&se)?), &result.se_percentiles)?;
    let manifest = dir.join("manifest.json");
    std::fs::write(&manifest, serde_json::to_string_pretty(result)? + "\n")?;
    Ok(vec![pd, rmse, se, manifest])
}

/// Per-trial decision records as `decisions.csv`.
pub fn write_records(records: &[TrialRecord], out_dir: impl AsRef<Path>) -> Result<PathBuf> {
    let path = out_dir.as_ref().join("decisions.csv");
    write_rows(&path, records)?;
    Ok(path)
}

/// Reads a manifest written by [`write_report`]. Per-trial records are not
/// part of the manifest.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<SweepResult> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
