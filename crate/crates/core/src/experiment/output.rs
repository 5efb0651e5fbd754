use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::bandit::RoundLog;
use crate::error::{Error, Result};

use super::{ArmStat, ArmSummary, ExperimentConfig, ExperimentOutcome, Stat};

pub const ARMS_CSV: &str = "arms.csv";
pub const BASELINES_CSV: &str = "baselines.csv";
pub const LOGS_JSONL: &str = "logs.jsonl";
pub const MANIFEST_JSON: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub b: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub rustc_target: String,
    pub created_unix: u64,
    pub files: Vec<String>,
}

#[derive(Serialize)]
struct LogLine<'a> {
    realization: usize,
    #[serde(flatten)]
    log: &'a RoundLog,
}

/// Writes `arms.csv`, `baselines.csv`, `logs.jsonl` and `manifest.json`
/// under `dir`. Everything except the manifest timestamp is a function of
/// the config. Returns the written paths.
pub fn emit_results(outcome: &ExperimentOutcome, config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let summary = &outcome.summary;
    if summary.arms.is_empty() || config.arms.is_empty() {
        return Err(Error::Config("arm set must not be empty".into()));
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let arms = dir.join(ARMS_CSV);
    write_arms_csv(File::create(&arms)?, &summary.arms)?;
    written.push(arms);

    let baselines = dir.join(BASELINES_CSV);
    write_baselines_csv(File::create(&baselines)?, summary, config.generator.n)?;
    written.push(baselines);

    let logs = dir.join(LOGS_JSONL);
    let mut w = BufWriter::new(File::create(&logs)?);
    for r in &outcome.realizations {
        for log in &r.logs {
            serde_json::to_writer(
                &mut w,
                &LogLine {
                    realization: r.realization,
                    log,
                },
            )?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    written.push(logs);

    let manifest_path = dir.join(MANIFEST_JSON);
    let manifest = Manifest {
        config_hash: config.hash(),
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        rustc_target: std::env::consts::ARCH.to_string() + "-" + std::env::consts::OS,
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        files: [ARMS_CSV, BASELINES_CSV, LOGS_JSONL]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    serde_json::to_writer_pretty(BufWriter::new(File::create(&manifest_path)?), &manifest)?;
    written.push(manifest_path);
    Ok(written)
}

pub fn write_arms_csv<W: Write>(writer: W, arms: &[ArmStat]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for a in arms {
        w.serialize(a)?;
    }
    w.flush()?;
    Ok(())
}

fn write_baselines_csv<W: Write>(writer: W, summary: &ArmSummary, n: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let row = |b, s: &Stat| BaselineRow {
        b,
        mean: s.mean,
        ci_low: s.ci_low,
        ci_high: s.ci_high,
        samples: s.samples,
    };
    w.serialize(row(0, &summary.baseline_algorithm))?;
    if let Some(h) = &summary.baseline_human {
        w.serialize(row(n, h))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_arms_csv(path: &Path) -> Result<Vec<ArmStat>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn read_baselines_csv(path: &Path) -> Result<Vec<BaselineRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
