use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::stats::PhaseStats;
use super::timeline::{phase_durations, Phase, PhaseTimeline};
use crate::config::CampaignConfig;

pub const TIMELINES_CSV: &str = "timelines.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot encode {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("cannot encode {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

fn num(x: f64) -> String {
    format!("{x:.6}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// `run_id,profile,block_period_s,phase,duration_s,failed`; failed runs
/// keep one row per phase with an empty duration.
pub fn timelines_csv(timelines: &[PhaseTimeline]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run_id", "profile", "block_period_s", "phase", "duration_s", "failed"])?;
    for t in timelines {
        let d = phase_durations(t);
        for p in Phase::ALL {
            let dur = d.get(p).map(|d| num(d.as_secs_f64())).unwrap_or_default();
            w.write_record([
                t.run_id.to_string(),
                t.profile_name.clone(),
                num(t.block_period_s),
                p.name().to_string(),
                dur,
                d.failed.to_string(),
            ])?;
        }
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

pub fn summary_csv(stats: &[PhaseStats]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["profile", "block_period_s", "phase", "mean_s", "stddev_s", "p50_s", "p95_s", "n_runs"])?;
    for s in stats {
        w.write_record([
            s.profile_name.clone(),
            num(s.block_period_s),
            s.phase.name().to_string(),
            opt(s.mean_s),
            opt(s.stddev_s),
            opt(s.p50_s),
            opt(s.p95_s),
            s.n_runs.to_string(),
        ])?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

#[derive(Serialize)]
struct Summary<'a> {
    base_seed: u64,
    config: &'a CampaignConfig,
    stats: &'a [PhaseStats],
}

pub fn summary_json(config: &CampaignConfig, stats: &[PhaseStats]) -> Result<Vec<u8>, serde_json::Error> {
    let mut out = serde_json::to_vec_pretty(&Summary {
        base_seed: config.base_seed,
        config,
        stats,
    })?;
    out.push(b'\n');
    Ok(out)
}

/// Paths of the three files written by [`export`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExportedFiles {
    pub timelines_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub summary_json: PathBuf,
}

pub fn export(
    dir: &Path,
    config: &CampaignConfig,
    stats: &[PhaseStats],
    timelines: &[PhaseTimeline],
) -> Result<ExportedFiles, ExportError> {
    fs::create_dir_all(dir).map_err(|source| ExportError::Io { path: dir.to_path_buf(), source })?;
    let files = ExportedFiles {
        timelines_csv: dir.join(TIMELINES_CSV),
        summary_csv: dir.join(SUMMARY_CSV),
        summary_json: dir.join(SUMMARY_JSON),
    };
    let csv_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ExportError::Csv { path, source }
    };
    let write = |path: &Path, bytes: Vec<u8>| {
        fs::write(path, bytes).map_err(|source| ExportError::Io { path: path.to_path_buf(), source })
    };
    write(&files.timelines_csv, timelines_csv(timelines).map_err(csv_err(&files.timelines_csv))?)?;
    write(&files.summary_csv, summary_csv(stats).map_err(csv_err(&files.summary_csv))?)?;
    let json = summary_json(config, stats).map_err(|source| ExportError::Json {
        path: files.summary_json.clone(),
        source,
    })?;
    write(&files.summary_json, json)?;
    Ok(files)
}
