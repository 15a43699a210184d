//! Metrics CSV, run summary and dataset dumps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mcgdm_core::data::DomainDataset;
use mcgdm_core::federation::MetricsTable;
use serde::Serialize;

use crate::config::{Config, Mode};
use crate::experiment::{mean_std, SeedRun};
use crate::{AppError, AppResult};

pub const METRICS_HEADER: &str = "round,phase,domain_id,metric,value";

pub fn metrics_csv(table: &MetricsTable) -> String {
    let mut s = String::with_capacity(32 * (table.len() + 1));
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for r in table.rows() {
        writeln!(s, "{},{},{},{},{}", r.round, r.phase.as_str(), r.domain_id, r.metric.as_str(), r.value).unwrap();
    }
    s
}

/// `domain_id,y,x0,…` with one row per sample.
pub fn dataset_csv(d: &DomainDataset) -> String {
    let mut s = String::from("domain_id,y");
    for j in 0..d.dim() {
        write!(s, ",x{j}").unwrap();
    }
    s.push('\n');
    for (i, y) in d.labels.iter().enumerate() {
        write!(s, "{},{y}", d.domain_id).unwrap();
        for v in d.x.row(i) {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedFinal {
    pub seed: u64,
    pub headline_accuracy: f64,
    pub source_accuracy: f64,
    pub skipped_target_rounds: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Final {
    /// `unseen_accuracy` for dg runs, `target_accuracy` for da runs.
    pub headline: &'static str,
    pub mean: f64,
    pub std: f64,
    pub per_seed: Vec<SeedFinal>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub config: Config,
    #[serde(rename = "final")]
    pub final_: Final,
    /// Metrics rows written over all seed files.
    pub per_round_rows: usize,
}

pub fn summarize(cfg: &Config, runs: &[SeedRun]) -> Summary {
    let accs: Vec<f64> = runs.iter().map(|r| r.outcome.headline_accuracy).collect();
    let (mean, std) = mean_std(&accs);
    Summary {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        final_: Final {
            headline: match cfg.mode {
                Mode::Dg => "unseen_accuracy",
                Mode::Da => "target_accuracy",
            },
            mean,
            std,
            per_seed: runs
                .iter()
                .map(|r| SeedFinal {
                    seed: r.seed,
                    headline_accuracy: r.outcome.headline_accuracy,
                    source_accuracy: r.outcome.source_accuracy,
                    skipped_target_rounds: r.outcome.skipped_target_rounds.clone(),
                })
                .collect(),
        },
        per_round_rows: runs.iter().map(|r| r.outcome.metrics.len()).sum(),
    }
}

pub fn metrics_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("metrics_seed{seed}.csv"))
}

pub fn checkpoint_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("checkpoint_seed{seed}.json"))
}

pub fn write_file(path: &Path, contents: &str) -> AppResult<()> {
    fs::write(path, contents).map_err(|e| AppError::io(path, e))
}

pub fn create_dir(dir: &Path) -> AppResult<()> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))
}
