//! metrics.csv and transitions.csv: writing, resuming, and reading back.

use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use resetless::eval::TransitionLogEntry;
use resetless::orchestrator::MetricsRow;

use crate::error::CliError;

pub const METRICS_FILE: &str = "metrics.csv";
pub const TRANSITIONS_FILE: &str = "transitions.csv";
pub const METRICS_HEADER: [&str; 9] =
    ["step", "algorithm", "task_id", "event", "reward_sum", "success_rate", "loss_actor", "loss_critic", "alpha"];
pub const TRANSITIONS_HEADER: [&str; 3] = ["step", "from_task", "to_task"];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn metrics_fields(r: &MetricsRow) -> [String; 9] {
    [
        r.step.to_string(),
        r.algorithm.name().to_string(),
        r.task_id.to_string(),
        r.event.name().to_string(),
        r.reward_sum.to_string(),
        r.success_rate.to_string(),
        opt(r.loss_actor),
        opt(r.loss_critic),
        opt(r.alpha),
    ]
}

/// Appending writers for one run directory.
pub struct RunLog {
    metrics: csv::Writer<File>,
    transitions: csv::Writer<File>,
}

impl RunLog {
    /// Starts both files afresh with header rows only.
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        let mut metrics = csv::Writer::from_path(dir.join(METRICS_FILE))?;
        metrics.write_record(METRICS_HEADER)?;
        let mut transitions = csv::Writer::from_path(dir.join(TRANSITIONS_FILE))?;
        transitions.write_record(TRANSITIONS_HEADER)?;
        let mut log = Self { metrics, transitions };
        log.flush()?;
        Ok(log)
    }

    /// Reopens the files of an interrupted run, dropping rows written after
    /// `step`, the point the run resumes from.
    pub fn resume(dir: &Path, step: u64) -> Result<Self, CliError> {
        let metrics = read_metrics(&dir.join(METRICS_FILE))?;
        let transitions = read_transitions(&dir.join(TRANSITIONS_FILE))?;
        let mut log = Self::create(dir)?;
        for m in metrics.into_iter().filter(|m| m.step <= step) {
            log.metrics.write_record(m.fields)?;
        }
        for t in transitions.into_iter().filter(|t| t.step < step) {
            log.transitions.write_record([t.step.to_string(), t.from_task.to_string(), t.to_task.to_string()])?;
        }
        log.flush()?;
        Ok(log)
    }

    pub fn row(&mut self, r: &MetricsRow) -> Result<(), CliError> {
        Ok(self.metrics.write_record(metrics_fields(r))?)
    }

    pub fn transition(&mut self, t: &TransitionLogEntry) -> Result<(), CliError> {
        Ok(self.transitions.write_record([t.step.to_string(), t.from_task.to_string(), t.to_task.to_string()])?)
    }

    pub fn flush(&mut self) -> Result<(), CliError> {
        self.metrics.flush()?;
        self.transitions.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub algorithm: String,
    pub task_id: usize,
    pub event: String,
    pub reward_sum: f64,
    pub success_rate: f64,
    pub loss_actor: Option<f64>,
    pub loss_critic: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(skip)]
    pub fields: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub struct TransitionRecord {
    pub step: u64,
    pub from_task: usize,
    pub to_task: usize,
}

fn malformed(path: &Path, e: csv::Error) -> CliError {
    let row = e.position().map(|p| p.line().to_string()).unwrap_or_else(|| "?".into());
    CliError::Invalid(format!("malformed {}: row {row}: {e}", path.display()))
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<File>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut rdr = csv::Reader::from_reader(file);
    let found = rdr.headers().map_err(|e| malformed(path, e))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(CliError::Invalid(format!(
            "malformed {}: row 1: expected header {}",
            path.display(),
            header.join(",")
        )));
    }
    Ok(rdr)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>, CliError> {
    let mut rdr = reader(path, &METRICS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| malformed(path, e))?;
        let mut m: MetricsRecord = rec.deserialize(None).map_err(|e| malformed(path, e))?;
        if m.event != "train_window" && m.event != "eval" {
            let row = rec.position().map(|p| p.line()).unwrap_or(0);
            return Err(CliError::Invalid(format!(
                "malformed {}: row {row}: unknown event {:?}",
                path.display(),
                m.event
            )));
        }
        m.fields = rec.iter().map(str::to_string).collect();
        out.push(m);
    }
    Ok(out)
}

pub fn read_transitions(path: &Path) -> Result<Vec<TransitionRecord>, CliError> {
    let mut rdr = reader(path, &TRANSITIONS_HEADER)?;
    rdr.deserialize().map(|r| r.map_err(|e| malformed(path, e))).collect()
}

/// Appends one line to a CSV file, writing `header` first if the file is new.
pub fn append_row(path: &PathBuf, header: &[&str], row: &[String]) -> Result<(), CliError> {
    let fresh = !path.exists();
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(header)?;
    }
    w.write_record(row)?;
    w.flush()?;
    Ok(())
}
