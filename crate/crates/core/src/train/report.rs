use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimization and protocol settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub learning_rate: f64,
    /// Maximum number of epochs.
    pub epochs: usize,
    /// Coupled L2 penalty `λ/2·‖W‖²` on convolution weights.
    pub weight_decay: f64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    pub seed: u64,
    pub runs: usize,
    pub folds: usize,
    /// Graph task: graphs per batch when the dataset exceeds
    /// `full_batch_max_nodes` stacked nodes.
    pub batch_size: usize,
    pub full_batch_max_nodes: usize,
    /// Worker threads for independent runs; `None` uses all cores.
    pub jobs: Option<usize>,
    /// Include wall-clock time in reports (makes them non-reproducible).
    pub record_time: bool,
}

impl TrainSpec {
    /// Full-batch node training: early stopping with patience 30, at most
    /// 300 epochs, weight decay 5e-4.
    pub fn node(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            epochs: 300,
            weight_decay: 5e-4,
            patience: Some(30),
            seed: 0,
            runs: 100,
            folds: 0,
            batch_size: 32,
            full_batch_max_nodes: usize::MAX,
            jobs: None,
            record_time: false,
        }
    }

    /// Ten-fold graph training: 200 epochs, learning rate 1e-4, no decay.
    pub fn graph() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 200,
            weight_decay: 0.0,
            patience: None,
            seed: 0,
            runs: 1,
            folds: 10,
            batch_size: 32,
            full_batch_max_nodes: 50_000,
            jobs: None,
            record_time: false,
        }
    }

    /// Sets one field by name; `patience` and `jobs` accept `none`.
    /// Returns `Ok(false)` for keys that are not `TrainSpec` fields.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
        }
        fn opt(key: &str, value: &str) -> Result<Option<usize>> {
            if value.eq_ignore_ascii_case("none") {
                Ok(None)
            } else {
                num(key, value).map(Some)
            }
        }
        match key {
            "learning_rate" => self.learning_rate = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "patience" => self.patience = opt(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "runs" => self.runs = num(key, value)?,
            "folds" => self.folds = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "full_batch_max_nodes" => self.full_batch_max_nodes = num(key, value)?,
            "jobs" => self.jobs = opt(key, value)?,
            "record_time" => self.record_time = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one training run (or fold).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub run: usize,
    pub seed: u64,
    pub epochs_run: usize,
    /// Epoch (0-based) whose parameters produced `test_accuracy`.
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    /// Empty when there is no validation split.
    pub val_accuracy: Vec<f64>,
    pub test_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_ms: Option<f64>,
}

/// Mean and population standard deviation over the runs, which are kept
/// sorted by run index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
    pub runs: Vec<TrainReport>,
}

impl ProtocolSummary {
    pub fn from_runs(mut runs: Vec<TrainReport>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::InvalidArgument("no runs to summarize".into()));
        }
        runs.sort_by_key(|r| r.run);
        let accs: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
        let (mean, std) = mean_std(&accs);
        Ok(Self {
            mean_accuracy: mean,
            std_accuracy: std,
            min_accuracy: accs.iter().copied().fold(f64::INFINITY, f64::min),
            max_accuracy: accs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            runs,
        })
    }

    /// One JSON object per run (`"record": "run"`), then the summary
    /// (`"record": "summary"`), each on its own line.
    pub fn to_jsonl(&self) -> Result<String> {
        #[derive(Serialize)]
        struct RunLine<'a> {
            record: &'static str,
            #[serde(flatten)]
            report: &'a TrainReport,
        }
        #[derive(Serialize)]
        struct SummaryLine {
            record: &'static str,
            n: usize,
            mean_accuracy: f64,
            std_accuracy: f64,
            min_accuracy: f64,
            max_accuracy: f64,
        }
        let mut out = String::new();
        for r in &self.runs {
            out.push_str(&serde_json::to_string(&RunLine { record: "run", report: r })?);
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&SummaryLine {
            record: "summary",
            n: self.runs.len(),
            mean_accuracy: self.mean_accuracy,
            std_accuracy: self.std_accuracy,
            min_accuracy: self.min_accuracy,
            max_accuracy: self.max_accuracy,
        })?);
        out.push('\n');
        Ok(out)
    }

    /// Parses the output of [`to_jsonl`](Self::to_jsonl).
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut runs = Vec::new();
        let mut summary = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let value: serde_json::Value = serde_json::from_str(line)?;
            match value.get("record").and_then(|r| r.as_str()) {
                Some("run") => runs.push(serde_json::from_value(value)?),
                Some("summary") => summary = Some(value),
                _ => {
                    return Err(Error::Format {
                        path: "<report>".into(),
                        message: "line without a known `record` field".into(),
                    })
                }
            }
        }
        let summary = summary.ok_or_else(|| Error::Format {
            path: "<report>".into(),
            message: "missing summary line".into(),
        })?;
        let field = |k: &str| summary.get(k).and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
        Ok(Self {
            mean_accuracy: field("mean_accuracy"),
            std_accuracy: field("std_accuracy"),
            min_accuracy: field("min_accuracy"),
            max_accuracy: field("max_accuracy"),
            runs,
        })
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(run: usize, acc: f64) -> TrainReport {
        TrainReport {
            run,
            seed: run as u64,
            epochs_run: 3,
            best_epoch: 1,
            train_loss: vec![1.0, 0.5, 0.25],
            val_accuracy: vec![0.5, 0.75, 0.75],
            test_accuracy: acc,
            wall_time_ms: None,
        }
    }

    #[test]
    fn single_run_has_zero_std() {
        let s = ProtocolSummary::from_runs(vec![report(0, 0.8)]).unwrap();
        assert_eq!((s.mean_accuracy, s.std_accuracy), (0.8, 0.0));
    }

    #[test]
    fn summary_sorted_and_consistent() {
        let s = ProtocolSummary::from_runs(vec![report(2, 0.9), report(0, 0.7), report(1, 0.8)]).unwrap();
        assert_eq!(s.runs.iter().map(|r| r.run).collect::<Vec<_>>(), vec![0, 1, 2]);
        let recomputed = s.runs.iter().map(|r| r.test_accuracy).sum::<f64>() / 3.0;
        assert!((recomputed - s.mean_accuracy).abs() < 1e-12);
        assert!(s.min_accuracy <= s.mean_accuracy && s.mean_accuracy <= s.max_accuracy);
    }

    #[test]
    fn jsonl_round_trip() {
        let s = ProtocolSummary::from_runs(vec![report(0, 0.7), report(1, 0.8)]).unwrap();
        let text = s.to_jsonl().unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().last().unwrap().contains("\"record\":\"summary\""));
        assert_eq!(ProtocolSummary::from_jsonl(&text).unwrap(), s);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.jsonl");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/out.jsonl"), b"x").is_err());
    }
}
