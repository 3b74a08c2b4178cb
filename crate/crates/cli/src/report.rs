//! The machine-readable outcome of one run, and the files written beside it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;

/// The single number a summary table shows for an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyMetric {
    pub name: String,
    /// `null` when the metric is not defined for this run.
    pub value: Option<f64>,
    /// Open ends are `null`.
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl KeyMetric {
    pub fn new(name: &str, value: f64, min: Option<f64>, max: Option<f64>) -> Self {
        Self {
            name: name.to_string(),
            value: value.is_finite().then_some(value),
            min,
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub pass: bool,
    pub key_metric: KeyMetric,
    pub gates: BTreeMap<String, bool>,
    pub metrics: BTreeMap<String, Value>,
    pub config: ExperimentConfig,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub timestamp: u64,
}

/// A report plus the data files of the run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    /// `(file name, contents)`; contents use LF line endings.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        let mut json = serde_json::to_string_pretty(&self.report).map_err(io::Error::other)?;
        json.push('\n');
        std::fs::write(dir.join("report.json"), json)
    }
}

/// Collects gates and metrics while an experiment runs.
#[derive(Debug, Default)]
pub struct Builder {
    gates: BTreeMap<String, bool>,
    metrics: BTreeMap<String, Value>,
}

impl Builder {
    pub fn gate(&mut self, name: &str, ok: bool) -> &mut Self {
        self.gates.insert(name.to_string(), ok);
        self
    }

    pub fn metric(&mut self, name: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).expect("metrics serialize");
        self.metrics.insert(name.to_string(), v);
        self
    }

    pub fn finish(self, config: &ExperimentConfig, key: KeyMetric) -> Report {
        let pass = self.gates.values().all(|&g| g);
        Report {
            experiment: config.experiment.name().to_string(),
            pass,
            key_metric: key,
            gates: self.gates,
            metrics: self.metrics,
            config: config.clone(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// Two-column data with `#` header lines, readable by gnuplot.
pub fn plot_dat(title: &str, x_label: &str, y_label: &str, points: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut s = format!("# {title}\n# columns: {x_label} {y_label}\n");
    for (x, y) in points {
        if x.is_finite() && y.is_finite() {
            let _ = writeln!(s, "{x:e} {y:e}");
        }
    }
    s
}
