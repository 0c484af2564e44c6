//! Run summaries: named metrics with thresholds, plus tables.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `value <= threshold`
    AtMost,
    /// `value >= threshold`
    AtLeast,
    /// `|value - target| <= threshold`
    Within { target: f64 },
    /// Reported only.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub analysis: String,
    pub value: f64,
    pub threshold: Option<f64>,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Metric {
    fn evaluate(&mut self) {
        self.pass = match (self.comparison, self.threshold) {
            (Comparison::Info, _) => true,
            (_, None) => true,
            (Comparison::AtMost, Some(t)) => self.value <= t,
            (Comparison::AtLeast, Some(t)) => self.value >= t,
            (Comparison::Within { target }, Some(t)) => (self.value - target).abs() <= t,
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub version: String,
    pub metrics: Vec<Metric>,
    /// Plot-ready tables, e.g. convergence rows.
    #[serde(default)]
    pub tables: BTreeMap<String, Vec<BTreeMap<String, f64>>>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub errors: Vec<String>,
    pub runtime_seconds: f64,
}

impl RunSummary {
    pub fn new(scenario: &str, seed: u64) -> Self {
        RunSummary {
            schema_version: SUMMARY_SCHEMA_VERSION,
            scenario: scenario.to_string(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            metrics: Vec::new(),
            tables: BTreeMap::new(),
            warnings: Vec::new(),
            errors: Vec::new(),
            runtime_seconds: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.metrics.iter().all(|m| m.pass)
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.metric(name).map(|m| m.value)
    }

    pub fn failures(&self) -> Vec<&Metric> {
        self.metrics.iter().filter(|m| !m.pass).collect()
    }

    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)
    }

    pub fn read_json(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Fixed-width metric table.
    pub fn render(&self) -> String {
        let mut out = format!("scenario {} (seed {}, {:.2} s)\n", self.scenario, self.seed, self.runtime_seconds);
        let width = self.metrics.iter().map(|m| m.name.len()).max().unwrap_or(6).max(6);
        out += &format!("{:<width$}  {:>13}  {:>22}  status\n", "metric", "value", "threshold");
        for m in &self.metrics {
            let bound = match (m.comparison, m.threshold) {
                (Comparison::Info, _) | (_, None) => "-".to_string(),
                (Comparison::AtMost, Some(t)) => format!("<= {t:.3e}"),
                (Comparison::AtLeast, Some(t)) => format!(">= {t:.3e}"),
                (Comparison::Within { target }, Some(t)) => format!("{target:.3} +- {t:.2e}"),
            };
            let status = if m.comparison == Comparison::Info { "info" } else if m.pass { "pass" } else { "FAIL" };
            out += &format!("{:<width$}  {:>13.6e}  {:>22}  {status}\n", m.name, m.value, bound);
        }
        for w in &self.warnings {
            out += &format!("warning: {w}\n");
        }
        for e in &self.errors {
            out += &format!("error: {e}\n");
        }
        out
    }
}

/// Collects metrics for one analysis, applying threshold overrides.
pub struct Recorder<'a> {
    pub summary: &'a mut RunSummary,
    pub overrides: &'a BTreeMap<String, f64>,
    pub analysis: String,
    /// Appended to metric names when an analysis kind repeats.
    pub suffix: String,
}

impl Recorder<'_> {
    fn push(&mut self, name: &str, value: f64, threshold: Option<f64>, comparison: Comparison) {
        let name = &format!("{name}{}", self.suffix);
        let threshold = self.overrides.get(name).copied().or(threshold);
        let mut m = Metric { name: name.to_string(), analysis: self.analysis.clone(), value, threshold, comparison, pass: false };
        m.evaluate();
        // a NaN never passes a check
        if value.is_nan() && comparison != Comparison::Info {
            m.pass = false;
        }
        self.summary.metrics.push(m);
    }

    pub fn at_most(&mut self, name: &str, value: f64, threshold: f64) {
        self.push(name, value, Some(threshold), Comparison::AtMost);
    }

    pub fn at_least(&mut self, name: &str, value: f64, threshold: f64) {
        self.push(name, value, Some(threshold), Comparison::AtLeast);
    }

    pub fn within(&mut self, name: &str, value: f64, target: f64, threshold: f64) {
        self.push(name, value, Some(threshold), Comparison::Within { target });
    }

    pub fn info(&mut self, name: &str, value: f64) {
        self.push(name, value, None, Comparison::Info);
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.summary.warnings.push(format!("{}: {}", self.analysis, message.into()));
    }

    pub fn fail(&mut self, message: impl std::fmt::Display) {
        self.summary.errors.push(format!("{}: {message}", self.analysis));
    }

    pub fn table(&mut self, name: &str, rows: Vec<BTreeMap<String, f64>>) {
        self.summary.tables.insert(name.to_string(), rows);
    }
}
