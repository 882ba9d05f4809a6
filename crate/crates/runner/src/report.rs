use std::path::Path;

use qtomo::weyl::PhaseGrid;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentKind, RunConfig};
use crate::error::RunnerError;

/// One measured quantity. A record passes when `value <= tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// `None` when the computation itself failed.
    pub value: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    /// Standard error of `value`, for sampled quantities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckRecord {
    pub fn measured(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value: Some(value), tolerance, pass: value <= tolerance, std_error: None, error: None }
    }

    pub fn sampled(name: impl Into<String>, value: f64, tolerance: f64, std_error: f64) -> Self {
        Self { std_error: Some(std_error), ..Self::measured(name, value, tolerance) }
    }

    pub fn failed(name: impl Into<String>, tolerance: f64, error: impl ToString) -> Self {
        Self { name: name.into(), value: None, tolerance, pass: false, std_error: None, error: Some(error.to_string()) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub precision: String,
    pub crate_version: String,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<PhaseGrid>,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: ExperimentKind,
    pub status: Status,
    pub records: Vec<CheckRecord>,
    pub environment: Environment,
    pub timings: Vec<Timing>,
    /// Data files written next to the report.
    pub outputs: Vec<String>,
    pub config: RunConfig,
}

impl RunReport {
    pub fn new(config: RunConfig, records: Vec<CheckRecord>, timings: Vec<Timing>, outputs: Vec<String>) -> Self {
        let status = if records.iter().all(|r| r.pass) { Status::Pass } else { Status::Fail };
        let environment = Environment {
            precision: "f64".into(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            dimension: config.representation.dim(),
            grid: config.representation.grid(),
            seeds: config.seeds(),
        };
        Self { experiment: config.experiment, status, records, environment, timings, outputs, config }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn record(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| RunnerError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), RunnerError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| RunnerError::Io(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}
