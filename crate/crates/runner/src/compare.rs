//! Regression comparison of two run reports.

use serde::{Deserialize, Serialize};

use crate::error::RunnerError;
use crate::report::RunReport;

/// Two sampled values agree statistically within this many combined standard errors.
pub const STATISTICAL_SIGMAS: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordDiff {
    pub name: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub rel_diff: f64,
    /// The difference is covered by the reported Monte Carlo error bars.
    pub statistical_ok: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Records whose values differ by more than the relative tolerance.
    pub diffs: Vec<RecordDiff>,
    /// Record names present in only one report.
    pub unmatched: Vec<String>,
}

impl Comparison {
    pub fn is_empty(&self) -> bool {
        self.diffs.is_empty() && self.unmatched.is_empty()
    }

    /// True when every difference is explained by sampling error.
    pub fn is_consistent(&self) -> bool {
        self.unmatched.is_empty() && self.diffs.iter().all(|d| d.statistical_ok)
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Field-by-field relative comparison of reports from the same experiment.
pub fn compare_runs(a: &RunReport, b: &RunReport, rtol: f64) -> Result<Comparison, RunnerError> {
    if !(rtol >= 0.0) {
        return Err(RunnerError::Incomparable(format!("relative tolerance must be non-negative, got {rtol}")));
    }
    if a.experiment != b.experiment {
        return Err(RunnerError::Incomparable(format!("experiment kinds differ: {:?} vs {:?}", a.experiment, b.experiment)));
    }
    if a.config.representation != b.config.representation {
        return Err(RunnerError::Incomparable("representations differ".into()));
    }
    let mut out = Comparison::default();
    for ra in &a.records {
        let Some(rb) = b.record(&ra.name) else {
            out.unmatched.push(ra.name.clone());
            continue;
        };
        let (d, same) = match (ra.value, rb.value) {
            (Some(x), Some(y)) => (rel_diff(x, y), rel_diff(x, y) <= rtol),
            (None, None) => (0.0, true),
            _ => (f64::INFINITY, false),
        };
        if same {
            continue;
        }
        let statistical_ok = match (ra.value, rb.value, ra.std_error, rb.std_error) {
            (Some(x), Some(y), Some(sa), Some(sb)) => (x - y).abs() <= STATISTICAL_SIGMAS * (sa * sa + sb * sb).sqrt(),
            _ => false,
        };
        out.diffs.push(RecordDiff { name: ra.name.clone(), a: ra.value, b: rb.value, rel_diff: d, statistical_ok });
    }
    for rb in &b.records {
        if a.record(&rb.name).is_none() {
            out.unmatched.push(rb.name.clone());
        }
    }
    Ok(out)
}
