//! Batch runner: loads a JSON run configuration, executes one experiment and
//! writes a self-describing report with its data files.

pub mod compare;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use compare::{compare_runs, Comparison, RecordDiff};
pub use config::{schema, ExperimentKind, RunConfig, StateSpec, Tolerances, CONFIG_VERSION};
pub use error::{RunnerError, EXIT_CHECK_FAILED, EXIT_INVALID_INPUT, EXIT_PASS};
pub use experiments::run;
pub use report::{CheckRecord, RunReport, Status};
