//! Synthetic feature oracle, experiment configuration, grid runner and reports.

mod config;
mod oracle;
mod report;
mod runner;

pub use config::{ExperimentConfig, GanSettings, Method, OracleConfig};
pub use oracle::{gen_synthetic, split_private, SyntheticData};
pub use report::{emit_report, ReportFormat, CSV_HEADER};
pub use runner::{run_experiment, ResultRow, ResultTable};
