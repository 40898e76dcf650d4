//! Experiment harness: method registry, configuration, runner, result
//! tables, reports and the labeling-cost model.

pub mod config;
pub mod cost;
pub mod registry;
pub mod report;
pub mod results;
pub mod runner;

pub use config::{DatasetSource, ExperimentConfig, MethodOptions, Strategy};
pub use cost::{cost_estimate, CostEstimate};
pub use registry::{find_method, fit_predict, method_registry, CellData, MethodDescriptor, MethodKind, MethodSettings};
pub use report::{aggregate_report, write_report, GroupBy, ReportBundle, ReportConfig};
pub use results::{read_results, write_results, Metric, RunResult};
pub use runner::{run_experiment, run_to_dir};
