//! Configuration, orchestration, persistence and reporting.

pub mod compare;
pub mod config;
pub mod events;
pub mod report;
pub mod suite;

pub use compare::{compare_runs, Comparison};
pub use config::{AgentKind, AgentSpec, RunConfig};
pub use report::{emit_report, load_report, MetricReport, RunReport};
pub use suite::{run_suite, run_id};
