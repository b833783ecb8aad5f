//! Closed-loop simulation: scenario files, state layout, stepping, logs and
//! summary statistics.

pub mod analysis;
pub mod config;
pub mod integrator;
pub mod log;
pub mod measurements;
pub mod metrics;
pub mod run;
pub mod world;

pub use analysis::{scenario_gain_report, BoundOverrides};
pub use config::{ControlMode, ScenarioConfig, TruthFrame, WeightInit};
pub use integrator::rk4_step;
pub use log::{read_csv, LogRow, TrajectoryLog, CSV_COLUMNS};
pub use metrics::{summarize_metrics, MetricsSpec, RunMetrics};
pub use run::{run_scenario, run_with_metrics, RunOutput, RunSummary, Simulation};
pub use world::World;
