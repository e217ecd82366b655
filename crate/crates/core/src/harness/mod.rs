//! Experiment orchestration: configuration, request arrivals, runs,
//! sweeps and swarm events, and the files they leave behind.

pub mod config;
pub mod dynamic;
pub mod output;
pub mod requests;
pub mod run;
pub mod sweep;

pub use config::{ExperimentConfig, Overrides, SwarmConfig, CONFIG_VERSION};
pub use dynamic::{check_events, dynamic_swarm_run, recovery_after, DynamicRun, Recovery, SwarmChange, SwarmEvent};
pub use output::{
    csv_schema, read_csv, write_outputs, EvalSummary, LatencyRow, MetricsReport, RunOutput, TraceRow, TrainingSummary,
};
pub use requests::{generate_requests, Request};
pub use run::{convergence_episode, run_experiment, run_to_dir, summarize_training, train_policy, Mode, Solver};
pub use sweep::{min_uav_search, min_uav_search_trained, point_config, run_sweep, MinUavResult, SweepKind, SweepPoint};
