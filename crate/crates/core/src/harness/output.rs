//! Row types, the metrics report and the files written for every run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::StepInfo;
use crate::error::{Error, Result};
use crate::ppo::{Checkpoint, EpisodeRecord};

pub const TRACE_FILE: &str = "trace.csv";
pub const REWARDS_FILE: &str = "rewards.csv";
pub const LATENCY_FILE: &str = "latency.csv";
pub const TRAINING_FILE: &str = "training.csv";
pub const REPORT_FILE: &str = "report.json";
pub const CHECKPOINT_FILE: &str = "policy.json";
pub const SCHEMA_FILE: &str = "csv_schema.json";

/// One environment step (or, for the solvers, one placed layer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub episode: usize,
    pub frame: usize,
    pub step: usize,
    pub layer: usize,
    pub uav: usize,
    pub a1: bool,
    pub a2: usize,
    pub cell: usize,
    pub cons1: bool,
    pub cons2: bool,
    pub cons3: bool,
    pub allocated: bool,
    pub penalty: f64,
    pub qos: f64,
    pub reward: f64,
}

impl TraceRow {
    pub fn from_step(episode: usize, frame: usize, s: &StepInfo) -> Self {
        TraceRow {
            episode,
            frame,
            step: s.step,
            layer: s.layer,
            uav: s.uav,
            a1: s.action.allocate,
            a2: s.action.target_cell,
            cell: s.cell,
            cons1: s.cons1,
            cons2: s.cons2,
            cons3: s.cons3,
            allocated: s.allocated,
            penalty: s.penalty,
            qos: s.qos,
            reward: s.reward,
        }
    }
}

/// Latency of one served request. Component columns are empty when the
/// request was not completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub request: usize,
    pub frame: usize,
    pub source: usize,
    pub feasible: bool,
    pub source_transfer: Option<f64>,
    pub compute: Option<f64>,
    pub hop: Option<f64>,
    pub total: Option<f64>,
    pub shared_bytes: Option<u64>,
    pub cumulative_shared: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub steps: usize,
    pub episodes: usize,
    /// Mean per-step constraint accuracy over the last 100 episodes.
    pub final_accuracy: f64,
    /// Fraction of the last 100 episodes that met every constraint.
    pub final_feasible_fraction: f64,
    pub final_coverage: f64,
    pub final_reward: f64,
    /// First episode whose 100-episode average accuracy is within 1% of
    /// the final average.
    pub converged_episode: Option<usize>,
}

/// Aggregates of the replayed request schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub requests: usize,
    pub steps: usize,
    /// Per-step constraint accuracy.
    pub step_accuracy: f64,
    /// Fraction of requests whose episode met every constraint.
    pub feasible_fraction: f64,
    pub mean_coverage: f64,
    pub total_reward: f64,
    /// Sum of unscaled step penalties, seconds.
    pub total_penalty: f64,
    /// Mean end-to-end latency over completed requests, seconds.
    pub mean_latency: Option<f64>,
    pub cumulative_shared_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: String,
    pub scenario: String,
    pub network: String,
    pub num_uavs: usize,
    pub seed: u64,
    pub penalty_scale: f64,
    pub training: Option<TrainingSummary>,
    pub eval: EvalSummary,
    pub wall_clock_secs: f64,
}

impl MetricsReport {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let e = &self.eval;
        let mut ok = unit(e.step_accuracy) && unit(e.feasible_fraction) && unit(e.mean_coverage);
        if let Some(t) = &self.training {
            ok &= unit(t.final_accuracy) && unit(t.final_coverage) && unit(t.final_feasible_fraction);
        }
        if !ok {
            return Err(Error::Numeric("report ratio outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Everything a run produces, before it touches the disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub trace: Vec<TraceRow>,
    /// Replayed requests, one row each.
    pub rewards: Vec<EpisodeRecord>,
    /// Training episodes; empty unless a policy was trained.
    pub training_curve: Vec<EpisodeRecord>,
    pub latency: Vec<LatencyRow>,
    pub checkpoint: Option<Checkpoint>,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Column documentation written next to the CSV files.
pub fn csv_schema() -> serde_json::Value {
    serde_json::json!({
        "version": 1,
        TRACE_FILE: {
            "episode": "request index within the replay",
            "frame": "frame the request arrived in",
            "step": "step within the episode",
            "layer": "layer under consideration",
            "uav": "UAV deciding at this step",
            "a1": "allocation decision",
            "a2": "requested target cell",
            "cell": "cell the UAV occupies after the step",
            "cons1": "layer-window exclusivity held",
            "cons2": "move was legal",
            "cons3": "resources sufficed",
            "allocated": "layer was assigned to this UAV",
            "penalty": "latency charged by the step, seconds",
            "qos": "hot-cell reward",
            "reward": "step reward"
        },
        REWARDS_FILE: {
            "episode": "request index of the replayed episode",
            "reward": "cumulative episode reward",
            "penalty": "episode latency penalty, seconds",
            "accuracy": "fraction of steps meeting all constraints",
            "feasible": "every step met all constraints",
            "coverage": "fraction of hot cells visited",
            "num_uavs": "swarm size during the episode"
        },
        TRAINING_FILE: "same columns as rewards.csv, one row per training episode",
        LATENCY_FILE: {
            "request": "request index",
            "frame": "frame the request arrived in",
            "source": "UAV that captured the image",
            "feasible": "every layer was placed",
            "source_transfer": "image transfer to the first executor, seconds",
            "compute": "compute time summed over UAVs, seconds",
            "hop": "intermediate transfers, seconds",
            "total": "end-to-end latency, seconds",
            "shared_bytes": "bytes sent between UAVs",
            "cumulative_shared": "running total of shared bytes"
        }
    })
}

/// Writes every artifact of `out` into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&dir.join(TRACE_FILE), &out.trace)?;
    write_csv(&dir.join(REWARDS_FILE), &out.rewards)?;
    write_csv(&dir.join(LATENCY_FILE), &out.latency)?;
    if !out.training_curve.is_empty() {
        write_csv(&dir.join(TRAINING_FILE), &out.training_curve)?;
    }
    std::fs::write(dir.join(SCHEMA_FILE), serde_json::to_string_pretty(&csv_schema())?)?;
    std::fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(&out.report)?)?;
    if let Some(c) = &out.checkpoint {
        c.save(&dir.join(CHECKPOINT_FILE))?;
    }
    Ok(())
}
