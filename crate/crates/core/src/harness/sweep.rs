//! Parameter sweeps and the minimum-swarm search.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::output::write_csv;
use super::run::{run_to_dir, Mode, Solver};
use crate::error::{Error, Result};

pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Device speed of a homogeneous swarm, in `swarm.speed_unit` units.
    Speed,
    /// Per-UAV memory budget, bytes.
    Memory,
    /// Swarm size; each point trains a policy.
    Uavs,
}

impl std::str::FromStr for SweepKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speed" => Ok(SweepKind::Speed),
            "memory" => Ok(SweepKind::Memory),
            "uavs" => Ok(SweepKind::Uavs),
            other => Err(Error::config(format!("unknown sweep {other:?}"))),
        }
    }
}

impl SweepKind {
    fn label(self) -> &'static str {
        match self {
            SweepKind::Speed => "speed",
            SweepKind::Memory => "memory",
            SweepKind::Uavs => "uavs",
        }
    }

    /// Values used when none are given.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepKind::Speed => vec![256.0, 512.0, 560.0],
            SweepKind::Memory => vec![(256u64 << 20) as f64, (512u64 << 20) as f64, (1u64 << 30) as f64],
            SweepKind::Uavs => vec![3.0, 4.0, 5.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub kind: SweepKind,
    pub value: f64,
    pub requests: usize,
    pub feasible_fraction: f64,
    pub mean_latency: Option<f64>,
    pub cumulative_shared_bytes: u64,
    pub final_accuracy: Option<f64>,
    pub converged_episode: Option<usize>,
}

/// Config for one sweep point.
pub fn point_config(base: &ExperimentConfig, kind: SweepKind, value: f64) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    match kind {
        SweepKind::Speed => cfg.swarm.speeds = vec![value],
        SweepKind::Memory => {
            if !(value >= 0.0 && value.fract() == 0.0) {
                return Err(Error::config(format!("memory sweep value {value} is not a byte count")));
            }
            cfg.swarm.memory = value as u64;
        }
        SweepKind::Uavs => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(Error::config(format!("swarm size {value} is not a positive integer")));
            }
            cfg.swarm.count = value as usize;
        }
    }
    cfg.scenario = format!("{}-{}-{}", base.scenario, kind.label(), value);
    cfg.output_dir = base.output_dir.join(format!("{}-{}", kind.label(), value));
    Ok(cfg)
}

/// Runs every point of a sweep concurrently, each into its own
/// subdirectory of `base.output_dir`, and writes `sweep.csv`. Speed and
/// memory points replay the greedy solver; swarm-size points train.
pub fn run_sweep(base: &ExperimentConfig, kind: SweepKind, values: &[f64]) -> Result<Vec<SweepPoint>> {
    base.validate()?;
    let configs = values
        .iter()
        .map(|&v| point_config(base, kind, v))
        .collect::<Result<Vec<_>>>()?;
    let mode = match kind {
        SweepKind::Uavs => Mode::Train,
        SweepKind::Speed | SweepKind::Memory => Mode::Baseline(Solver::Greedy),
    };
    let points = configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(cfg, &value)| {
            let out = run_to_dir(cfg, &mode)?;
            let e = &out.report.eval;
            Ok(SweepPoint {
                kind,
                value,
                requests: e.requests,
                feasible_fraction: e.feasible_fraction,
                mean_latency: e.mean_latency,
                cumulative_shared_bytes: e.cumulative_shared_bytes,
                final_accuracy: out.report.training.as_ref().map(|t| t.final_accuracy),
                converged_episode: out.report.training.as_ref().and_then(|t| t.converged_episode),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&base.output_dir)?;
    write_csv(&Path::new(&base.output_dir).join(SWEEP_FILE), &points)?;
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinUavResult {
    /// Smallest feasible swarm size, if any in range.
    pub minimum: Option<usize>,
    /// Every size evaluated, with its score.
    pub evaluated: BTreeMap<usize, f64>,
    /// Whether the linear scan had to replace the binary search.
    pub linear_fallback: bool,
}

/// Smallest `n` in `[max(lo, hot), hi]` with `score(n) >= threshold`.
/// Binary search assumes feasibility is monotone in `n`; when the probed
/// points contradict that, or nothing was found, every size is scanned in
/// order instead.
pub fn min_uav_search<F>(lo: usize, hi: usize, hot: usize, threshold: f64, mut score: F) -> Result<MinUavResult>
where
    F: FnMut(usize) -> Result<f64>,
{
    let lo = lo.max(hot).max(1);
    if lo > hi {
        return Err(Error::config(format!("empty swarm-size range [{lo}, {hi}]")));
    }
    let mut evaluated = BTreeMap::new();
    let mut eval = |n: usize, evaluated: &mut BTreeMap<usize, f64>| -> Result<bool> {
        if let Some(&s) = evaluated.get(&n) {
            return Ok(s >= threshold);
        }
        let s = score(n)?;
        evaluated.insert(n, s);
        Ok(s >= threshold)
    };
    let (mut a, mut b) = (lo, hi + 1);
    while a < b {
        let mid = a + (b - a) / 2;
        if eval(mid, &mut evaluated)? {
            b = mid;
        } else {
            a = mid + 1;
        }
    }
    let candidate = (a <= hi).then_some(a);
    let monotone = {
        let mut seen_feasible = false;
        evaluated.values().all(|&s| {
            let ok = s >= threshold;
            let fine = ok || !seen_feasible;
            seen_feasible |= ok;
            fine
        })
    };
    if monotone && candidate.is_some() {
        return Ok(MinUavResult {
            minimum: candidate,
            evaluated,
            linear_fallback: false,
        });
    }
    let mut minimum = None;
    for n in lo..=hi {
        if eval(n, &mut evaluated)? {
            minimum = Some(n);
            break;
        }
    }
    Ok(MinUavResult {
        minimum,
        evaluated,
        linear_fallback: true,
    })
}

/// [`min_uav_search`] where each size is scored by the trained policy's
/// final constraint accuracy.
pub fn min_uav_search_trained(base: &ExperimentConfig, lo: usize, hi: usize, threshold: f64) -> Result<MinUavResult> {
    base.validate()?;
    let hot = base.grid.hot_cells.len();
    min_uav_search(lo, hi, hot, threshold, |n| {
        let cfg = point_config(base, SweepKind::Uavs, n as f64)?;
        let trainer = super::run::train_policy(&cfg, cfg.shared_episode_config()?)?;
        Ok(super::run::summarize_training(trainer.records(), trainer.steps()).final_accuracy)
    })
}
