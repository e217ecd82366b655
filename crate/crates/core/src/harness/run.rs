//! Run orchestration: train or load a policy (or pick a solver), replay the
//! request schedule frame by frame and collect every metric.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::output::{write_outputs, EvalSummary, LatencyRow, MetricsReport, RunOutput, TraceRow, TrainingSummary};
use super::requests::{generate_requests, Request};
use crate::baselines::{
    alternating_suboptimal, exhaustive_oracle, greedy_heuristic, random_covering_placement, random_policy,
    InstanceSpec, OracleCaps, Solution,
};
use crate::env::{EpisodeConfig, StaticSchedule, SwarmEnv};
use crate::error::{Error, Result};
use crate::latency::LatencyBreakdown;
use crate::ppo::{evaluate, moving_average, Checkpoint, EpisodeRecord, PolicyNet, Trainer};
use crate::swarm::UavSpec;

/// Window used for every moving average in reports.
pub const AVERAGE_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Greedy,
    Random,
    Alternating,
    Oracle,
}

impl std::str::FromStr for Solver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Solver::Greedy),
            "random" => Ok(Solver::Random),
            "alternating" => Ok(Solver::Alternating),
            "oracle" => Ok(Solver::Oracle),
            other => Err(Error::config(format!("unknown solver {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// Train a policy (following `static_schedule` when set), then replay.
    Train,
    /// Replay with a saved policy.
    Eval { checkpoint: PathBuf },
    /// Replay with a non-learning solver.
    Baseline(Solver),
}

impl Mode {
    fn name(&self) -> String {
        match self {
            Mode::Train => "train".into(),
            Mode::Eval { .. } => "eval".into(),
            Mode::Baseline(s) => format!("baseline:{}", serde_json::to_value(s).unwrap().as_str().unwrap()),
        }
    }
}

/// Training-curve summary over the trailing window.
pub fn summarize_training(records: &[EpisodeRecord], steps: usize) -> TrainingSummary {
    let tail = &records[records.len().saturating_sub(AVERAGE_WINDOW)..];
    let mean = |f: &dyn Fn(&EpisodeRecord) -> f64| {
        if tail.is_empty() {
            0.0
        } else {
            tail.iter().map(f).sum::<f64>() / tail.len() as f64
        }
    };
    let accuracy: Vec<f64> = records.iter().map(|r| r.accuracy).collect();
    TrainingSummary {
        steps,
        episodes: records.len(),
        final_accuracy: mean(&|r| r.accuracy),
        final_feasible_fraction: mean(&|r| if r.feasible { 1.0 } else { 0.0 }),
        final_coverage: mean(&|r| r.coverage),
        final_reward: mean(&|r| r.reward),
        converged_episode: convergence_episode(&accuracy, AVERAGE_WINDOW, 0.01),
    }
}

/// First episode whose trailing `window` average lies within `tol`
/// (relative) of the final average.
pub fn convergence_episode(values: &[f64], window: usize, tol: f64) -> Option<usize> {
    if values.len() < window {
        return None;
    }
    let ma = moving_average(values, window);
    let last = *ma.last()?;
    let band = tol * last.abs().max(f64::EPSILON);
    (window - 1..ma.len()).find(|&k| (ma[k] - last).abs() <= band)
}

fn latency_row(req: &Request, latency: Option<&LatencyBreakdown>, cumulative: &mut u64) -> LatencyRow {
    if let Some(l) = latency {
        *cumulative += l.shared_bytes;
    }
    LatencyRow {
        request: req.id,
        frame: req.frame,
        source: req.source,
        feasible: latency.is_some(),
        source_transfer: latency.map(|l| l.source_transfer),
        compute: latency.map(|l| l.compute.iter().sum()),
        hop: latency.map(|l| l.hop_transfers.iter().sum()),
        total: latency.map(|l| l.total),
        shared_bytes: latency.map(|l| l.shared_bytes),
        cumulative_shared: *cumulative,
    }
}

fn summarize_eval(trace: &[TraceRow], rewards: &[EpisodeRecord], latency: &[LatencyRow]) -> EvalSummary {
    let n = rewards.len();
    let per = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
    let totals: Vec<f64> = latency.iter().filter_map(|l| l.total).collect();
    EvalSummary {
        requests: n,
        steps: trace.len(),
        step_accuracy: if trace.is_empty() {
            0.0
        } else {
            trace.iter().filter(|t| t.cons1 && t.cons2 && t.cons3).count() as f64 / trace.len() as f64
        },
        feasible_fraction: per(rewards.iter().filter(|r| r.feasible).count() as f64),
        mean_coverage: per(rewards.iter().map(|r| r.coverage).sum()),
        total_reward: trace.iter().map(|t| t.reward).sum(),
        total_penalty: trace.iter().map(|t| t.penalty).sum(),
        mean_latency: if totals.is_empty() {
            None
        } else {
            Some(totals.iter().sum::<f64>() / totals.len() as f64)
        },
        cumulative_shared_bytes: latency.last().map_or(0, |l| l.cumulative_shared),
    }
}

struct Replay {
    trace: Vec<TraceRow>,
    rewards: Vec<EpisodeRecord>,
    latency: Vec<LatencyRow>,
}

/// Replays `schedule` with a policy. Budgets persist across the requests
/// of a frame and are refilled when the next frame starts.
fn replay_policy(
    net: &PolicyNet,
    cfg: &ExperimentConfig,
    episode_cfg: &EpisodeConfig,
    schedule: &[Vec<Request>],
    path: Option<&StaticSchedule>,
) -> Result<Replay> {
    let mut frame_cfg = episode_cfg.clone();
    frame_cfg.frame_length = usize::MAX;
    let mut env = SwarmEnv::new(Arc::new(frame_cfg), cfg.seed.wrapping_add(1))?;
    let mut out = Replay {
        trace: Vec::new(),
        rewards: Vec::new(),
        latency: Vec::new(),
    };
    let mut cumulative = 0;
    for (f, frame) in schedule.iter().enumerate() {
        env.end_frame();
        let sources: Vec<usize> = frame.iter().map(|r| r.source).collect();
        let seed = cfg.seed.wrapping_mul(0x9e37_79b9).wrapping_add(f as u64);
        let episodes = evaluate(net, &mut env, &sources, path, cfg.eval_greedy, seed)?;
        for (req, ep) in frame.iter().zip(episodes) {
            out.trace.extend(ep.steps.iter().map(|s| TraceRow::from_step(req.id, f, s)));
            out.rewards.push(EpisodeRecord::new(req.id, &ep.summary, episode_cfg.swarm.len()));
            out.latency.push(latency_row(req, ep.summary.latency.as_ref(), &mut cumulative));
        }
    }
    Ok(out)
}

fn solve(solver: Solver, inst: &InstanceSpec, seed: u64) -> Result<Solution> {
    let caps = OracleCaps::default();
    match solver {
        Solver::Greedy => greedy_heuristic(inst),
        Solver::Random => Ok(random_policy(inst, 1, 100, seed)?.samples.remove(0)),
        Solver::Alternating => Ok(alternating_suboptimal(inst, 10, 4, &caps, seed)?.best),
        Solver::Oracle => exhaustive_oracle(inst, &caps),
    }
}

/// Per-layer latency of a single-placement plan: input transfer plus compute.
fn layer_latencies(sol: &Solution, inst: &InstanceSpec) -> Vec<f64> {
    let l = &sol.latency;
    sol.plan
        .assignment
        .iter()
        .enumerate()
        .map(|(j, &u)| {
            let transfer = if j == 0 { l.source_transfer } else { l.hop_transfers[j - 1] };
            transfer + inst.network.cost(j).compute as f64 / inst.swarm[u].speed
        })
        .collect()
}

/// Replays `schedule` with a solver. Each request sees what its frame has
/// left of every UAV's budget. A request that no longer fits is recorded
/// as infeasible; a frame whose first request already fails makes the whole
/// scenario infeasible.
fn replay_solver(
    solver: Solver,
    cfg: &ExperimentConfig,
    episode_cfg: &EpisodeConfig,
    schedule: &[Vec<Request>],
) -> Result<Replay> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let n = episode_cfg.swarm.len();
    let mut out = Replay {
        trace: Vec::new(),
        rewards: Vec::new(),
        latency: Vec::new(),
    };
    let mut cumulative = 0;
    for (f, frame) in schedule.iter().enumerate() {
        let mut remaining: Vec<UavSpec> = episode_cfg.swarm.clone();
        for (k, req) in frame.iter().enumerate() {
            let inst = InstanceSpec {
                network: episode_cfg.network.clone(),
                swarm: remaining.clone(),
                grid: episode_cfg.grid.clone(),
                radio: episode_cfg.radio.clone(),
                source: req.source,
                initial: random_covering_placement(&episode_cfg.grid, n, &mut rng)?,
            };
            let sol = match solve(solver, &inst, cfg.seed ^ req.id as u64) {
                Ok(s) => s,
                Err(e @ Error::Infeasible { .. }) if k == 0 => return Err(e),
                Err(Error::Infeasible { .. }) => {
                    out.rewards.push(EpisodeRecord {
                        episode: req.id,
                        reward: 0.0,
                        penalty: 0.0,
                        accuracy: 0.0,
                        feasible: false,
                        coverage: 1.0,
                        num_uavs: n,
                    });
                    out.latency.push(latency_row(req, None, &mut cumulative));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let cell_of = &sol.plan.placements[0];
            let mut reward = 0.0;
            for (j, (&u, pen)) in sol.plan.assignment.iter().zip(layer_latencies(&sol, &inst)).enumerate() {
                let r = -episode_cfg.penalty_scale * pen;
                reward += r;
                out.trace.push(TraceRow {
                    episode: req.id,
                    frame: f,
                    step: j,
                    layer: j,
                    uav: u,
                    a1: true,
                    a2: cell_of.cell_of(u),
                    cell: cell_of.cell_of(u),
                    cons1: true,
                    cons2: true,
                    cons3: true,
                    allocated: true,
                    penalty: pen,
                    qos: 0.0,
                    reward: r,
                });
                let cost = episode_cfg.network.cost(j);
                remaining[u].memory -= cost.memory;
                remaining[u].compute -= cost.compute;
            }
            out.rewards.push(EpisodeRecord {
                episode: req.id,
                reward,
                penalty: sol.total(),
                accuracy: 1.0,
                feasible: true,
                coverage: 1.0,
                num_uavs: n,
            });
            out.latency.push(latency_row(req, Some(&sol.latency), &mut cumulative));
        }
    }
    Ok(out)
}

/// Trains a policy as configured, stopping at the first episode boundary
/// after `train_steps` steps.
pub fn train_policy(cfg: &ExperimentConfig, episode_cfg: Arc<EpisodeConfig>) -> Result<Trainer> {
    let env = SwarmEnv::new(episode_cfg, cfg.seed)?;
    let mut trainer = Trainer::new(env, cfg.train.clone(), cfg.seed)?;
    if let Some(s) = &cfg.static_schedule {
        trainer = trainer.with_schedule(s.clone())?;
    }
    trainer.run_steps(cfg.train_steps)?;
    if !trainer.net().is_finite() {
        return Err(Error::Numeric("policy parameters diverged".into()));
    }
    Ok(trainer)
}

/// Runs one experiment entirely in memory.
pub fn run_experiment(cfg: &ExperimentConfig, mode: &Mode) -> Result<RunOutput> {
    let started = Instant::now();
    cfg.validate()?;
    let episode_cfg = cfg.shared_episode_config()?;
    let schedule = generate_requests(cfg.request_rate, cfg.frames, episode_cfg.swarm.len(), cfg.seed)?;
    let mut training = None;
    let mut checkpoint = None;
    let mut training_records = Vec::new();
    let replay = match mode {
        Mode::Train => {
            let trainer = train_policy(cfg, Arc::clone(&episode_cfg))?;
            training = Some(summarize_training(trainer.records(), trainer.steps()));
            training_records = trainer.records().to_vec();
            checkpoint = Some(Checkpoint::of(trainer.net()));
            replay_policy(trainer.net(), cfg, &episode_cfg, &schedule, cfg.static_schedule.as_ref())?
        }
        Mode::Eval { checkpoint: path } => {
            let net = Checkpoint::load(path)?.into_net()?;
            if net.shape().input != episode_cfg.state_len() || net.shape().cells != episode_cfg.grid.num_cells() {
                return Err(Error::config(format!(
                    "checkpoint {} does not match the configured grid",
                    path.display()
                )));
            }
            if let Some(s) = &cfg.static_schedule {
                s.validate(&episode_cfg.grid, episode_cfg.swarm.len(), episode_cfg.network.num_layers())?;
            }
            replay_policy(&net, cfg, &episode_cfg, &schedule, cfg.static_schedule.as_ref())?
        }
        Mode::Baseline(solver) => replay_solver(*solver, cfg, &episode_cfg, &schedule)?,
    };
    let eval = summarize_eval(&replay.trace, &replay.rewards, &replay.latency);
    if !(eval.total_reward.is_finite() && eval.total_penalty.is_finite()) {
        return Err(Error::Numeric("non-finite reward or penalty in replay".into()));
    }
    let report = MetricsReport {
        mode: mode.name(),
        scenario: cfg.scenario.clone(),
        network: episode_cfg.network.name().to_string(),
        num_uavs: episode_cfg.swarm.len(),
        seed: cfg.seed,
        penalty_scale: episode_cfg.penalty_scale,
        training,
        eval,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    report.validate()?;
    Ok(RunOutput {
        report,
        trace: replay.trace,
        rewards: replay.rewards,
        training_curve: training_records,
        latency: replay.latency,
        checkpoint,
    })
}

/// Runs an experiment and writes its artifacts to `cfg.output_dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, mode: &Mode) -> Result<RunOutput> {
    let out = run_experiment(cfg, mode)?;
    write_outputs(Path::new(&cfg.output_dir), &out)?;
    Ok(out)
}
