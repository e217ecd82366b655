//! Rollout collection and the update loop.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::buffer::{RolloutBuffer, Sample};
use super::net::{PolicyNet, Shape};
use super::update::{action_log_prob, ppo_update, LossStats};
use super::TrainConfig;
use crate::env::{Action, EpisodeSummary, StaticSchedule, StepInfo, SwarmEnv};
use crate::error::{Error, Result};

/// One row of the training curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub reward: f64,
    /// Unscaled latency penalty, seconds.
    pub penalty: f64,
    /// Fraction of steps meeting all three constraints.
    pub accuracy: f64,
    pub feasible: bool,
    pub coverage: f64,
    pub num_uavs: usize,
}

impl EpisodeRecord {
    pub fn new(episode: usize, s: &EpisodeSummary, num_uavs: usize) -> Self {
        EpisodeRecord {
            episode,
            reward: s.reward,
            penalty: s.penalty,
            accuracy: s.accuracy(),
            feasible: s.feasible,
            coverage: s.hot_coverage,
            num_uavs,
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize> {
    let dist = WeightedIndex::new(probs).map_err(|e| Error::Numeric(format!("bad policy distribution: {e}")))?;
    Ok(dist.sample(rng))
}

/// Picks an action for the environment's current cursor. Returns the
/// action, its log-probability and the value estimate.
pub fn act<R: Rng + ?Sized>(
    net: &PolicyNet,
    env: &SwarmEnv,
    obs: &[f64],
    schedule: Option<&StaticSchedule>,
    greedy: bool,
    rng: &mut R,
) -> Result<(Action, Option<usize>, f64, f64)> {
    let fwd = net.forward(obs)?;
    let pa = fwd.alloc_probs();
    let allocate = if greedy { pa[1] > pa[0] } else { sample_index(&pa, rng)? == 1 };
    let forced = schedule.map(|s| {
        let (layer, uav) = env.cursor();
        s.target(layer, uav)
    });
    let cell = match forced {
        Some(c) => c,
        None if greedy => argmax(&fwd.cell_logits),
        None => sample_index(&fwd.cell_probs(), rng)?,
    };
    let lp = action_log_prob(&fwd.alloc_logits, &fwd.cell_logits, allocate, cell, forced.is_some());
    Ok((Action { allocate, target_cell: cell }, forced, lp, fwd.value))
}

pub struct Trainer {
    cfg: TrainConfig,
    net: PolicyNet,
    opt: Adam,
    env: SwarmEnv,
    rng: ChaCha8Rng,
    buffer: RolloutBuffer,
    schedule: Option<StaticSchedule>,
    obs: Option<Vec<f64>>,
    records: Vec<EpisodeRecord>,
    losses: Vec<LossStats>,
    steps: usize,
}

impl Trainer {
    pub fn new(env: SwarmEnv, cfg: TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = Shape {
            input: env.config().state_len(),
            hidden: cfg.hidden,
            cells: env.config().grid.num_cells(),
        };
        let net = PolicyNet::random(shape, &mut rng);
        let opt = Adam::new(net.num_params(), cfg.learning_rate);
        Ok(Trainer {
            buffer: RolloutBuffer::new(cfg.batch_size),
            cfg,
            net,
            opt,
            env,
            rng,
            schedule: None,
            obs: None,
            records: Vec::new(),
            losses: Vec::new(),
            steps: 0,
        })
    }

    /// Freezes movement to `schedule`; only allocation is learned.
    pub fn with_schedule(mut self, schedule: StaticSchedule) -> Result<Self> {
        let c = self.env.config();
        schedule.validate(&c.grid, c.swarm.len(), c.network.num_layers())?;
        self.schedule = Some(schedule);
        Ok(self)
    }

    pub fn net(&self) -> &PolicyNet {
        &self.net
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn env(&self) -> &SwarmEnv {
        &self.env
    }

    /// Mutable environment access for swarm events. Only valid between
    /// episodes, which is where `run_episodes` always stops.
    pub fn env_mut(&mut self) -> &mut SwarmEnv {
        &mut self.env
    }

    pub fn records(&self) -> &[EpisodeRecord] {
        &self.records
    }

    pub fn losses(&self) -> &[LossStats] {
        &self.losses
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn schedule(&self) -> Option<&StaticSchedule> {
        self.schedule.as_ref()
    }

    fn begin_episode(&mut self) -> Result<Vec<f64>> {
        match &self.schedule {
            Some(s) => {
                let n = self.env.config().swarm.len();
                let source = self.rng.random_range(0..n);
                self.env.reset_with_placement(source, s.initial().clone())
            }
            None => self.env.reset(),
        }
    }

    /// One environment step plus an update whenever the buffer fills.
    fn step(&mut self) -> Result<bool> {
        let obs = match self.obs.take() {
            Some(o) => o,
            None => self.begin_episode()?,
        };
        let (action, forced, log_prob, value) =
            act(&self.net, &self.env, &obs, self.schedule.as_ref(), false, &mut self.rng)?;
        let t = self.env.step(action).map_err(|e| match e {
            Error::Numeric(m) => Error::Numeric(format!("episode {}: {m}", self.records.len())),
            other => other,
        })?;
        self.steps += 1;
        self.buffer.push(
            Sample {
                observation: obs,
                allocate: action.allocate,
                cell: action.target_cell,
                forced_cell: forced,
                log_prob,
                reward: t.reward,
                value,
                done: t.done,
            },
            t.observation.clone(),
        );
        if t.done {
            let summary = self.env.summary()?;
            let n = self.env.config().swarm.len();
            self.records.push(EpisodeRecord::new(self.records.len(), &summary, n));
        } else {
            self.obs = Some(t.observation);
        }
        if self.buffer.is_full() {
            let stats = ppo_update(&mut self.net, &mut self.opt, &self.buffer, &self.cfg, &mut self.rng)?;
            self.losses.push(stats.last());
            self.buffer.clear();
        }
        Ok(t.done)
    }

    /// Trains for at least `steps` environment steps, stopping at the next
    /// episode boundary.
    pub fn run_steps(&mut self, steps: usize) -> Result<()> {
        let target = self.steps + steps;
        while self.steps < target || self.obs.is_some() {
            self.step()?;
        }
        Ok(())
    }

    /// Trains until `episodes` more episodes have finished.
    pub fn run_episodes(&mut self, episodes: usize) -> Result<()> {
        let mut done = 0;
        while done < episodes {
            if self.step()? {
                done += 1;
            }
        }
        Ok(())
    }
}

/// Per-episode outcome of a policy replay, with its step trace.
#[derive(Debug, Clone)]
pub struct EvalEpisode {
    pub summary: EpisodeSummary,
    pub steps: Vec<StepInfo>,
}

/// Plays one episode per entry of `sources` without learning.
pub fn evaluate(
    net: &PolicyNet,
    env: &mut SwarmEnv,
    sources: &[usize],
    schedule: Option<&StaticSchedule>,
    greedy: bool,
    seed: u64,
) -> Result<Vec<EvalEpisode>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(sources.len());
    for &source in sources {
        let mut obs = match schedule {
            Some(s) => env.reset_with_placement(source, s.initial().clone())?,
            None => env.reset_with_source(source)?,
        };
        let mut steps = Vec::with_capacity(env.config().episode_length());
        while !env.is_done() {
            let (action, _, _, _) = act(net, env, &obs, schedule, greedy, &mut rng)?;
            let t = env.step(action)?;
            steps.push(t.info);
            obs = t.observation;
        }
        out.push(EvalEpisode {
            summary: env.summary()?,
            steps,
        });
    }
    Ok(out)
}

/// Trailing moving average with window `w` (shorter at the start).
pub fn moving_average(values: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (k, &v) in values.iter().enumerate() {
        sum += v;
        if k >= w {
            sum -= values[k - w];
        }
        out.push(sum / (k + 1).min(w) as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::build_network;
    use crate::env::EpisodeConfig;
    use crate::radio::{GridConfig, Placement};
    use crate::swarm::roster;
    use std::sync::Arc;

    fn small_env(seed: u64) -> SwarmEnv {
        let grid = GridConfig::new(3, 20.0, vec![4]).unwrap();
        let cfg = EpisodeConfig::new(build_network("LeNet").unwrap(), roster(2, &[256e6], 1 << 30, 1 << 40), grid);
        SwarmEnv::new(Arc::new(cfg), seed).unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 64,
            minibatch_size: 32,
            hidden: 16,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn identical_seeds_give_identical_curves() {
        let run = || {
            let mut t = Trainer::new(small_env(3), small_cfg(), 9).unwrap();
            t.run_steps(300).unwrap();
            t.records().to_vec()
        };
        let a = run();
        assert!(!a.is_empty());
        assert_eq!(a, run());
    }

    #[test]
    fn run_steps_stops_on_episode_boundary() {
        let mut t = Trainer::new(small_env(0), small_cfg(), 0).unwrap();
        t.run_steps(7).unwrap();
        assert_eq!(t.steps() % 10, 0);
        assert!(t.env().is_done());
        let spec = t.env().config().swarm[0].clone();
        t.env_mut().add_uav(spec).unwrap();
        t.run_episodes(2).unwrap();
        assert_eq!(t.records().last().unwrap().num_uavs, 3);
    }

    #[test]
    fn schedule_forces_movement() {
        let sched = StaticSchedule {
            placements: vec![Placement::new(vec![0, 8])],
        };
        let mut t = Trainer::new(small_env(0), small_cfg(), 0).unwrap().with_schedule(sched.clone()).unwrap();
        t.run_episodes(3).unwrap();
        let mut env = small_env(1);
        let eps = evaluate(t.net(), &mut env, &[0, 1], Some(&sched), true, 0).unwrap();
        for e in eps {
            assert!(e.steps.iter().all(|s| s.cons2));
            assert!(e.steps.iter().all(|s| s.cell == if s.uav == 0 { 0 } else { 8 }));
        }
        let bad = StaticSchedule {
            placements: vec![Placement::new(vec![3, 3])],
        };
        assert!(Trainer::new(small_env(0), small_cfg(), 0).unwrap().with_schedule(bad).is_err());
    }

    #[test]
    fn moving_average_window() {
        assert_eq!(moving_average(&[1.0, 3.0, 5.0, 7.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
    }
}
