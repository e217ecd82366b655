//! Episodic environment: one episode distributes one request.
//!
//! The cursor walks layers in the outer loop and UAVs in the inner loop, so
//! an episode lasts `L * N` steps. At every step the cursor UAV moves to the
//! requested cell and may take the current layer. The N steps that share a
//! layer form that layer's *window*.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::catalog::{LayerCost, NetworkSpec};
use crate::error::{Error, Result};
use crate::latency::{total_latency_with_budgets, AllocationPlan, LatencyBreakdown, ValidationOptions};
use crate::radio::{GridConfig, Placement, RadioParams};
use crate::swarm::{Budgets, UavSpec};

/// Number of scalar features ahead of the two grid blocks.
pub const SCALAR_FEATURES: usize = 4;

#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    pub network: NetworkSpec,
    pub swarm: Vec<UavSpec>,
    pub grid: GridConfig,
    pub radio: RadioParams,
    /// QoS weight `S_f`.
    pub qos_factor: f64,
    /// Multiplier applied to latency penalties (seconds) before they enter
    /// the reward. Defaults to [`EpisodeConfig::auto_penalty_scale`].
    pub penalty_scale: f64,
    /// Requests per frame; budgets are restored at frame boundaries.
    pub frame_length: usize,
    /// Visits owed by each hot cell at the start of an episode.
    pub hot_cell_demand: u32,
    /// Restrict moves to the 8-neighbourhood.
    pub adjacent_moves_only: bool,
}

impl EpisodeConfig {
    pub fn new(network: NetworkSpec, swarm: Vec<UavSpec>, grid: GridConfig) -> Self {
        let mut cfg = EpisodeConfig {
            network,
            swarm,
            grid,
            radio: RadioParams::default(),
            qos_factor: 1.0,
            penalty_scale: 0.0,
            frame_length: 1,
            hot_cell_demand: 1,
            adjacent_moves_only: false,
        };
        cfg.penalty_scale = cfg.auto_penalty_scale();
        cfg
    }

    /// Slowest single allocation: the largest layer input sent across the
    /// grid diagonal, then computed on the slowest UAV. Seconds.
    pub fn worst_allocation_latency(&self) -> f64 {
        let net = &self.network;
        let slowest = self.swarm.iter().map(|u| u.speed).fold(f64::INFINITY, f64::min);
        let last = self.grid.num_cells().saturating_sub(1);
        let rate = self.radio.rate_between_cells(&self.grid, 0, last).ok();
        (0..net.num_layers())
            .map(|j| {
                let bytes = if j == 0 { net.input_bytes() } else { net.cost(j - 1).output_bytes };
                let transfer = rate.map_or(0.0, |r| bytes as f64 * 8.0 / r);
                transfer + net.cost(j).compute as f64 / slowest
            })
            .fold(0.0, f64::max)
    }

    /// Scale that maps [`worst_allocation_latency`](Self::worst_allocation_latency)
    /// to a penalty of 0.5, so a single allocation never outweighs the
    /// constraint reward it earns.
    pub fn auto_penalty_scale(&self) -> f64 {
        let worst = self.worst_allocation_latency();
        if worst.is_finite() && worst > 0.0 {
            0.5 / worst
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.radio.validate()?;
        self.grid.validate_swarm_size(self.swarm.len())?;
        for uav in &self.swarm {
            uav.validate()?;
        }
        if self.frame_length == 0 {
            return Err(Error::config("frame length must be >= 1"));
        }
        if !(self.qos_factor >= 0.0 && self.qos_factor.is_finite()) {
            return Err(Error::config("QoS factor must be finite and >= 0"));
        }
        if !(self.penalty_scale >= 0.0 && self.penalty_scale.is_finite()) {
            return Err(Error::config("penalty scale must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn episode_length(&self) -> usize {
        self.network.num_layers() * self.swarm.len()
    }

    /// Length of the encoded observation, `2C + 4`.
    pub fn state_len(&self) -> usize {
        2 * self.grid.num_cells() + SCALAR_FEATURES
    }
}

/// Two-part action: allocate the current layer here, and fly to a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Action {
    pub allocate: bool,
    pub target_cell: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub layer: usize,
    pub num_layers: usize,
    pub uav: usize,
    pub num_uavs: usize,
    pub memory_left: u64,
    pub memory_cap: u64,
    pub compute_left: u64,
    pub compute_cap: u64,
    pub occupied: Vec<bool>,
    pub hot: Vec<bool>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn unit_index(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

/// `[layer, uav, memory, compute]` scaled to `[0, 1]`, then UAV occupancy
/// and hot cells as one-hot blocks.
pub fn encode_state(state: &EnvState) -> Vec<f64> {
    let mut v = Vec::with_capacity(SCALAR_FEATURES + 2 * state.occupied.len());
    v.push(unit_index(state.layer, state.num_layers));
    v.push(unit_index(state.uav, state.num_uavs));
    v.push(ratio(state.memory_left, state.memory_cap));
    v.push(ratio(state.compute_left, state.compute_cap));
    v.extend(state.occupied.iter().map(|&o| if o { 1.0 } else { 0.0 }));
    v.extend(state.hot.iter().map(|&h| if h { 1.0 } else { 0.0 }));
    v
}

/// Layer-window exclusivity. `effective` holds, for each step of the window
/// so far, whether it allocated a layer that fit. Holds while at most one
/// step allocated; on the last step of the window exactly one must have.
pub fn check_cons1(effective: &[bool], window_len: usize) -> bool {
    let count = effective.iter().filter(|&&a| a).count();
    if effective.len() >= window_len {
        count == 1
    } else {
        count <= 1
    }
}

/// Collision avoidance: the target cell was not already claimed in this
/// window and is not held by another UAV.
pub fn check_cons2(visited: &[usize], target: usize, occupant: Option<usize>, mover: usize) -> bool {
    !visited.contains(&target) && occupant.is_none_or(|o| o == mover)
}

/// Resource fit of an allocation attempt; trivially true without one.
pub fn check_cons3(allocate: bool, budgets: &Budgets, uav: usize, cost: &LayerCost) -> bool {
    !allocate || budgets.can_host(uav, cost)
}

/// `S_f / (1 + Σ demand)`.
pub fn qos_reward(qos_factor: f64, demand: &[u32]) -> f64 {
    let outstanding: u64 = demand.iter().map(|&d| u64::from(d)).sum();
    qos_factor / (1.0 + outstanding as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepInfo {
    pub step: usize,
    pub layer: usize,
    pub uav: usize,
    pub action: Action,
    pub cell: usize,
    pub cons1: bool,
    pub cons2: bool,
    pub cons3: bool,
    pub allocated: bool,
    /// Latency charged by this step, seconds (before scaling).
    pub penalty: f64,
    pub qos: f64,
    pub reward: f64,
}

impl StepInfo {
    pub fn constraints_met(&self) -> bool {
        self.cons1 && self.cons2 && self.cons3
    }
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Totals of a finished episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub reward: f64,
    /// Unscaled latency penalty, seconds.
    pub penalty: f64,
    pub steps: usize,
    pub constraint_steps: usize,
    /// Every step met all three constraints.
    pub feasible: bool,
    pub hot_coverage: f64,
    pub source: usize,
    pub plan: Option<AllocationPlan>,
    pub latency: Option<LatencyBreakdown>,
}

impl EpisodeSummary {
    pub fn accuracy(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.constraint_steps as f64 / self.steps as f64
        }
    }
}

/// Pre-planned trajectory: layer window `w` flies to `placements[w % len]`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct StaticSchedule {
    pub placements: Vec<Placement>,
}

impl StaticSchedule {
    /// Rejects schedules whose placements break one-cell-per-UAV or
    /// one-UAV-per-cell, or that cannot be flown one UAV at a time in index
    /// order without two UAVs meeting in a cell.
    pub fn validate(&self, grid: &GridConfig, uavs: usize, layers: usize) -> Result<()> {
        if self.placements.is_empty() {
            return Err(Error::config("static schedule is empty"));
        }
        for p in &self.placements {
            if p.num_uavs() != uavs {
                return Err(Error::config(format!(
                    "schedule placement lists {} UAVs, swarm has {uavs}",
                    p.num_uavs()
                )));
            }
            p.validate(grid)?;
        }
        let len = self.placements.len();
        for w in 0..layers {
            let from = &self.placements[w.saturating_sub(1) % len];
            let to = &self.placements[w % len];
            for i in 0..uavs {
                for k in i + 1..uavs {
                    if to.cells[i] == from.cells[k] {
                        return Err(Error::infeasible(
                            crate::error::Constraint::OneUavPerCell,
                            format!("UAV {i} would enter cell {} before UAV {k} leaves it", to.cells[i]),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn initial(&self) -> &Placement {
        &self.placements[0]
    }

    /// Cell that UAV `uav` must fly to during layer window `layer`.
    pub fn target(&self, layer: usize, uav: usize) -> usize {
        self.placements[layer % self.placements.len()].cells[uav]
    }
}

pub struct SwarmEnv {
    config: Arc<EpisodeConfig>,
    rng: ChaCha8Rng,
    placement: Placement,
    budgets: Budgets,
    episode_budgets: Budgets,
    source: usize,
    layer: usize,
    uav: usize,
    step: usize,
    done: bool,
    started: bool,
    episodes_in_frame: usize,
    window_effective: Vec<bool>,
    window_visited: Vec<usize>,
    assignment: Vec<Option<usize>>,
    layer_slot: Vec<usize>,
    history: Vec<Placement>,
    demand: Vec<u32>,
    hot_visited: Vec<bool>,
    reward_sum: f64,
    penalty_sum: f64,
    constraint_steps: usize,
}

impl SwarmEnv {
    pub fn new(config: Arc<EpisodeConfig>, seed: u64) -> Result<Self> {
        config.validate()?;
        let budgets = Budgets::full(&config.swarm);
        let n = config.swarm.len();
        let l = config.network.num_layers();
        let hot = config.grid.hot_cells.len();
        Ok(SwarmEnv {
            rng: ChaCha8Rng::seed_from_u64(seed),
            placement: Placement::new((0..n).collect()),
            episode_budgets: budgets.clone(),
            budgets,
            source: 0,
            layer: 0,
            uav: 0,
            step: 0,
            done: true,
            started: false,
            episodes_in_frame: 0,
            window_effective: Vec::with_capacity(n),
            window_visited: Vec::with_capacity(n),
            assignment: vec![None; l],
            layer_slot: vec![0; l],
            history: Vec::new(),
            demand: vec![0; hot],
            hot_visited: vec![false; hot],
            reward_sum: 0.0,
            penalty_sum: 0.0,
            constraint_steps: 0,
            config,
        })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn placement(&self) -> &Placement {
        &self.placement
    }

    pub fn budgets(&self) -> &Budgets {
        &self.budgets
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn source(&self) -> usize {
        self.source
    }

    /// Starts a new episode with a random source UAV.
    pub fn reset(&mut self) -> Result<Vec<f64>> {
        let n = self.config.swarm.len();
        let source = self.rng.random_range(0..n);
        self.reset_with_source(source)
    }

    /// Starts a new episode for a request captured by `source`. UAVs are
    /// scattered uniformly over distinct cells.
    pub fn reset_with_source(&mut self, source: usize) -> Result<Vec<f64>> {
        let n = self.config.swarm.len();
        let c = self.config.grid.num_cells();
        if n > c {
            return Err(Error::ImpossiblePlacement { uavs: n, cells: c });
        }
        if source >= n {
            return Err(Error::contract(format!("source {source} outside swarm of {n}")));
        }
        let cells = sample(&mut self.rng, c, n).into_vec();
        self.start_episode(source, Placement::new(cells))
    }

    /// Starts an episode from a given placement (used by evaluation replays).
    pub fn reset_with_placement(&mut self, source: usize, placement: Placement) -> Result<Vec<f64>> {
        placement.validate(&self.config.grid)?;
        if placement.num_uavs() != self.config.swarm.len() || source >= placement.num_uavs() {
            return Err(Error::contract("placement/source do not match the swarm"));
        }
        self.start_episode(source, placement)
    }

    fn start_episode(&mut self, source: usize, placement: Placement) -> Result<Vec<f64>> {
        if self.episodes_in_frame % self.config.frame_length == 0 {
            self.budgets = Budgets::full(&self.config.swarm);
            self.episodes_in_frame = 0;
        }
        self.episodes_in_frame += 1;
        let l = self.config.network.num_layers();
        self.episode_budgets = self.budgets.clone();
        self.placement = placement;
        self.source = source;
        self.layer = 0;
        self.uav = 0;
        self.step = 0;
        self.done = false;
        self.started = true;
        self.window_effective.clear();
        self.window_visited.clear();
        self.assignment = vec![None; l];
        self.layer_slot = vec![0; l];
        self.history.clear();
        self.demand = vec![self.config.hot_cell_demand; self.config.grid.hot_cells.len()];
        self.hot_visited = vec![false; self.config.grid.hot_cells.len()];
        self.reward_sum = 0.0;
        self.penalty_sum = 0.0;
        self.constraint_steps = 0;
        Ok(self.observation())
    }

    /// Forces the next reset to begin a new frame with full budgets.
    pub fn end_frame(&mut self) {
        self.episodes_in_frame = 0;
    }

    pub fn state(&self) -> EnvState {
        let g = &self.config.grid;
        let spec = &self.config.swarm[self.uav.min(self.config.swarm.len() - 1)];
        let u = self.uav.min(self.budgets.len() - 1);
        EnvState {
            layer: self.layer.min(self.config.network.num_layers() - 1),
            num_layers: self.config.network.num_layers(),
            uav: u,
            num_uavs: self.config.swarm.len(),
            memory_left: self.budgets.memory[u],
            memory_cap: spec.memory,
            compute_left: self.budgets.compute[u],
            compute_cap: spec.compute,
            occupied: self.placement.occupancy(g),
            hot: (0..g.num_cells()).map(|c| g.is_hot(c)).collect(),
        }
    }

    pub fn observation(&self) -> Vec<f64> {
        encode_state(&self.state())
    }

    /// Current cursor `(layer, uav)`.
    pub fn cursor(&self) -> (usize, usize) {
        (self.layer, self.uav)
    }

    pub fn step(&mut self, action: Action) -> Result<Transition> {
        if self.done || !self.started {
            return Err(Error::contract("step called on a finished episode; call reset first"));
        }
        let cfg = Arc::clone(&self.config);
        let grid = &cfg.grid;
        let n = cfg.swarm.len();
        if action.target_cell >= grid.num_cells() {
            return Err(Error::contract(format!(
                "target cell {} outside grid of {} cells",
                action.target_cell,
                grid.num_cells()
            )));
        }
        let (j, i) = (self.layer, self.uav);

        // Movement.
        let mut cons2 = check_cons2(
            &self.window_visited,
            action.target_cell,
            self.placement.occupant(action.target_cell),
            i,
        );
        if cfg.adjacent_moves_only && !grid.is_adjacent_or_same(self.placement.cell_of(i), action.target_cell) {
            cons2 = false;
        }
        if cons2 {
            self.placement.cells[i] = action.target_cell;
        }
        let cell = self.placement.cell_of(i);
        self.window_visited.push(cell);
        self.history.push(self.placement.clone());
        let slot = self.history.len() - 1;

        // Allocation.
        let cost = *cfg.network.cost(j);
        let cons3 = check_cons3(action.allocate, &self.budgets, i, &cost);
        let effective = action.allocate && cons3;
        let first_in_window = !self.window_effective.iter().any(|&a| a);
        self.window_effective.push(effective);
        let cons1 = check_cons1(&self.window_effective, n);
        let mut penalty = 0.0;
        let allocated = effective && first_in_window;
        if allocated {
            self.budgets.try_charge(i, &cost);
            self.assignment[j] = Some(i);
            self.layer_slot[j] = slot;
            penalty = self.allocation_latency(j, i)?;
        }

        // Hot-cell service.
        let mut qos = 0.0;
        if let Some(h) = grid.hot_cells.iter().position(|&hc| hc == cell) {
            self.demand[h] = self.demand[h].saturating_sub(1);
            self.hot_visited[h] = true;
            qos = qos_reward(cfg.qos_factor, &self.demand);
        }

        let constraint = if cons1 && cons2 && cons3 { 1.0 } else { 0.0 };
        let reward = constraint - cfg.penalty_scale * penalty + qos;
        if !reward.is_finite() {
            return Err(Error::Numeric(format!("non-finite reward at step {}", self.step)));
        }
        self.reward_sum += reward;
        self.penalty_sum += penalty;
        if constraint > 0.0 {
            self.constraint_steps += 1;
        }

        let info = StepInfo {
            step: self.step,
            layer: j,
            uav: i,
            action,
            cell,
            cons1,
            cons2,
            cons3,
            allocated,
            penalty,
            qos,
            reward,
        };

        self.step += 1;
        self.uav += 1;
        if self.uav == n {
            self.uav = 0;
            self.layer += 1;
            self.window_effective.clear();
            self.window_visited.clear();
        }
        self.done = self.layer == cfg.network.num_layers();
        Ok(Transition {
            observation: self.observation(),
            reward,
            done: self.done,
            info,
        })
    }

    /// Latency incurred by running layer `j` on UAV `i` under the current placement.
    fn allocation_latency(&self, j: usize, i: usize) -> Result<f64> {
        let cfg = &self.config;
        let compute = cfg.network.cost(j).compute as f64 / cfg.swarm[i].speed;
        // Activations sit with whoever ran the latest assigned layer; a
        // skipped layer does not make the next hop free.
        let (from, bytes) = match (0..j).rev().find_map(|p| self.assignment[p].map(|k| (k, p))) {
            Some((k, p)) => (k, cfg.network.cost(p).output_bytes),
            None => (self.source, cfg.network.input_bytes()),
        };
        let transfer = match from {
            k if k != i => {
                let rate = cfg.radio.rate_between_cells(
                    &cfg.grid,
                    self.placement.cell_of(k),
                    self.placement.cell_of(i),
                )?;
                crate::latency::transfer_time(bytes, rate, k, i)?
            }
            _ => 0.0,
        };
        Ok(transfer + compute)
    }

    /// Reconstructed plan, once every layer has an executor.
    pub fn plan(&self) -> Option<AllocationPlan> {
        let assignment: Option<Vec<usize>> = self.assignment.iter().copied().collect();
        Some(AllocationPlan {
            source: self.source,
            assignment: assignment?,
            placements: self.history.clone(),
            layer_slot: self.layer_slot.clone(),
        })
    }

    pub fn summary(&self) -> Result<EpisodeSummary> {
        let cfg = &self.config;
        let plan = if self.done { self.plan() } else { None };
        let latency = match &plan {
            Some(p) => Some(total_latency_with_budgets(
                p,
                &cfg.network,
                &cfg.swarm,
                &self.episode_budgets,
                &cfg.radio,
                &cfg.grid,
                ValidationOptions { hot_cells: false },
            )?),
            None => None,
        };
        let hot_coverage = if self.hot_visited.is_empty() {
            1.0
        } else {
            self.hot_visited.iter().filter(|&&v| v).count() as f64 / self.hot_visited.len() as f64
        };
        Ok(EpisodeSummary {
            reward: self.reward_sum,
            penalty: self.penalty_sum,
            steps: self.step,
            constraint_steps: self.constraint_steps,
            feasible: self.done && self.constraint_steps == self.step,
            hot_coverage,
            source: self.source,
            plan,
            latency,
        })
    }

    /// Adds a UAV between episodes. Its cell is drawn at the next reset.
    pub fn add_uav(&mut self, spec: UavSpec) -> Result<()> {
        let mut cfg = (*self.config).clone();
        cfg.swarm.push(spec);
        self.replace_config(cfg)
    }

    /// Removes UAV `index` between episodes.
    pub fn remove_uav(&mut self, index: usize) -> Result<()> {
        let mut cfg = (*self.config).clone();
        if index >= cfg.swarm.len() {
            return Err(Error::contract(format!("no UAV {index} to remove")));
        }
        cfg.swarm.remove(index);
        self.replace_config(cfg)
    }

    fn replace_config(&mut self, cfg: EpisodeConfig) -> Result<()> {
        if !self.done && self.started {
            return Err(Error::contract("swarm changes are only allowed between episodes"));
        }
        cfg.validate()?;
        let n = cfg.swarm.len();
        self.config = Arc::new(cfg);
        self.budgets = Budgets::full(&self.config.swarm);
        self.episode_budgets = self.budgets.clone();
        self.episodes_in_frame = 0;
        self.placement = Placement::new((0..n).collect());
        self.uav = 0;
        self.started = false;
        self.done = true;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::build_network;
    use crate::latency::total_latency;
    use crate::swarm::roster;
    use proptest::prelude::*;

    fn config(n: usize, hot: Vec<usize>) -> EpisodeConfig {
        let grid = GridConfig::new(5, 20.0, hot).unwrap();
        EpisodeConfig::new(build_network("LeNet").unwrap(), roster(n, &[256e6], 1 << 30, 1 << 40), grid)
    }

    fn env(n: usize, seed: u64) -> SwarmEnv {
        SwarmEnv::new(Arc::new(config(n, vec![])), seed).unwrap()
    }

    /// A free cell, preferring the mover's own.
    fn free_cell(env: &SwarmEnv) -> usize {
        let (_, i) = env.cursor();
        env.placement().cell_of(i)
    }

    #[test]
    fn reset_places_distinct_cells_deterministically() {
        let mut a = env(5, 7);
        let mut b = env(5, 7);
        a.reset().unwrap();
        b.reset().unwrap();
        assert_eq!(a.placement(), b.placement());
        let mut cells = a.placement().cells.clone();
        cells.sort();
        cells.dedup();
        assert_eq!(cells.len(), 5);

        let mut full = env(25, 1);
        full.reset().unwrap();
        let mut cells = full.placement().cells.clone();
        cells.sort();
        assert_eq!(cells, (0..25).collect::<Vec<_>>());

        let cfg = config(26, vec![]);
        assert!(matches!(
            SwarmEnv::new(Arc::new(cfg), 0),
            Err(Error::ImpossiblePlacement { .. })
        ));
    }

    #[test]
    fn cons_checks() {
        assert!(!check_cons1(&[true, true], 5));
        assert!(check_cons1(&[false, true, false], 5));
        assert!(check_cons1(&[false, false], 5));
        assert!(!check_cons1(&[false, false, false], 3));
        assert!(check_cons1(&[false, false, true], 3));

        assert!(!check_cons2(&[4, 9], 9, None, 0));
        assert!(check_cons2(&[4, 9], 3, None, 0));
        assert!(check_cons2(&[], 3, Some(2), 2));
        assert!(!check_cons2(&[], 3, Some(1), 2));

        let net = build_network("LeNet").unwrap();
        let fc2 = *net.cost(3);
        assert_eq!(fc2.memory, 40_320);
        let budgets = Budgets {
            memory: vec![40_000],
            compute: vec![u64::MAX],
        };
        assert!(!check_cons3(true, &budgets, 0, &fc2));
        assert!(check_cons3(false, &budgets, 0, &fc2));
    }

    #[test]
    fn auto_penalty_scale_bounds_single_allocation() {
        let cfg = config(5, vec![]);
        let worst = cfg.worst_allocation_latency();
        // conv1 output over the 5x5 grid diagonal dominates.
        let radio = RadioParams::default();
        let d = 80.0 * 2f64.sqrt();
        let hop = 18_816.0 * 8.0 / radio.rate_for_gain(radio.gain_at(d));
        assert!((worst - (hop + 240_000.0 / 256e6)).abs() < 1e-9);
        assert!((cfg.penalty_scale * worst - 0.5).abs() < 1e-12);
    }

    #[test]
    fn qos_examples() {
        assert_eq!(qos_reward(0.0, &[3, 2]), 0.0);
        assert_eq!(qos_reward(1.0, &[0, 0, 0]), 1.0);
        assert_eq!(qos_reward(1.0, &[1, 1, 1]), 0.25);
    }

    #[test]
    fn encoding_shape() {
        let mut e = env(5, 3);
        let obs = e.reset().unwrap();
        assert_eq!(obs.len(), 54);
        assert_eq!(obs[2], 1.0);
        assert_eq!(obs[3], 1.0);
        assert_eq!(obs[4..29].iter().sum::<f64>(), 5.0);
    }

    #[test]
    fn plain_step_rewards_one() {
        let mut e = env(5, 3);
        e.reset().unwrap();
        // Second UAV of the window, no allocation, stays put.
        let c0 = free_cell(&e);
        e.step(Action { allocate: true, target_cell: c0 }).unwrap();
        let c1 = free_cell(&e);
        let t = e.step(Action { allocate: false, target_cell: c1 }).unwrap();
        assert_eq!(t.reward, 1.0);
        assert!(t.info.constraints_met());
    }

    #[test]
    fn violated_constraint_zeroes_reward() {
        let mut e = env(3, 3);
        e.reset().unwrap();
        let c0 = free_cell(&e);
        e.step(Action { allocate: true, target_cell: c0 }).unwrap();
        // Fly onto UAV 0's cell.
        let t = e.step(Action { allocate: false, target_cell: c0 }).unwrap();
        assert!(!t.info.cons2);
        assert_eq!(t.reward, 0.0);
        // Second allocation in the same window.
        let c2 = free_cell(&e);
        let t = e.step(Action { allocate: true, target_cell: c2 }).unwrap();
        assert!(!t.info.cons1);
        assert!(!t.info.allocated);
    }

    #[test]
    fn allocation_penalty_matches_latency_model() {
        // UAV 0 at cell 0 takes layer 1; UAV 1 at cell 1 takes layer 2.
        let mut cfg = config(2, vec![]);
        cfg.penalty_scale = 0.5;
        let mut e = SwarmEnv::new(Arc::new(cfg), 0).unwrap();
        e.reset_with_placement(0, Placement::new(vec![0, 1])).unwrap();
        let t = e.step(Action { allocate: true, target_cell: 0 }).unwrap();
        let c1 = 352_800.0 / 256e6;
        assert!((t.info.penalty - c1).abs() < 1e-15);
        e.step(Action { allocate: false, target_cell: 1 }).unwrap();
        e.step(Action { allocate: false, target_cell: 0 }).unwrap();
        let t = e.step(Action { allocate: true, target_cell: 1 }).unwrap();
        let radio = RadioParams::default();
        let hop = 18_816.0 * 8.0 / radio.rate_for_gain(radio.gain_at(20.0));
        let c2 = 240_000.0 / 256e6;
        assert!((t.info.penalty - (hop + c2)).abs() < 1e-12);
        assert!((hop - 29.93).abs() < 0.01);
        assert!((t.reward - (1.0 - 0.5 * (hop + c2))).abs() < 1e-12);
    }

    #[test]
    fn infeasible_attempt_leaves_budget_and_breaks_window() {
        let grid = GridConfig::new(5, 20.0, vec![]).unwrap();
        let net = build_network("LeNet").unwrap();
        let swarm = roster(2, &[256e6], 1000, 1 << 40);
        let mut e = SwarmEnv::new(Arc::new(EpisodeConfig::new(net, swarm, grid)), 0).unwrap();
        e.reset_with_placement(0, Placement::new(vec![0, 1])).unwrap();
        let t = e.step(Action { allocate: true, target_cell: 0 }).unwrap();
        assert!(!t.info.cons3 && !t.info.allocated);
        assert_eq!(e.budgets().memory[0], 1000);
        let t = e.step(Action { allocate: false, target_cell: 1 }).unwrap();
        assert!(!t.info.cons1);
    }

    #[test]
    fn stepping_after_done_is_rejected() {
        let mut e = env(2, 0);
        assert!(e.step(Action { allocate: false, target_cell: 0 }).is_err());
        e.reset().unwrap();
        for _ in 0..10 {
            let c = free_cell(&e);
            let (_, u) = e.cursor();
            e.step(Action { allocate: u == 0, target_cell: c }).unwrap();
        }
        assert!(e.is_done());
        assert!(matches!(e.step(Action { allocate: false, target_cell: 0 }), Err(Error::Contract(_))));
    }

    #[test]
    fn hot_cell_visits_pay_qos() {
        let cfg = config(2, vec![12, 13]);
        let mut e = SwarmEnv::new(Arc::new(cfg), 0).unwrap();
        e.reset_with_placement(0, Placement::new(vec![0, 1])).unwrap();
        let t = e.step(Action { allocate: true, target_cell: 12 }).unwrap();
        assert!((t.info.qos - 0.5).abs() < 1e-15);
        let t = e.step(Action { allocate: false, target_cell: 13 }).unwrap();
        assert!((t.info.qos - 1.0).abs() < 1e-15);
        let s = e.summary().unwrap();
        assert_eq!(s.hot_coverage, 1.0);
    }

    #[test]
    fn frame_budgets_persist_until_frame_end() {
        let mut cfg = config(1, vec![]);
        cfg.frame_length = 2;
        let mut e = SwarmEnv::new(Arc::new(cfg), 0).unwrap();
        let full = e.budgets().memory[0];
        for expect_reset in [true, false, true] {
            e.reset().unwrap();
            let before = e.budgets().memory[0];
            assert_eq!(before == full, expect_reset);
            while !e.is_done() {
                let c = free_cell(&e);
                e.step(Action { allocate: true, target_cell: c }).unwrap();
            }
        }
    }

    #[test]
    fn dynamic_swarm_bounds() {
        let mut e = SwarmEnv::new(Arc::new(config(3, vec![1, 2, 3])), 0).unwrap();
        assert!(e.remove_uav(0).is_err());
        e.add_uav(e.config().swarm[0].clone()).unwrap();
        assert_eq!(e.config().swarm.len(), 4);
        e.reset().unwrap();
        assert_eq!(e.placement().num_uavs(), 4);
        assert!(e.add_uav(e.config().swarm[0].clone()).is_err(), "mid-episode change");
    }

    #[test]
    fn schedule_validation() {
        let grid = GridConfig::new(3, 20.0, vec![]).unwrap();
        let ok = StaticSchedule {
            placements: vec![Placement::new(vec![0, 1]), Placement::new(vec![2, 0])],
        };
        // UAV 0 enters cell 2 first, then UAV 1 takes the freed cell 0.
        ok.validate(&grid, 2, 2).unwrap();
        // Cycling back to the first placement would swap them head-on.
        assert!(ok.validate(&grid, 2, 3).is_err());
        let colocated = StaticSchedule {
            placements: vec![Placement::new(vec![4, 4])],
        };
        assert!(colocated.validate(&grid, 2, 3).is_err());
        let crossing = StaticSchedule {
            placements: vec![Placement::new(vec![0, 1]), Placement::new(vec![1, 0])],
        };
        assert!(crossing.validate(&grid, 2, 2).is_err());
    }

    proptest! {
        #[test]
        fn episode_invariants(seed in 0u64..500, n in 1usize..5, actions in proptest::collection::vec((any::<bool>(), 0usize..25), 25)) {
            let mut cfg = config(n, vec![]);
            cfg.qos_factor = 0.0;
            let cfg = Arc::new(cfg);
            let mut e = SwarmEnv::new(cfg.clone(), seed).unwrap();
            e.reset().unwrap();
            let len = cfg.episode_length();
            let mut steps = 0;
            let mut order = Vec::new();
            while !e.is_done() {
                order.push(e.cursor());
                let (a1, a2) = actions[steps % actions.len()];
                let t = e.step(Action { allocate: a1, target_cell: a2 }).unwrap();
                prop_assert!(t.info.qos == 0.0);
                e.placement().validate(&cfg.grid).unwrap();
                steps += 1;
            }
            prop_assert_eq!(steps, len);
            let expected: Vec<(usize, usize)> = (0..cfg.network.num_layers()).flat_map(|j| (0..n).map(move |i| (j, i))).collect();
            prop_assert_eq!(order, expected);
            let s = e.summary().unwrap();
            prop_assert!(s.reward <= len as f64 + 1e-12);
            if let (Some(plan), Some(lat)) = (&s.plan, &s.latency) {
                let again = total_latency(plan, &cfg.network, &cfg.swarm, &cfg.radio, &cfg.grid, ValidationOptions { hot_cells: false }).unwrap();
                prop_assert!((again.total - lat.total).abs() <= 1e-12 * lat.total.max(1e-12));
                prop_assert!((s.penalty - lat.total).abs() <= 1e-9 * lat.total.max(1e-12));
            }
        }

        #[test]
        fn identical_seed_and_actions_give_identical_traces(seed in 0u64..100, actions in proptest::collection::vec((any::<bool>(), 0usize..25), 15)) {
            let run = || {
                let mut e = env(3, seed);
                e.reset().unwrap();
                let mut out = Vec::new();
                for &(a1, a2) in &actions {
                    out.push(e.step(Action { allocate: a1, target_cell: a2 }).unwrap().info);
                }
                out
            };
            prop_assert_eq!(run(), run());
        }
    }
}
