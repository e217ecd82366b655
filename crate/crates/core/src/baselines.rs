//! Non-learning solvers over single-placement plans: an exhaustive oracle,
//! alternating coordinate descent, a greedy heuristic, a random policy and
//! the frozen-trajectory (static path) learner.
//!
//! Every solver returns a plan that has been re-scored through
//! [`total_latency`], so its breakdown is always validator-approved.

use std::cmp::Ordering;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::NetworkSpec;
use crate::env::{EpisodeConfig, StaticSchedule, SwarmEnv};
use crate::error::{Constraint, Error, Result};
use crate::latency::{total_latency, AllocationPlan, LatencyBreakdown, ValidationOptions};
use crate::ppo::{TrainConfig, Trainer};
use crate::radio::{GridConfig, Placement, RadioParams};
use crate::swarm::{Budgets, UavSpec};

/// One request to be placed: who captured it and where the swarm starts.
#[derive(Debug, Clone)]
pub struct InstanceSpec {
    pub network: NetworkSpec,
    pub swarm: Vec<UavSpec>,
    pub grid: GridConfig,
    pub radio: RadioParams,
    pub source: usize,
    /// Starting placement; the greedy heuristic never leaves it.
    pub initial: Placement,
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.radio.validate()?;
        self.grid.validate_swarm_size(self.swarm.len())?;
        for u in &self.swarm {
            u.validate()?;
        }
        if self.source >= self.swarm.len() {
            return Err(Error::config(format!("source {} outside swarm of {}", self.source, self.swarm.len())));
        }
        if self.initial.num_uavs() != self.swarm.len() {
            return Err(Error::config("initial placement does not match the swarm"));
        }
        self.initial.validate(&self.grid)?;
        self.initial.validate_hot_cells(&self.grid)
    }

    fn score(&self, assignment: &[usize], placement: &Placement) -> Result<Solution> {
        let plan = AllocationPlan::single_slot(self.source, assignment.to_vec(), placement.clone());
        let latency = total_latency(
            &plan,
            &self.network,
            &self.swarm,
            &self.radio,
            &self.grid,
            ValidationOptions::default(),
        )?;
        Ok(Solution { plan, latency })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub plan: AllocationPlan,
    pub latency: LatencyBreakdown,
}

impl Solution {
    pub fn total(&self) -> f64 {
        self.latency.total
    }

    /// Latency first, then lexicographic plan order.
    fn cmp_key(&self, other: &Solution) -> Ordering {
        self.latency
            .total
            .total_cmp(&other.latency.total)
            .then_with(|| self.plan.cmp(&other.plan))
    }
}

fn better(a: Option<Solution>, b: Option<Solution>) -> Option<Solution> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.cmp_key(&a) == Ordering::Less { b } else { a }),
        (a, None) => a,
        (None, b) => b,
    }
}

/// Size limits under which full enumeration is attempted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCaps {
    pub max_uavs: usize,
    pub max_layers: usize,
    pub max_cells: usize,
}

impl Default for OracleCaps {
    fn default() -> Self {
        OracleCaps {
            max_uavs: 3,
            max_layers: 4,
            max_cells: 9,
        }
    }
}

impl OracleCaps {
    pub fn admits(&self, inst: &InstanceSpec) -> bool {
        inst.swarm.len() <= self.max_uavs
            && inst.network.num_layers() <= self.max_layers
            && inst.grid.num_cells() <= self.max_cells
    }
}

/// Every placement of the swarm onto distinct cells that covers all hot
/// cells, in lexicographic order.
pub fn covering_placements(grid: &GridConfig, uavs: usize) -> Vec<Placement> {
    fn rec(grid: &GridConfig, uavs: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Placement>) {
        if cur.len() == uavs {
            if grid.hot_cells.iter().all(|h| cur.contains(h)) {
                out.push(Placement::new(cur.clone()));
            }
            return;
        }
        // Prune when too few UAVs remain to reach the uncovered hot cells.
        let missing = grid.hot_cells.iter().filter(|h| !cur.contains(h)).count();
        if missing > uavs - cur.len() {
            return;
        }
        for c in 0..grid.num_cells() {
            if !used[c] {
                used[c] = true;
                cur.push(c);
                rec(grid, uavs, cur, used, out);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut out = Vec::new();
    let mut used = vec![false; grid.num_cells()];
    rec(grid, uavs, &mut Vec::with_capacity(uavs), &mut used, &mut out);
    out
}

/// All assignments that fit the budgets, in lexicographic order.
fn feasible_assignments(network: &NetworkSpec, swarm: &[UavSpec]) -> Vec<Vec<usize>> {
    fn rec(net: &NetworkSpec, budgets: &mut Budgets, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let j = cur.len();
        if j == net.num_layers() {
            out.push(cur.clone());
            return;
        }
        let cost = *net.cost(j);
        for u in 0..budgets.len() {
            if budgets.try_charge(u, &cost) {
                cur.push(u);
                rec(net, budgets, cur, out);
                cur.pop();
                budgets.memory[u] += cost.memory;
                budgets.compute[u] += cost.compute;
            }
        }
    }
    let mut out = Vec::new();
    rec(network, &mut Budgets::full(swarm), &mut Vec::new(), &mut out);
    out
}

/// Names the constraint that makes an instance infeasible.
fn infeasibility(inst: &InstanceSpec) -> Error {
    let n = inst.swarm.len();
    if inst.grid.hot_cells.len() > n {
        return Error::infeasible(
            Constraint::HotCellCoverage,
            format!("{} hot cells but only {n} UAVs", inst.grid.hot_cells.len()),
        );
    }
    let unlimited_compute: Vec<UavSpec> = inst
        .swarm
        .iter()
        .map(|u| UavSpec {
            compute: u64::MAX,
            ..u.clone()
        })
        .collect();
    for (j, cost) in inst.network.costs().iter().enumerate() {
        if inst.swarm.iter().all(|u| cost.memory > u.memory) {
            return Error::infeasible(Constraint::Memory, format!("layer {j} needs {} B, larger than every UAV", cost.memory));
        }
        if inst.swarm.iter().all(|u| cost.compute > u.compute) {
            return Error::infeasible(
                Constraint::Compute,
                format!("layer {j} needs {} mults, more than any UAV offers", cost.compute),
            );
        }
    }
    if !feasible_assignments(&inst.network, &unlimited_compute).is_empty() {
        return Error::infeasible(Constraint::Compute, "compute budgets cannot hold every layer");
    }
    Error::infeasible(Constraint::Memory, "memory budgets cannot hold every layer")
}

/// Cheapest feasible assignment for a fixed placement.
pub fn best_assignment(inst: &InstanceSpec, placement: &Placement) -> Result<Solution> {
    let mut best = None;
    for a in feasible_assignments(&inst.network, &inst.swarm) {
        best = better(best, Some(inst.score(&a, placement)?));
    }
    best.ok_or_else(|| infeasibility(inst))
}

/// Cheapest covering placement for a fixed assignment. Exhaustive when the
/// grid is within `caps`, otherwise one-UAV-at-a-time descent from `start`.
pub fn best_placement(inst: &InstanceSpec, assignment: &[usize], start: &Placement, caps: &OracleCaps) -> Result<Solution> {
    if inst.grid.num_cells() <= caps.max_cells && inst.swarm.len() <= caps.max_uavs {
        let mut best = None;
        for p in covering_placements(&inst.grid, inst.swarm.len()) {
            best = better(best, Some(inst.score(assignment, &p)?));
        }
        return best.ok_or_else(|| infeasibility(inst));
    }
    let mut cur = inst.score(assignment, start)?;
    loop {
        let mut improved = false;
        for u in 0..inst.swarm.len() {
            for c in 0..inst.grid.num_cells() {
                let mut cells = cur.plan.placements[0].cells.clone();
                if cells.contains(&c) {
                    continue;
                }
                cells[u] = c;
                let p = Placement::new(cells);
                if p.validate_hot_cells(&inst.grid).is_err() {
                    continue;
                }
                let cand = inst.score(assignment, &p)?;
                if cand.cmp_key(&cur) == Ordering::Less {
                    cur = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            return Ok(cur);
        }
    }
}

/// Minimum-latency plan by full enumeration of placements and assignments.
pub fn exhaustive_oracle(inst: &InstanceSpec, caps: &OracleCaps) -> Result<Solution> {
    inst.validate()?;
    if !caps.admits(inst) {
        return Err(Error::config(format!(
            "instance ({} UAVs, {} layers, {} cells) exceeds oracle caps ({}, {}, {})",
            inst.swarm.len(),
            inst.network.num_layers(),
            inst.grid.num_cells(),
            caps.max_uavs,
            caps.max_layers,
            caps.max_cells
        )));
    }
    let placements = covering_placements(&inst.grid, inst.swarm.len());
    let assignments = feasible_assignments(&inst.network, &inst.swarm);
    if placements.is_empty() || assignments.is_empty() {
        return Err(infeasibility(inst));
    }
    let best = placements
        .par_iter()
        .map(|p| {
            let mut best = None;
            for a in &assignments {
                best = better(best, Some(inst.score(a, p)?));
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(None, better);
    best.ok_or_else(|| infeasibility(inst))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlternatingResult {
    pub best: Solution,
    /// Best latency found after each round, across all starts so far.
    pub history: Vec<f64>,
}

/// Uniformly random placement covering every hot cell.
pub fn random_covering_placement<R: Rng + ?Sized>(grid: &GridConfig, uavs: usize, rng: &mut R) -> Result<Placement> {
    let c = grid.num_cells();
    if uavs > c {
        return Err(Error::ImpossiblePlacement { uavs, cells: c });
    }
    if grid.hot_cells.len() > uavs {
        return Err(Error::infeasible(
            Constraint::HotCellCoverage,
            format!("{} hot cells but only {uavs} UAVs", grid.hot_cells.len()),
        ));
    }
    let mut order: Vec<usize> = (0..uavs).collect();
    order.shuffle(rng);
    let mut hot = grid.hot_cells.clone();
    hot.shuffle(rng);
    let mut cold: Vec<usize> = (0..c).filter(|x| !grid.is_hot(*x)).collect();
    cold.shuffle(rng);
    let mut cells = vec![0; uavs];
    for (k, &u) in order.iter().enumerate() {
        cells[u] = if k < hot.len() { hot[k] } else { cold[k - hot.len()] };
    }
    Ok(Placement::new(cells))
}

/// Alternates best-assignment and best-placement steps. Start 0 is the
/// instance's initial placement; the remaining `restarts - 1` starts are
/// random covering placements.
pub fn alternating_suboptimal(
    inst: &InstanceSpec,
    rounds: usize,
    restarts: usize,
    caps: &OracleCaps,
    seed: u64,
) -> Result<AlternatingResult> {
    inst.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![inst.initial.clone()];
    for _ in 1..restarts.max(1) {
        starts.push(random_covering_placement(&inst.grid, inst.swarm.len(), &mut rng)?);
    }
    let mut best: Option<Solution> = None;
    let mut history = Vec::new();
    for start in starts {
        let mut placement = start;
        let mut local: Option<Solution> = None;
        for _ in 0..rounds.max(1) {
            let a = best_assignment(inst, &placement)?;
            let p = best_placement(inst, &a.plan.assignment, &placement, caps)?;
            let round_best = better(Some(a), Some(p)).expect("both present");
            let improved = local.as_ref().is_none_or(|l| round_best.cmp_key(l) == Ordering::Less);
            placement = round_best.plan.placements[0].clone();
            local = better(local, Some(round_best));
            best = better(best, local.clone());
            history.push(best.as_ref().map(Solution::total).unwrap_or(f64::INFINITY));
            if !improved {
                break;
            }
        }
    }
    Ok(AlternatingResult {
        best: best.ok_or_else(|| infeasibility(inst))?,
        history,
    })
}

/// Layer by layer, the UAV with room that adds the least latency (input
/// transfer plus compute), with the swarm held at its initial placement.
pub fn greedy_heuristic(inst: &InstanceSpec) -> Result<Solution> {
    inst.validate()?;
    let net = &inst.network;
    let placement = &inst.initial;
    let mut budgets = Budgets::full(&inst.swarm);
    let mut assignment = Vec::with_capacity(net.num_layers());
    let mut holder = inst.source;
    for j in 0..net.num_layers() {
        let cost = *net.cost(j);
        let bytes = if j == 0 { net.input_bytes() } else { net.cost(j - 1).output_bytes };
        let mut best: Option<(f64, usize)> = None;
        for u in 0..inst.swarm.len() {
            if !budgets.can_host(u, &cost) {
                continue;
            }
            let transfer = if u == holder {
                0.0
            } else {
                let rate = inst
                    .radio
                    .rate_between_cells(&inst.grid, placement.cell_of(holder), placement.cell_of(u))?;
                crate::latency::transfer_time(bytes, rate, holder, u)?
            };
            let t = transfer + cost.compute as f64 / inst.swarm[u].speed;
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, u));
            }
        }
        let Some((_, u)) = best else {
            let constraint = if inst.swarm.iter().enumerate().any(|(u, _)| budgets.memory[u] >= cost.memory) {
                Constraint::Compute
            } else {
                Constraint::Memory
            };
            return Err(Error::infeasible(constraint, format!("greedy dead end at layer {j}")));
        };
        budgets.try_charge(u, &cost);
        assignment.push(u);
        holder = u;
    }
    inst.score(&assignment, placement)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomResult {
    pub samples: Vec<Solution>,
    pub mean: f64,
    pub std_dev: f64,
    /// Draws thrown away because the random assignment ran out of budget.
    pub rejected: usize,
}

/// `trials` uniformly random covering placements and budget-respecting
/// random assignments. Dead-end draws are redrawn, at most `max_retries`
/// times per trial.
pub fn random_policy(inst: &InstanceSpec, trials: usize, max_retries: usize, seed: u64) -> Result<RandomResult> {
    inst.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = &inst.network;
    let mut samples = Vec::with_capacity(trials);
    let mut rejected = 0;
    for _ in 0..trials {
        let mut attempt = 0;
        let solution = loop {
            let placement = random_covering_placement(&inst.grid, inst.swarm.len(), &mut rng)?;
            let mut budgets = Budgets::full(&inst.swarm);
            let mut assignment = Vec::with_capacity(net.num_layers());
            for j in 0..net.num_layers() {
                let cost = *net.cost(j);
                let fits: Vec<usize> = (0..inst.swarm.len()).filter(|&u| budgets.can_host(u, &cost)).collect();
                if fits.is_empty() {
                    break;
                }
                let u = fits[rng.random_range(0..fits.len())];
                budgets.try_charge(u, &cost);
                assignment.push(u);
            }
            if assignment.len() == net.num_layers() {
                break inst.score(&assignment, &placement)?;
            }
            rejected += 1;
            attempt += 1;
            if attempt > max_retries {
                return Err(infeasibility(inst));
            }
        };
        samples.push(solution);
    }
    let n = samples.len().max(1) as f64;
    let mean = samples.iter().map(Solution::total).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.total() - mean).powi(2)).sum::<f64>() / n;
    Ok(RandomResult {
        samples,
        mean,
        std_dev: var.sqrt(),
        rejected,
    })
}

/// Random oracle-sized instance: a small chained CNN, 1 to `caps.max_uavs`
/// UAVs with mixed speeds and memory tight enough to force splits at times,
/// random hot cells, source and starting placement. Instances on which the
/// greedy heuristic dead-ends are redrawn, since every solver assumes a
/// feasible instance.
pub fn random_instance<R: Rng + ?Sized>(caps: &OracleCaps, rng: &mut R) -> InstanceSpec {
    use crate::catalog::{InputShape, LayerSpec};
    loop {
        let n = rng.random_range(1..=caps.max_uavs.max(1));
        let side = if caps.max_cells >= 9 && rng.random_bool(0.5) { 3 } else { 2 };
        let side = side.min((caps.max_cells as f64).sqrt() as usize).max(1);
        if n > side * side {
            continue;
        }
        let layers = rng.random_range(2..=caps.max_layers.max(2));
        let hw = rng.random_range(8..=16);
        let mut specs = Vec::with_capacity(layers);
        let mut channels = 3;
        let mut spatial = hw;
        let convs = rng.random_range(1..layers);
        for k in 0..layers {
            if k < convs {
                let out = rng.random_range(2..=8);
                spatial = (spatial * rng.random_range(1..=2) / 2).max(2);
                specs.push(LayerSpec::conv(&format!("conv{k}"), channels, rng.random_range(1..=3), out, spatial));
                channels = out;
            } else {
                let inputs = if k == convs { channels * spatial * spatial } else { channels };
                let out = rng.random_range(4..=32);
                specs.push(LayerSpec::fully_connected(&format!("fc{k}"), inputs, out));
                channels = out;
            }
        }
        let network = NetworkSpec::new("random", InputShape::rgb(hw, hw), specs).expect("generated layers are valid");
        let largest = network.costs().iter().map(|c| c.memory).max().unwrap_or(0);
        let total = network.total_memory();
        let swarm: Vec<UavSpec> = (0..n)
            .map(|_| UavSpec {
                speed: [256e3, 512e3, 560e3][rng.random_range(0..3)],
                memory: rng.random_range(largest..=total + total / 5),
                compute: u64::MAX / 4,
            })
            .collect();
        let cells = side * side;
        let mut hot: Vec<usize> = (0..cells).collect();
        hot.shuffle(rng);
        hot.truncate(rng.random_range(0..=n.min(2)));
        hot.sort();
        let grid = GridConfig::new(side, 20.0, hot).expect("hot cells lie on the grid");
        let Ok(initial) = random_covering_placement(&grid, n, rng) else {
            continue;
        };
        let inst = InstanceSpec {
            network,
            swarm,
            grid,
            radio: RadioParams::default(),
            source: rng.random_range(0..n),
            initial,
        };
        if greedy_heuristic(&inst).is_ok() {
            return inst;
        }
    }
}

/// Trains an allocation-only policy while the swarm follows `schedule`.
pub fn static_path_mode(
    config: Arc<EpisodeConfig>,
    schedule: StaticSchedule,
    train: TrainConfig,
    steps: usize,
    seed: u64,
) -> Result<Trainer> {
    let env = SwarmEnv::new(config, seed)?;
    let mut trainer = Trainer::new(env, train, seed)?.with_schedule(schedule)?;
    trainer.run_steps(steps)?;
    Ok(trainer)
}
