//! End-to-end latency of a layer allocation plus placement sequence.
//!
//! All payloads are bytes; they are converted to bits (`× 8`) before being
//! divided by a data rate in bit/s.

use serde::{Deserialize, Serialize};

use crate::catalog::NetworkSpec;
use crate::error::{Constraint, Error, Result};
use crate::radio::{GridConfig, Placement, RadioParams};
use crate::swarm::{Budgets, UavSpec};

/// Layer-to-UAV mapping of one request together with the placements in
/// effect while it is processed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AllocationPlan {
    /// UAV that captured the image.
    pub source: usize,
    /// Executor of every layer, in layer order.
    pub assignment: Vec<usize>,
    /// Placements over time.
    pub placements: Vec<Placement>,
    /// For every layer, the index into `placements` at which its input is
    /// transferred (and the layer executed).
    pub layer_slot: Vec<usize>,
}

impl AllocationPlan {
    /// A plan whose layers all run under one placement.
    pub fn single_slot(source: usize, assignment: Vec<usize>, placement: Placement) -> Self {
        let layer_slot = vec![0; assignment.len()];
        AllocationPlan {
            source,
            assignment,
            placements: vec![placement],
            layer_slot,
        }
    }

    fn placement_for(&self, layer: usize) -> &Placement {
        &self.placements[self.layer_slot[layer]]
    }
}

/// Which optional constraints the validator enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationOptions {
    /// Require every hot cell to be occupied in every placement.
    pub hot_cells: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { hot_cells: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    /// Source image transfer to the first executor, seconds.
    pub source_transfer: f64,
    /// Compute time per UAV, seconds.
    pub compute: Vec<f64>,
    /// Transfer time after each layer boundary `j -> j+1`, seconds.
    pub hop_transfers: Vec<f64>,
    pub total: f64,
    /// Bytes sent between UAVs.
    pub shared_bytes: u64,
}

/// Seconds needed to push `bytes` over a link of `rate` bit/s.
pub fn transfer_time(bytes: u64, rate: f64, from: usize, to: usize) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::InfeasibleLink { from, to });
    }
    Ok(bytes as f64 * 8.0 / rate)
}

/// Checks exactly-one-executor, placement validity, optional hot-cell
/// coverage and the resource budgets of `plan` against `budgets`.
pub fn validate_plan(
    plan: &AllocationPlan,
    network: &NetworkSpec,
    budgets: &Budgets,
    grid: &GridConfig,
    opts: ValidationOptions,
) -> Result<()> {
    let n = budgets.len();
    let l = network.num_layers();
    if plan.source >= n {
        return Err(Error::contract(format!("source UAV {} outside swarm of {n}", plan.source)));
    }
    if plan.assignment.len() != l {
        return Err(Error::infeasible(
            Constraint::SingleExecutor,
            format!("{} layers assigned, network has {l}", plan.assignment.len()),
        ));
    }
    if let Some((j, &u)) = plan.assignment.iter().enumerate().find(|(_, &u)| u >= n) {
        return Err(Error::infeasible(
            Constraint::SingleExecutor,
            format!("layer {j} assigned to unknown UAV {u}"),
        ));
    }
    if plan.placements.is_empty() || plan.layer_slot.len() != l {
        return Err(Error::contract("plan must carry placements and one slot per layer"));
    }
    if let Some(&s) = plan.layer_slot.iter().find(|&&s| s >= plan.placements.len()) {
        return Err(Error::contract(format!("layer slot {s} beyond {} placements", plan.placements.len())));
    }
    for placement in &plan.placements {
        if placement.num_uavs() != n {
            return Err(Error::infeasible(
                Constraint::OneCellPerUav,
                format!("placement lists {} UAVs, swarm has {n}", placement.num_uavs()),
            ));
        }
        placement.validate(grid)?;
        if opts.hot_cells {
            placement.validate_hot_cells(grid)?;
        }
    }
    let mut memory = vec![0u64; n];
    let mut compute = vec![0u64; n];
    for (j, &u) in plan.assignment.iter().enumerate() {
        memory[u] += network.cost(j).memory;
        compute[u] += network.cost(j).compute;
    }
    for u in 0..n {
        if memory[u] > budgets.memory[u] {
            return Err(Error::infeasible(
                Constraint::Memory,
                format!("UAV {u} needs {} B, has {} B", memory[u], budgets.memory[u]),
            ));
        }
        if compute[u] > budgets.compute[u] {
            return Err(Error::infeasible(
                Constraint::Compute,
                format!("UAV {u} needs {} mults, has {}", compute[u], budgets.compute[u]),
            ));
        }
    }
    Ok(())
}

/// Time to ship the captured image from the source to the layer-1 executor.
pub fn source_transfer_latency(
    plan: &AllocationPlan,
    network: &NetworkSpec,
    radio: &RadioParams,
    grid: &GridConfig,
) -> Result<f64> {
    let first = plan.assignment[0];
    if first == plan.source {
        return Ok(0.0);
    }
    let placement = plan.placement_for(0);
    let rate = radio.rate_between_cells(grid, placement.cell_of(plan.source), placement.cell_of(first))?;
    transfer_time(network.input_bytes(), rate, plan.source, first)
}

/// Compute time of all layers executed by `uav`.
pub fn compute_latency(plan: &AllocationPlan, uav: usize, network: &NetworkSpec, swarm: &[UavSpec]) -> Result<f64> {
    let speed = swarm[uav].speed;
    if !(speed > 0.0) {
        return Err(Error::config(format!("UAV {uav} has non-positive speed {speed}")));
    }
    Ok(plan
        .assignment
        .iter()
        .enumerate()
        .filter(|(_, &u)| u == uav)
        .map(|(j, _)| network.cost(j).compute as f64 / speed)
        .sum())
}

/// Time to move layer `layer`'s output to the executor of `layer + 1`,
/// evaluated under the placement in which `layer + 1` runs.
pub fn hop_transfer_latency(
    plan: &AllocationPlan,
    layer: usize,
    network: &NetworkSpec,
    radio: &RadioParams,
    grid: &GridConfig,
) -> Result<f64> {
    if layer + 1 >= plan.assignment.len() {
        return Err(Error::contract(format!("no layer after layer {layer}")));
    }
    let (from, to) = (plan.assignment[layer], plan.assignment[layer + 1]);
    if from == to {
        return Ok(0.0);
    }
    let placement = plan.placement_for(layer + 1);
    let rate = radio.rate_between_cells(grid, placement.cell_of(from), placement.cell_of(to))?;
    transfer_time(network.cost(layer).output_bytes, rate, from, to)
}

/// Validates `plan` against fresh budgets and sums its latency components.
pub fn total_latency(
    plan: &AllocationPlan,
    network: &NetworkSpec,
    swarm: &[UavSpec],
    radio: &RadioParams,
    grid: &GridConfig,
    opts: ValidationOptions,
) -> Result<LatencyBreakdown> {
    total_latency_with_budgets(plan, network, swarm, &Budgets::full(swarm), radio, grid, opts)
}

/// As [`total_latency`], validating against already partially consumed budgets.
pub fn total_latency_with_budgets(
    plan: &AllocationPlan,
    network: &NetworkSpec,
    swarm: &[UavSpec],
    budgets: &Budgets,
    radio: &RadioParams,
    grid: &GridConfig,
    opts: ValidationOptions,
) -> Result<LatencyBreakdown> {
    validate_plan(plan, network, budgets, grid, opts)?;
    score_valid_plan(plan, network, swarm, radio, grid)
}

/// Sums the latency components of a plan that has already been validated.
pub(crate) fn score_valid_plan(
    plan: &AllocationPlan,
    network: &NetworkSpec,
    swarm: &[UavSpec],
    radio: &RadioParams,
    grid: &GridConfig,
) -> Result<LatencyBreakdown> {
    let source_transfer = source_transfer_latency(plan, network, radio, grid)?;
    let compute = (0..swarm.len())
        .map(|u| compute_latency(plan, u, network, swarm))
        .collect::<Result<Vec<_>>>()?;
    let boundaries = network.num_layers().saturating_sub(1);
    let hop_transfers = (0..boundaries)
        .map(|j| hop_transfer_latency(plan, j, network, radio, grid))
        .collect::<Result<Vec<_>>>()?;
    let mut shared_bytes = 0;
    if plan.assignment[0] != plan.source {
        shared_bytes += network.input_bytes();
    }
    for j in 0..boundaries {
        if plan.assignment[j] != plan.assignment[j + 1] {
            shared_bytes += network.cost(j).output_bytes;
        }
    }
    let total = source_transfer + compute.iter().sum::<f64>() + hop_transfers.iter().sum::<f64>();
    Ok(LatencyBreakdown {
        source_transfer,
        compute,
        hop_transfers,
        total,
        shared_bytes,
    })
}
