//! UAV device descriptions and resource bookkeeping.

use serde::{Deserialize, Serialize};

use crate::catalog::LayerCost;
use crate::error::{Error, Result};

/// Static capabilities of one UAV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavSpec {
    /// Multiplications per second (`e_i`), already scaled to absolute units.
    pub speed: f64,
    /// Memory budget per frame in bytes (`m̄_i`).
    pub memory: u64,
    /// Compute budget per frame in multiplications (`c̄_i`).
    pub compute: u64,
}

impl UavSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(Error::config(format!("UAV speed must be positive, got {}", self.speed)));
        }
        Ok(())
    }

    pub fn fits(&self, cost: &LayerCost) -> bool {
        cost.memory <= self.memory && cost.compute <= self.compute
    }
}

/// Remaining memory/compute of every UAV within a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Budgets {
    pub memory: Vec<u64>,
    pub compute: Vec<u64>,
}

impl Budgets {
    pub fn full(swarm: &[UavSpec]) -> Self {
        Budgets {
            memory: swarm.iter().map(|u| u.memory).collect(),
            compute: swarm.iter().map(|u| u.compute).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.memory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memory.is_empty()
    }

    pub fn can_host(&self, uav: usize, cost: &LayerCost) -> bool {
        cost.memory <= self.memory[uav] && cost.compute <= self.compute[uav]
    }

    /// Charges `cost` to `uav`; returns false (and changes nothing) if it does not fit.
    pub fn try_charge(&mut self, uav: usize, cost: &LayerCost) -> bool {
        if !self.can_host(uav, cost) {
            return false;
        }
        self.memory[uav] -= cost.memory;
        self.compute[uav] -= cost.compute;
        true
    }
}

/// Builds a swarm by cycling through `speeds` (already scaled).
pub fn roster(n: usize, speeds: &[f64], memory: u64, compute: u64) -> Vec<UavSpec> {
    (0..n)
        .map(|i| UavSpec {
            speed: speeds[i % speeds.len()],
            memory,
            compute,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charge_only_when_fitting() {
        let swarm = roster(2, &[1.0], 100, 50);
        let mut b = Budgets::full(&swarm);
        let cost = LayerCost {
            compute: 30,
            memory: 60,
            output_bytes: 4,
        };
        assert!(b.try_charge(0, &cost));
        assert!(!b.try_charge(0, &cost));
        assert_eq!(b.memory, vec![40, 100]);
        assert_eq!(b.compute, vec![20, 50]);
    }
}
