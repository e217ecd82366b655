//! On-policy rollout storage and generalized advantage estimation.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Sample {
    pub observation: Vec<f64>,
    pub allocate: bool,
    pub cell: usize,
    /// Cell imposed by a frozen schedule; the cell head is then not sampled.
    pub forced_cell: Option<usize>,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    capacity: usize,
    samples: Vec<Sample>,
    /// Observation following the last stored step, used to bootstrap.
    last_observation: Option<Vec<f64>>,
}

impl RolloutBuffer {
    pub fn new(capacity: usize) -> Self {
        RolloutBuffer {
            capacity,
            samples: Vec::with_capacity(capacity),
            last_observation: None,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() >= self.capacity
    }

    pub fn push(&mut self, sample: Sample, next_observation: Vec<f64>) {
        self.samples.push(sample);
        self.last_observation = Some(next_observation);
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn last_observation(&self) -> Option<&[f64]> {
        self.last_observation.as_deref()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
        self.last_observation = None;
    }
}

/// GAE(γ, λ) advantages and `returns = advantages + values`.
///
/// `last_value` bootstraps the step after the final sample when that
/// sample is not terminal.
pub fn compute_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if n == 0 {
        return Err(Error::contract("cannot compute advantages of an empty buffer"));
    }
    if values.len() != n || dones.len() != n {
        return Err(Error::contract("reward/value/done lengths differ"));
    }
    let mut adv = vec![0.0; n];
    let mut gae = 0.0;
    for t in (0..n).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n { values[t + 1] } else { last_value };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        gae = delta + gamma * lambda * not_done * gae;
        adv[t] = gae;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Shifts and scales to zero mean and unit variance.
pub fn normalize(values: &mut [f64]) {
    let n = values.len() as f64;
    if n < 2.0 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    for v in values.iter_mut() {
        *v = (*v - mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_terminal_step() {
        let (a, r) = compute_advantages(&[1.0], &[0.0], &[true], 5.0, 0.99, 0.95).unwrap();
        assert_eq!(a, vec![1.0]);
        assert_eq!(r, vec![1.0]);
    }

    #[test]
    fn unit_discount_gives_reward_to_go() {
        let rewards = [1.0, -2.0, 0.5, 3.0];
        let (a, _) = compute_advantages(&rewards, &[0.0; 4], &[false, false, false, true], 0.0, 1.0, 1.0).unwrap();
        assert_eq!(a, vec![2.5, 1.5, 3.5, 3.0]);
    }

    #[test]
    fn two_step_hand_value() {
        let (a, _) = compute_advantages(&[0.0, 1.0], &[0.0, 0.0], &[false, true], 0.0, 0.99, 0.95).unwrap();
        assert!((a[0] - 0.9405).abs() < 1e-12);
        assert_eq!(a[1], 1.0);
    }

    #[test]
    fn episode_boundary_stops_propagation() {
        let (a, _) = compute_advantages(&[0.0, 1.0], &[0.0, 0.0], &[true, true], 0.0, 0.99, 0.95).unwrap();
        assert_eq!(a, vec![0.0, 1.0]);
    }

    #[test]
    fn bootstraps_unfinished_tail() {
        let (a, _) = compute_advantages(&[0.0], &[0.0], &[false], 2.0, 0.5, 0.95).unwrap();
        assert_eq!(a, vec![1.0]);
    }

    #[test]
    fn empty_is_error() {
        assert!(compute_advantages(&[], &[], &[], 0.0, 0.99, 0.95).is_err());
    }

    #[test]
    fn normalization() {
        let mut v = vec![1.0, 2.0, 3.0, 4.0];
        normalize(&mut v);
        let mean: f64 = v.iter().sum::<f64>() / 4.0;
        let var: f64 = v.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-6);
    }
}
