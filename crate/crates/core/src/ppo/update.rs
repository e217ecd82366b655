//! Clipped-surrogate loss, its analytic gradient, and the epoch loop.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::adam::Adam;
use super::buffer::{compute_advantages, normalize, RolloutBuffer, Sample};
use super::net::{entropy, log_softmax, HeadGrads, PolicyNet};
use super::TrainConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub clip_range: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl From<&TrainConfig> for LossWeights {
    fn from(cfg: &TrainConfig) -> Self {
        LossWeights {
            clip_range: cfg.clip_range,
            value_coef: cfg.value_coef,
            entropy_coef: cfg.entropy_coef,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossStats {
    pub total: f64,
    /// Mean clipped surrogate (to be maximized).
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Joint log-probability of a factored action: `log p(a1) + log p(a2)`.
/// A forced cell contributes nothing.
pub fn action_log_prob(alloc_logits: &[f64; 2], cell_logits: &[f64], sample_alloc: bool, cell: usize, forced: bool) -> f64 {
    let la = log_softmax(alloc_logits);
    let mut lp = la[usize::from(sample_alloc)];
    if !forced {
        lp += log_softmax(cell_logits)[cell];
    }
    lp
}

/// Surrogate `min(η A, clip(η, 1-ε, 1+ε) A)` and its derivative in `η`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_range: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip_range, 1.0 + clip_range) * advantage;
    let inside = ratio > 1.0 - clip_range && ratio < 1.0 + clip_range;
    if unclipped <= clipped || inside {
        (unclipped.min(clipped), advantage)
    } else {
        (clipped, 0.0)
    }
}

/// Gradient of softmax entropy with respect to the logits.
fn entropy_grad(probs: &[f64], h: f64) -> Vec<f64> {
    probs
        .iter()
        .map(|&p| if p > 0.0 { -p * (p.ln() + h) } else { 0.0 })
        .collect()
}

/// Mean loss over `batch` and its gradient (accumulated into `grad`).
///
/// `loss = -surrogate + c_v (v - R)² - c_e (H_alloc + H_cell)`.
pub fn loss_and_grad(
    net: &PolicyNet,
    batch: &[(&Sample, f64, f64)],
    w: &LossWeights,
    grad: &mut [f64],
) -> Result<LossStats> {
    let inv = 1.0 / batch.len() as f64;
    let mut stats = LossStats::default();
    for &(s, adv, ret) in batch {
        let fwd = net.forward(&s.observation)?;
        let forced = s.forced_cell.is_some();
        let la = log_softmax(&fwd.alloc_logits);
        let pa: Vec<f64> = la.iter().map(|l| l.exp()).collect();
        let a1 = usize::from(s.allocate);
        let mut logp = la[a1];
        let cell_terms = if forced {
            None
        } else {
            let lc = log_softmax(&fwd.cell_logits);
            logp += lc[s.cell];
            Some(lc.iter().map(|l| l.exp()).collect::<Vec<f64>>())
        };
        let log_ratio = logp - s.log_prob;
        let ratio = log_ratio.exp();
        let (surr, d_ratio) = clipped_surrogate(ratio, adv, w.clip_range);
        let ha = entropy(&pa);
        let hc = cell_terms.as_ref().map(|p| entropy(p)).unwrap_or(0.0);
        let verr = fwd.value - ret;

        stats.surrogate += surr * inv;
        stats.value_loss += verr * verr * inv;
        stats.entropy += (ha + hc) * inv;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) * inv;
        if (ratio - 1.0).abs() > w.clip_range {
            stats.clip_fraction += inv;
        }

        // d loss / d logp = -(d surr / d ratio) * ratio
        let dlogp = -d_ratio * ratio * inv;
        let ega = entropy_grad(&pa, ha);
        let mut alloc = [0.0; 2];
        for k in 0..2 {
            let onehot = if k == a1 { 1.0 } else { 0.0 };
            alloc[k] = dlogp * (onehot - pa[k]) - w.entropy_coef * inv * ega[k];
        }
        let cells = cell_terms.map(|pc| {
            let egc = entropy_grad(&pc, hc);
            pc.iter()
                .enumerate()
                .map(|(k, &p)| {
                    let onehot = if k == s.cell { 1.0 } else { 0.0 };
                    dlogp * (onehot - p) - w.entropy_coef * inv * egc[k]
                })
                .collect()
        });
        let up = HeadGrads {
            alloc,
            cells,
            value: 2.0 * w.value_coef * verr * inv,
        };
        net.backward(&s.observation, &fwd, &up, grad);
    }
    stats.total = -stats.surrogate + w.value_coef * stats.value_loss - w.entropy_coef * stats.entropy;
    if !stats.total.is_finite() {
        return Err(Error::Numeric(format!("non-finite PPO loss: {stats:?}")));
    }
    Ok(stats)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct UpdateStats {
    /// Mean statistics of each epoch, in order.
    pub epochs: Vec<LossStats>,
}

impl UpdateStats {
    pub fn last(&self) -> LossStats {
        self.epochs.last().copied().unwrap_or_default()
    }
}

fn recompute(
    net: &PolicyNet,
    buffer: &RolloutBuffer,
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let samples = buffer.samples();
    let values = samples
        .iter()
        .map(|s| net.forward(&s.observation).map(|f| f.value))
        .collect::<Result<Vec<_>>>()?;
    let last_value = match (samples.last(), buffer.last_observation()) {
        (Some(s), Some(obs)) if !s.done => net.forward(obs)?.value,
        _ => 0.0,
    };
    let rewards: Vec<f64> = samples.iter().map(|s| s.reward).collect();
    let dones: Vec<bool> = samples.iter().map(|s| s.done).collect();
    compute_advantages(&rewards, &values, &dones, last_value, cfg.gamma, cfg.gae_lambda)
}

/// Runs `cfg.epochs` passes of minibatch Adam steps over `buffer`.
/// Advantages and returns are re-estimated with the current critic at the
/// start of every epoch and normalized per batch.
pub fn ppo_update<R: Rng + ?Sized>(
    net: &mut PolicyNet,
    opt: &mut Adam,
    buffer: &RolloutBuffer,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    if buffer.is_empty() {
        return Err(Error::contract("ppo_update called with an empty buffer"));
    }
    let weights = LossWeights::from(cfg);
    let samples = buffer.samples();
    let mut grad = vec![0.0; net.num_params()];
    let mut indices: Vec<usize> = (0..samples.len()).collect();
    let mut stats = UpdateStats::default();
    let mb = cfg.minibatch_size.clamp(1, samples.len());
    for _ in 0..cfg.epochs {
        let (mut adv, returns) = recompute(net, buffer, cfg)?;
        normalize(&mut adv);
        indices.shuffle(rng);
        let mut epoch = LossStats::default();
        let mut batches = 0.0;
        for chunk in indices.chunks(mb) {
            let batch: Vec<(&Sample, f64, f64)> = chunk.iter().map(|&k| (&samples[k], adv[k], returns[k])).collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let s = loss_and_grad(net, &batch, &weights, &mut grad)?;
            if cfg.max_grad_norm > 0.0 {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > cfg.max_grad_norm {
                    let scale = cfg.max_grad_norm / norm;
                    grad.iter_mut().for_each(|g| *g *= scale);
                }
            }
            opt.step(&mut net.params, &grad);
            epoch.total += s.total;
            epoch.surrogate += s.surrogate;
            epoch.value_loss += s.value_loss;
            epoch.entropy += s.entropy;
            epoch.approx_kl += s.approx_kl;
            epoch.clip_fraction += s.clip_fraction;
            batches += 1.0;
        }
        for v in [
            &mut epoch.total,
            &mut epoch.surrogate,
            &mut epoch.value_loss,
            &mut epoch.entropy,
            &mut epoch.approx_kl,
            &mut epoch.clip_fraction,
        ] {
            *v /= batches;
        }
        stats.epochs.push(epoch);
    }
    if !net.is_finite() {
        return Err(Error::Numeric("policy parameters became non-finite".into()));
    }
    Ok(stats)
}
