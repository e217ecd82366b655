//! Checks shared by the focused integration tests and the acceptance run.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarm_infer::baselines::{
    alternating_suboptimal, exhaustive_oracle, greedy_heuristic, random_instance, random_policy, OracleCaps,
};
use swarm_infer::latency::{total_latency, ValidationOptions};
use swarm_infer::ppo::update::action_log_prob;
use swarm_infer::ppo::{loss_and_grad, LossWeights, PolicyNet, Sample, Shape};

fn toy_batch(net: &PolicyNet, rng: &mut ChaCha8Rng, forced: bool) -> Vec<(Sample, f64, f64)> {
    (0..8)
        .map(|k| {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = net.forward(&x).unwrap();
            let allocate = k % 2 == 0;
            let cell = k % 4;
            let lp = action_log_prob(&f.alloc_logits, &f.cell_logits, allocate, cell, forced);
            // Keep the ratio strictly inside the clip range so the loss is smooth.
            let old = lp + rng.random_range(-0.1..0.1);
            let s = Sample {
                observation: x,
                allocate,
                cell,
                forced_cell: forced.then_some(cell),
                log_prob: old,
                reward: 0.0,
                value: 0.0,
                done: false,
            };
            (s, rng.random_range(-1.5..1.5), rng.random_range(-1.0..1.0))
        })
        .collect()
}

/// Worst relative error between the analytic PPO loss gradient and
/// central differences, over every parameter of a small network.
pub fn gradient_check(forced: bool) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let shape = Shape { input: 6, hidden: 5, cells: 4 };
    let mut net = PolicyNet::random(shape, &mut rng);
    // Larger head weights than the default init so every path carries signal.
    for p in net.params.iter_mut() {
        *p += rng.random_range(-0.3..0.3);
    }
    let batch = toy_batch(&net, &mut rng, forced);
    let refs: Vec<(&Sample, f64, f64)> = batch.iter().map(|(s, a, r)| (s, *a, *r)).collect();
    let w = LossWeights {
        clip_range: 0.2,
        value_coef: 0.5,
        entropy_coef: 0.01,
    };
    let mut grad = vec![0.0; net.num_params()];
    loss_and_grad(&net, &refs, &w, &mut grad).unwrap();

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut scratch = vec![0.0; net.num_params()];
    for k in 0..net.num_params() {
        let orig = net.params[k];
        net.params[k] = orig + h;
        let up = loss_and_grad(&net, &refs, &w, &mut scratch).unwrap().total;
        net.params[k] = orig - h;
        let down = loss_and_grad(&net, &refs, &w, &mut scratch).unwrap().total;
        net.params[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        let err = (numeric - grad[k]).abs() / numeric.abs().max(grad[k].abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

#[derive(Debug, Default)]
pub struct Ordering {
    pub instances: usize,
    /// Plans whose re-validated latency differed from the solver's claim.
    pub invalid_plans: usize,
    pub oracle_above_alternating: usize,
    pub alternating_above_greedy: usize,
    pub greedy_above_random: usize,
    pub alternating_within_40: usize,
}

/// Runs every solver on `count` random oracle-sized instances.
pub fn solver_ordering(seed: u64, count: usize) -> Ordering {
    let caps = OracleCaps::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut o = Ordering {
        instances: count,
        ..Ordering::default()
    };
    for k in 0..count as u64 {
        let inst = random_instance(&caps, &mut rng);
        let oracle = exhaustive_oracle(&inst, &caps).unwrap();
        let alt = alternating_suboptimal(&inst, 10, 4, &caps, k).unwrap();
        let greedy = greedy_heuristic(&inst).unwrap();
        let random = random_policy(&inst, 100, 1000, k).unwrap();
        for s in [&oracle, &alt.best, &greedy].into_iter().chain(random.samples.iter()) {
            let again = total_latency(&s.plan, &inst.network, &inst.swarm, &inst.radio, &inst.grid, ValidationOptions::default());
            if again.as_ref().ok() != Some(&s.latency) {
                o.invalid_plans += 1;
            }
        }
        let (a, b, g, r) = (oracle.total(), alt.best.total(), greedy.total(), random.mean);
        o.oracle_above_alternating += usize::from(a > b + 1e-12);
        o.alternating_above_greedy += usize::from(b > g + 1e-12);
        o.greedy_above_random += usize::from(g > r * (1.0 + 1e-9));
        o.alternating_within_40 += usize::from(b <= 1.4 * a + 1e-12);
    }
    o
}
