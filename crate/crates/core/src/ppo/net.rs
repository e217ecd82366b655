//! Shared-trunk actor-critic MLP with a binary allocation head, a cell head
//! and a scalar value head. Parameters live in one flat vector so the
//! optimizer and gradient checks can treat them uniformly.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index ranges of every tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub input: usize,
    pub hidden: usize,
    pub cells: usize,
}

#[derive(Debug, Clone, Copy)]
struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wa: usize,
    ba: usize,
    wc: usize,
    bc: usize,
    wv: usize,
    bv: usize,
    total: usize,
}

impl Shape {
    fn offsets(&self) -> Offsets {
        let (i, h, c) = (self.input, self.hidden, self.cells);
        let w1 = 0;
        let b1 = w1 + h * i;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let wa = b2 + h;
        let ba = wa + 2 * h;
        let wc = ba + 2;
        let bc = wc + c * h;
        let wv = bc + c;
        let bv = wv + h;
        Offsets {
            w1,
            b1,
            w2,
            b2,
            wa,
            ba,
            wc,
            bc,
            wv,
            bv,
            total: bv + 1,
        }
    }

    pub fn num_params(&self) -> usize {
        self.offsets().total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    shape: Shape,
    pub params: Vec<f64>,
}

/// Output of one forward pass together with the activations backprop needs.
#[derive(Debug, Clone)]
pub struct Forward {
    pub alloc_logits: [f64; 2],
    pub cell_logits: Vec<f64>,
    pub value: f64,
    h1: Vec<f64>,
    h2: Vec<f64>,
}

impl Forward {
    pub fn alloc_probs(&self) -> [f64; 2] {
        let p = softmax(&self.alloc_logits);
        [p[0], p[1]]
    }

    pub fn cell_probs(&self) -> Vec<f64> {
        softmax(&self.cell_logits)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

/// Upstream gradients of a scalar loss with respect to the three heads.
#[derive(Debug, Clone)]
pub struct HeadGrads {
    pub alloc: [f64; 2],
    pub cells: Option<Vec<f64>>,
    pub value: f64,
}

impl PolicyNet {
    /// All-zero parameters: uniform heads and zero value.
    pub fn zeros(shape: Shape) -> Self {
        PolicyNet {
            shape,
            params: vec![0.0; shape.num_params()],
        }
    }

    /// Scaled-Gaussian init (std `gain / sqrt(fan_in)`); head biases are zero
    /// and head weights are shrunk so initial policies are near uniform.
    pub fn random<R: Rng + ?Sized>(shape: Shape, rng: &mut R) -> Self {
        let mut net = Self::zeros(shape);
        let o = shape.offsets();
        let (i, h, c) = (shape.input, shape.hidden, shape.cells);
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, gain: f64| {
            let normal = Normal::new(0.0, gain / (fan_in as f64).sqrt()).expect("valid std");
            for p in &mut net.params[range] {
                *p = normal.sample(rng);
            }
        };
        fill(o.w1..o.w1 + h * i, i, 2f64.sqrt());
        fill(o.w2..o.w2 + h * h, h, 2f64.sqrt());
        fill(o.wa..o.wa + 2 * h, h, 0.01);
        fill(o.wc..o.wc + c * h, h, 0.01);
        fill(o.wv..o.wv + h, h, 1.0);
        net
    }

    pub fn from_params(shape: Shape, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(shape);
        if params.len() != net.params.len() {
            return Err(Error::config(format!(
                "parameter count {} does not match shape ({} expected)",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        let s = self.shape;
        if x.len() != s.input {
            return Err(Error::contract(format!(
                "state has {} features, network expects {}",
                x.len(),
                s.input
            )));
        }
        let o = self.shape.offsets();
        let p = &self.params;
        let h = s.hidden;
        let mut h1 = vec![0.0; h];
        for (r, out) in h1.iter_mut().enumerate() {
            let row = &p[o.w1 + r * s.input..o.w1 + (r + 1) * s.input];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + p[o.b1 + r];
            *out = z.tanh();
        }
        let mut h2 = vec![0.0; h];
        for (r, out) in h2.iter_mut().enumerate() {
            let row = &p[o.w2 + r * h..o.w2 + (r + 1) * h];
            let z: f64 = row.iter().zip(&h1).map(|(w, v)| w * v).sum::<f64>() + p[o.b2 + r];
            *out = z.tanh();
        }
        let dense = |w: usize, b: usize, rows: usize| -> Vec<f64> {
            (0..rows)
                .map(|r| {
                    let row = &p[w + r * h..w + (r + 1) * h];
                    row.iter().zip(&h2).map(|(a, v)| a * v).sum::<f64>() + p[b + r]
                })
                .collect()
        };
        let a = dense(o.wa, o.ba, 2);
        let cell_logits = dense(o.wc, o.bc, s.cells);
        let value = dense(o.wv, o.bv, 1)[0];
        Ok(Forward {
            alloc_logits: [a[0], a[1]],
            cell_logits,
            value,
            h1,
            h2,
        })
    }

    /// Accumulates `d loss / d params` into `grad` given head gradients.
    pub fn backward(&self, x: &[f64], fwd: &Forward, up: &HeadGrads, grad: &mut [f64]) {
        let s = self.shape;
        let o = self.shape.offsets();
        let p = &self.params;
        let h = s.hidden;
        let mut dh2 = vec![0.0; h];

        let mut head = |w: usize, b: usize, dz: &[f64], dh2: &mut [f64]| {
            for (r, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad[b + r] += d;
                let row = w + r * h;
                for k in 0..h {
                    grad[row + k] += d * fwd.h2[k];
                    dh2[k] += d * p[row + k];
                }
            }
        };
        head(o.wa, o.ba, &up.alloc, &mut dh2);
        if let Some(dc) = &up.cells {
            head(o.wc, o.bc, dc, &mut dh2);
        }
        head(o.wv, o.bv, &[up.value], &mut dh2);

        let dz2: Vec<f64> = dh2.iter().zip(&fwd.h2).map(|(d, a)| d * (1.0 - a * a)).collect();
        let mut dh1 = vec![0.0; h];
        for (r, &d) in dz2.iter().enumerate() {
            grad[o.b2 + r] += d;
            let row = o.w2 + r * h;
            for k in 0..h {
                grad[row + k] += d * fwd.h1[k];
                dh1[k] += d * p[row + k];
            }
        }
        for (r, (&d, &a)) in dh1.iter().zip(&fwd.h1).enumerate() {
            let dz = d * (1.0 - a * a);
            grad[o.b1 + r] += dz;
            let row = o.w1 + r * s.input;
            for (k, &xv) in x.iter().enumerate() {
                grad[row + k] += dz * xv;
            }
        }
    }
}

/// On-disk checkpoint: a shape header plus the row-major flat parameters in
/// the order `w1, b1, w2, b2, w_alloc, b_alloc, w_cell, b_cell, w_value, b_value`
/// (every weight matrix stored `[out][in]`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub shape: Shape,
    pub params: Vec<f64>,
}

pub const CHECKPOINT_FORMAT: &str = "swarm-infer-policy";

impl Checkpoint {
    pub fn of(net: &PolicyNet) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: 1,
            shape: net.shape(),
            params: net.params.clone(),
        }
    }

    pub fn into_net(self) -> Result<PolicyNet> {
        if self.format != CHECKPOINT_FORMAT || self.version != 1 {
            return Err(Error::config(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        PolicyNet::from_params(self.shape, self.params)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::config(format!("cannot read checkpoint {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::config(format!("checkpoint {}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SHAPE: Shape = Shape {
        input: 54,
        hidden: 64,
        cells: 25,
    };

    #[test]
    fn zero_weights_give_uniform_heads() {
        let net = PolicyNet::zeros(SHAPE);
        let f = net.forward(&vec![0.3; 54]).unwrap();
        assert_eq!(f.alloc_probs(), [0.5, 0.5]);
        for p in f.cell_probs() {
            assert!((p - 1.0 / 25.0).abs() < 1e-15);
        }
        assert_eq!(f.value, 0.0);
    }

    #[test]
    fn random_heads_are_distributions_and_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = PolicyNet::random(SHAPE, &mut rng);
        let x: Vec<f64> = (0..54).map(|k| (k as f64 * 0.37).sin()).collect();
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert!((a.alloc_probs().iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!((a.cell_probs().iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.cell_logits, b.cell_logits);
    }

    #[test]
    fn dimension_mismatch() {
        let net = PolicyNet::zeros(SHAPE);
        assert!(matches!(net.forward(&[0.0; 3]), Err(Error::Contract(_))));
    }

    #[test]
    fn entropy_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let net = PolicyNet::random(SHAPE, &mut rng);
            let x: Vec<f64> = (0..54).map(|_| rng.random::<f64>()).collect();
            let f = net.forward(&x).unwrap();
            let ha = entropy(&f.alloc_probs());
            let hc = entropy(&f.cell_probs());
            assert!(ha >= 0.0 && ha <= 2f64.ln() + 1e-12);
            assert!(hc >= 0.0 && hc <= 25f64.ln() + 1e-12);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = PolicyNet::random(SHAPE, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.json");
        Checkpoint::of(&net).save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap().into_net().unwrap();
        assert_eq!(back.params, net.params);
    }
}
