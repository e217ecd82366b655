//! Poisson request arrivals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Request {
    pub id: usize,
    pub frame: usize,
    /// UAV that captured the image.
    pub source: usize,
}

/// Per-frame request counts drawn from `Poisson(rate)`, each request
/// captured by a uniformly random UAV.
pub fn generate_requests(rate: f64, frames: usize, uavs: usize, seed: u64) -> Result<Vec<Vec<Request>>> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::config(format!("request rate must be positive, got {rate}")));
    }
    if uavs == 0 {
        return Err(Error::config("cannot generate requests for an empty swarm"));
    }
    let poisson = Poisson::new(rate).map_err(|e| Error::config(format!("request rate {rate}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut id = 0;
    let mut schedule = Vec::with_capacity(frames);
    for frame in 0..frames {
        let count = poisson.sample(&mut rng) as usize;
        let requests = (0..count)
            .map(|_| {
                let r = Request {
                    id,
                    frame,
                    source: rng.random_range(0..uavs),
                };
                id += 1;
                r
            })
            .collect();
        schedule.push(requests);
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_matches_rate() {
        let s = generate_requests(5.0, 1000, 5, 1).unwrap();
        let mean = s.iter().map(Vec::len).sum::<usize>() as f64 / 1000.0;
        assert!((mean - 5.0).abs() < 0.25, "mean {mean}");
        assert!(s.iter().flatten().all(|r| r.source < 5));
    }

    #[test]
    fn tiny_rate_leaves_frames_empty() {
        let s = generate_requests(1e-4, 1000, 3, 2).unwrap();
        let empty = s.iter().filter(|f| f.is_empty()).count();
        assert!(empty >= 990);
    }

    #[test]
    fn seeded_and_rejects_bad_rate() {
        assert_eq!(generate_requests(3.0, 50, 4, 7).unwrap(), generate_requests(3.0, 50, 4, 7).unwrap());
        assert!(generate_requests(0.0, 5, 2, 0).is_err());
        assert!(generate_requests(f64::NAN, 5, 2, 0).is_err());
    }
}
