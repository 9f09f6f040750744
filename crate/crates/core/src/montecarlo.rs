//! Plain Monte Carlo survival estimates.
//!
//! Path `i` draws from ChaCha8 keyed by `seed` on stream `i`, so the estimate
//! does not depend on how paths are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dp::ExitSpec;
use crate::error::{Error, Result};
use crate::model::StepDistribution;

const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub half_width_95: f64,
    pub reps: u64,
    pub seed: u64,
}

impl McEstimate {
    fn bernoulli(hits: u64, reps: u64, seed: u64) -> Self {
        let mean = hits as f64 / reps as f64;
        McEstimate {
            mean,
            half_width_95: Z95 * (mean * (1.0 - mean) / reps as f64).sqrt(),
            reps,
            seed,
        }
    }

    pub fn covers(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.half_width_95
    }
}

/// Step sampler comparing a raw `u64` against cumulative thresholds.
struct Sampler {
    thresholds: Vec<u64>,
    steps: Vec<(i64, i64)>,
}

impl Sampler {
    fn new(sd: &StepDistribution) -> Self {
        let mut cum = 0.0;
        let mut thresholds = Vec::new();
        let mut steps = Vec::new();
        for (dx, dy, p) in sd.probabilities() {
            cum += p;
            thresholds.push((cum * 18446744073709551616.0).min(u64::MAX as f64) as u64);
            steps.push((dx, dy));
        }
        if let Some(last) = thresholds.last_mut() {
            *last = u64::MAX;
        }
        Sampler { thresholds, steps }
    }

    fn draw(&self, r: u64) -> (i64, i64) {
        let k = self.thresholds.partition_point(|&t| t < r);
        self.steps[k.min(self.steps.len() - 1)]
    }
}

fn survives_path(sampler: &Sampler, base: &ChaCha8Rng, path: u64, x: (i64, i64), n: u64, spec: ExitSpec) -> bool {
    let mut rng = base.clone();
    rng.set_stream(path);
    let mut z = x;
    for _ in 0..n {
        let (dx, dy) = sampler.draw(rng.random::<u64>());
        z = (z.0 + dx, z.1 + dy);
        if !spec.survives(z) {
            return false;
        }
    }
    true
}

/// Fraction of `reps` simulated paths from `x` with `T_x > n`.
pub fn simulate_survival(
    sd: &StepDistribution,
    x: (i64, i64),
    n: u64,
    reps: u64,
    seed: u64,
    spec: ExitSpec,
    threads: usize,
) -> Result<McEstimate> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    if !spec.survives(x) {
        return Err(Error::StartOutside(x.0, x.1));
    }
    if n == 0 {
        return Ok(McEstimate::bernoulli(reps, reps, seed));
    }
    let sampler = Sampler::new(&sd.clone().normalize());
    let base = ChaCha8Rng::seed_from_u64(seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let hits = pool.install(|| {
        (0..reps)
            .into_par_iter()
            .filter(|&i| survives_path(&sampler, &base, i, x, n, spec))
            .count() as u64
    });
    Ok(McEstimate::bernoulli(hits, reps, seed))
}
