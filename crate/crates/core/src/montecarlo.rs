//! Deterministic sharded Monte Carlo.
//!
//! A run of `samples` draws is split across a fixed number of shards. Shard
//! `k` draws from a ChaCha8 stream seeded by `seed` on stream `k`, so the
//! result depends only on `(seed, samples)` and never on the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg::CMatrix;

pub const SHARDS: usize = 32;

pub type McRng = ChaCha8Rng;

/// RNG for shard `stream` of a run seeded by `seed`.
pub fn shard_rng(seed: u64, stream: u64) -> McRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn shard_sizes(samples: usize) -> Vec<usize> {
    let base = samples / SHARDS;
    let extra = samples % SHARDS;
    (0..SHARDS).map(|k| base + usize::from(k < extra)).collect()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl McEstimate {
    /// Number of standard errors separating the estimate from `exact`.
    pub fn z_score(&self, exact: f64) -> f64 {
        if self.std_err == 0.0 {
            if (self.value - exact).abs() == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - exact).abs() / self.std_err
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        McEstimate {
            value: self.value * factor,
            std_err: self.std_err * factor.abs(),
            samples: self.samples,
        }
    }
}

/// Mean and standard error of `f` over `samples` sharded draws.
pub fn mean_scalar<F>(samples: usize, seed: u64, f: F) -> McEstimate
where
    F: Fn(&mut McRng) -> f64 + Sync,
{
    let partial: Vec<(f64, f64)> = shard_sizes(samples)
        .into_par_iter()
        .enumerate()
        .map(|(k, m)| {
            let mut rng = shard_rng(seed, k as u64);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..m {
                let x = f(&mut rng);
                s += x;
                s2 += x * x;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = partial
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    if samples == 0 {
        return McEstimate { value: 0.0, std_err: 0.0, samples };
    }
    let nf = samples as f64;
    let mean = s / nf;
    let var = if samples > 1 {
        ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    McEstimate { value: mean, std_err: (var / nf).sqrt(), samples }
}

/// Matrix-valued sample mean together with the per-entry standard errors
/// (stored as the real and imaginary parts of the second matrix).
pub fn mean_matrix<F>(n: usize, samples: usize, seed: u64, f: F) -> (CMatrix, CMatrix)
where
    F: Fn(&mut McRng) -> CMatrix + Sync,
{
    let zero = || (CMatrix::zeros(n, n), CMatrix::zeros(n, n));
    let partial: Vec<(CMatrix, CMatrix)> = shard_sizes(samples)
        .into_par_iter()
        .enumerate()
        .map(|(k, m)| {
            let mut rng = shard_rng(seed, k as u64);
            let (mut s, mut s2) = zero();
            for _ in 0..m {
                let x = f(&mut rng);
                s2 += x.map(|z| num_complex::Complex64::new(z.re * z.re, z.im * z.im));
                s += x;
            }
            (s, s2)
        })
        .collect();
    let (mut s, mut s2) = zero();
    for (a, b) in partial {
        s += a;
        s2 += b;
    }
    if samples == 0 {
        return zero();
    }
    let nf = samples as f64;
    let mean = s / num_complex::Complex64::new(nf, 0.0);
    let se = CMatrix::from_fn(n, n, |i, j| {
        let m = mean[(i, j)];
        let q = s2[(i, j)];
        let denom = (nf - 1.0).max(1.0);
        let vr = ((q.re - nf * m.re * m.re) / denom).max(0.0);
        let vi = ((q.im - nf * m.im * m.im) / denom).max(0.0);
        num_complex::Complex64::new((vr / nf).sqrt(), (vi / nf).sqrt())
    });
    (mean, se)
}
