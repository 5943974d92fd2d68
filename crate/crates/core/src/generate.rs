//! Reproducible particle generators driven by SplitMix64.
//!
//! Every uniform variate is `next_u64() / 2^64`, so a given seed produces the
//! same particles in any implementation of the recurrence.

use std::f64::consts::PI;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::expansions::Charge;

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// SplitMix64 seeded with the raw state `seed`.
pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// Maps a raw draw onto `[0, 1]` as `u / 2^64`.
pub fn unit(raw: u64) -> f64 {
    raw as f64 / TWO_POW_64
}

fn next_unit(rng: &mut SplitMix64) -> f64 {
    unit(rng.next_u64())
}

/// A particle layout.
pub trait Distribution: Send + Sync {
    fn name(&self) -> &'static str;

    /// `n` unit-strength particles.
    fn sample(&self, n: usize, rng: &mut SplitMix64) -> Vec<Charge>;

    fn generate(&self, n: usize, seed: u64) -> Result<Vec<Charge>> {
        if n < 1 {
            return Err(Error::domain("particle count must be >= 1"));
        }
        Ok(self.sample(n, &mut rng(seed)))
    }
}

/// Points drawn i.i.d. in the unit square, `x` before `y`.
pub struct UniformDistribution;

impl Distribution for UniformDistribution {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn sample(&self, n: usize, rng: &mut SplitMix64) -> Vec<Charge> {
        (0..n)
            .map(|_| {
                let x = next_unit(rng);
                let y = next_unit(rng);
                Charge::real(x, y, 1.0)
            })
            .collect()
    }
}

/// Gaussian blobs. Blob centers are drawn first (`x`, `y` per blob, mapped
/// onto `[0.1, 0.9]`); particle `i` then joins blob `i mod blobs` and takes
/// one Box-Muller pair from two further draws.
pub struct ClusterDistribution {
    pub blobs: usize,
    pub sigma: f64,
}

impl Default for ClusterDistribution {
    fn default() -> Self {
        ClusterDistribution {
            blobs: 8,
            sigma: 0.02,
        }
    }
}

impl Distribution for ClusterDistribution {
    fn name(&self) -> &'static str {
        "cluster"
    }

    fn sample(&self, n: usize, rng: &mut SplitMix64) -> Vec<Charge> {
        let centers: Vec<(f64, f64)> = (0..self.blobs)
            .map(|_| {
                let cx = 0.1 + 0.8 * next_unit(rng);
                let cy = 0.1 + 0.8 * next_unit(rng);
                (cx, cy)
            })
            .collect();
        (0..n)
            .map(|i| {
                let (cx, cy) = centers[i % self.blobs];
                let u1 = (1.0 - next_unit(rng)).max(f64::MIN_POSITIVE);
                let u2 = next_unit(rng);
                let r = self.sigma * (-2.0 * u1.ln()).sqrt();
                let theta = 2.0 * PI * u2;
                Charge::real(cx + r * theta.cos(), cy + r * theta.sin(), 1.0)
            })
            .collect()
    }
}
