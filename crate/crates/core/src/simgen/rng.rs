//! Portable random streams for scenario generation.
//!
//! Bits come from ChaCha8 seeded with `seed_from_u64` (rand_core's PCG32 seed
//! expansion). Derived variates use fixed recipes so another implementation
//! can reproduce a scenario draw for draw:
//!
//! - uniform in [0, 1): `(next_u64 >> 11) · 2⁻⁵³`
//! - standard normal: Box–Muller cosine branch, `sqrt(−2 ln(1 − u₁)) · cos(2π u₂)`,
//!   two uniforms per normal, no caching
//! - Poisson(λ): Knuth's product-of-uniforms method

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn gaussian(&mut self, sigma: f64) -> f64 {
        sigma * self.normal()
    }

    pub fn poisson(&mut self, lambda: f64) -> u32 {
        if lambda <= 0.0 {
            return 0;
        }
        let limit = (-lambda).exp();
        let mut k = 0;
        let mut p = self.uniform();
        while p > limit {
            k += 1;
            p *= self.uniform();
        }
        k
    }

    /// Uniform index in `0..n`; `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}
