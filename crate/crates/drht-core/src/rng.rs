//! Deterministic random streams.
//!
//! Everything stochastic in the pipeline (weight init, scene synthesis,
//! exposure sampling, batch shuffling) draws from ChaCha8 streams derived
//! from explicit seeds, so a (seed, config) pair fully determines every
//! artifact byte. Gaussian samples come from a Box–Muller transform rather
//! than a distributions crate to keep the stream layout frozen.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent substream of the same seed (scene index, layer index, …).
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 random mantissa bits.
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn uniform_usize(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Modulo bias is irrelevant at the sizes used here (dataset lengths).
        (self.inner.next_u64() % n as u64) as usize
    }

    /// Zero-mean Gaussian with standard deviation `sigma`, rejected until it
    /// falls within `±bound_sigmas·sigma` (truncated normal).
    pub fn normal_truncated(&mut self, sigma: f64, bound_sigmas: f64) -> f64 {
        if sigma == 0.0 {
            return 0.0;
        }
        loop {
            // Box–Muller; u1 shifted away from zero so ln is finite.
            let u1 = 1.0 - self.unit();
            let u2 = self.unit();
            let z = libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2);
            if z.abs() <= bound_sigmas {
                return z * sigma;
            }
        }
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.uniform_usize(i + 1);
            items.swap(i, j);
        }
    }
}
