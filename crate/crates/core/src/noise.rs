//! Reproducible per-trajectory random streams.
//!
//! Every trajectory owns one ChaCha8 stream keyed by `(base_seed,
//! stream_index)`, so results do not depend on how trajectories are scheduled
//! across workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::fock::C64;

#[derive(Clone, Debug)]
pub struct NoiseStream {
    base_seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(base_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream(stream_index);
        Self {
            base_seed,
            stream_index,
            rng,
        }
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// `(u + iv)·√(dt/2)` with `u, v` independent standard normals.
    pub fn complex_wiener(&mut self, dt: f64) -> C64 {
        let u = self.standard_normal();
        let v = self.standard_normal();
        C64::new(u, v) * (0.5 * dt).sqrt()
    }
}

/// Complex Wiener increment with `M(dξ) = 0`, `M(dξ²) = 0`, `M(|dξ|²) = dt`.
pub fn sample_complex_wiener(dt: f64, stream: &mut NoiseStream) -> C64 {
    stream.complex_wiener(dt)
}
