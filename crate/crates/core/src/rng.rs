//! Seed derivation and Gaussian streams.
//!
//! Every random object (a design matrix, a noise matrix, a support draw) gets
//! its own ChaCha stream keyed by `mix(seed, tag, index)`, so results do not
//! depend on evaluation order or thread count.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream tags for the objects drawn in one trial.
pub mod tag {
    pub const DESIGN: u64 = 0xD1;
    pub const NOISE: u64 = 0x0E;
    pub const SUPPORT: u64 = 0x5A;
    pub const TRIAL: u64 = 0x7A;
    pub const CHI2: u64 = 0xC2;
    pub const CONCENTRATION: u64 = 0xCC;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fixed 64-bit mixing of a base seed with two stream coordinates.
pub fn mix(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b)
}

/// Standard normal draws by the Box–Muller transform.
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, tag: u64, index: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(mix(seed, tag, index)),
            spare: None,
        }
    }

    /// Uniform on (0, 1], 53 bits.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// Uniform index in `0..n` by rejection.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.rng.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }
}
