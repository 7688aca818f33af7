//! Counter-based random streams.
//!
//! Every random quantity in the crate is addressed by a `(seed, stream)` pair
//! and read from a ChaCha keystream, so a draw depends only on its address and
//! never on which thread produced it or in what order. Child seeds are derived
//! with a SplitMix64 finalizer.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::function::erf::erfc_inv;

/// Purpose tags used when deriving child seeds.
pub mod tag {
    pub const DISORDER: u64 = 0x01;
    pub const FRESH: u64 = 0x02;
    pub const OMEGA: u64 = 0x03;
    pub const TRIAL: u64 = 0x04;
    pub const SHARED: u64 = 0x05;
    pub const PERTURB: u64 = 0x06;
    pub const PHASE: u64 = 0x07;
    pub const SETUP: u64 = 0x08;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent child seed from `(seed, tag, index)`.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03)) ^ index)
}

/// A keyed random stream producing uniforms and standard normals.
#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha12Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Stream for `(derive_seed(seed, tag, index), 0)`.
    pub fn derived(seed: u64, tag: u64, index: u64) -> Self {
        Self::new(derive_seed(seed, tag, index), 0)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in the open interval (0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inversion of the uniform draw.
    pub fn next_normal(&mut self) -> f64 {
        let u = self.next_uniform();
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.next_normal();
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_uniform() < p
    }

    /// Uniform integer in `0..n`, `n > 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Lemire's multiply-shift; the bias is below 2^-64 * n and irrelevant here.
        ((self.rng.next_u64() as u128 * n as u128) >> 64) as u64
    }

    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_uniform()
    }
}
