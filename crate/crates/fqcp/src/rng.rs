//! Deterministic stream-based random numbers.
//!
//! Every stochastic draw in the crate flows from a single 64-bit base seed.
//! Sub-streams are derived from `(base_seed, purpose label, shot index)`, so
//! ensembles can be split across threads (or across separate runs with
//! disjoint shot ranges) and still produce bit-identical results when merged.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Purpose labels for independent sub-streams of one run.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Stream {
    /// Gate-flip draws of a trajectory.
    Gates,
    /// Injected-reset draws (one pre-drawn number per reset slot).
    Inject,
    /// Synthetic detection-event draws.
    Detect,
    /// Physical-noise draws (gate/memory/measurement errors).
    Noise,
    /// Bootstrap resampling.
    Bootstrap,
}

impl Stream {
    fn label(self) -> u64 {
        match self {
            Stream::Gates => 0x67617465,
            Stream::Inject => 0x696e6a65,
            Stream::Detect => 0x64657465,
            Stream::Noise => 0x6e6f6973,
            Stream::Bootstrap => 0x626f6f74,
        }
    }
}

/// splitmix64 finalizer; used only to expand seeds, never as the generator.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive the per-shot seed used by ensemble drivers.
pub fn shot_seed(base_seed: u64, shot: u64) -> u64 {
    mix(mix(base_seed) ^ shot.wrapping_mul(0xd1342543de82ef95))
}

/// Counter-mode generator for one (seed, stream) pair.
///
/// Wraps ChaCha8: a fixed key per seed with the stream id in the nonce, so
/// draws from different streams never alias no matter how many are taken.
#[derive(Clone, Debug)]
pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64, stream: Stream) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&mix(seed).to_le_bytes());
        key[8..16].copy_from_slice(&mix(seed ^ 0xabcd_ef01_2345_6789).to_le_bytes());
        key[16..24].copy_from_slice(&mix(seed.rotate_left(17)).to_le_bytes());
        key[24..32].copy_from_slice(&mix(seed.rotate_left(43)).to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream.label());
        Self { inner }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli draw.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in [0, n).
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        // Modulo bias is < 2^-40 for the ranges used here (n <= ~10^6).
        self.next_u64() % n
    }

    /// Standard normal via Box-Muller; used by test utilities.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(f64::MIN_POSITIVE);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
