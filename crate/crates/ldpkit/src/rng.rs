//! Deterministic random streams for Monte Carlo work.
//!
//! Every random quantity in the crate is drawn from a stream keyed by
//! `(seed, sample_index, domain)`. A stream is a self-contained generator, so
//! sample `i` sees the same draws no matter how many threads run or in which
//! order samples are scheduled.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Domain tags keep independent uses of the same `(seed, sample)` pair from
/// colliding (noise increments vs. random controls vs. probe perturbations).
pub mod domain {
    pub const NOISE: u64 = 1;
    pub const CONTROL: u64 = 2;
    pub const PROBE: u64 = 3;
    pub const RESTART: u64 = 4;
    pub const BRIDGE: u64 = 5;
}

const STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Generator for sample `sample` of the experiment keyed by `seed`.
pub fn stream(seed: u64, sample: u64, domain: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&sample.to_le_bytes());
    key[16..24].copy_from_slice(&domain.to_le_bytes());
    key[24..32].copy_from_slice(&STREAM_SALT.to_le_bytes());
    ChaCha12Rng::from_seed(key)
}
