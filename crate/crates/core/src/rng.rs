//! Seeded RNG substreams.
//!
//! Every randomized component draws from its own stream derived from the run
//! seed and a tag. Enabling or disabling one component (say, the adversarial
//! discriminator) then never shifts the draws of another, which is what makes
//! the α = 0 run bit-identical to the adversarial-free run.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Deterministic sub-seed for a named stream.
pub fn subseed(seed: u64, tag: &str) -> u64 {
    fnv1a(tag.as_bytes()) ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// A fresh RNG for the named stream.
pub fn substream(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subseed(seed, tag))
}
