//! Seeded, splittable random streams.
//!
//! Every stochastic step in the engine draws from a ChaCha8 stream derived
//! from a `(seed, label)` pair, so distinct purposes (graph topology, node
//! features, parameter init, ...) never share state and any run can be
//! replayed bit-exactly from its recorded seed. The derivation is fixed and
//! platform-independent:
//!
//! 1. hash the label with 64-bit FNV-1a,
//! 2. fold it into the seed and expand with four rounds of SplitMix64,
//! 3. use the 32 output bytes (little-endian) as the ChaCha8 key.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 64-bit FNV-1a hash of a byte string.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// SplitMix64 step: advances the state and returns the next output word.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Dedicated random stream for the given seed and purpose label.
///
/// Streams with different labels are statistically independent; the same
/// `(seed, label)` pair always yields the same stream.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut state = seed ^ fnv1a64(label.as_bytes());
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_and_label_repeats() {
        let a: Vec<f64> = stream(7, "init").random_iter().take(8).collect();
        let b: Vec<f64> = stream(7, "init").random_iter().take(8).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn labels_split_streams() {
        let a: u64 = stream(7, "init").random();
        let b: u64 = stream(7, "data").random();
        assert_ne!(a, b);
    }

    #[test]
    fn seeds_split_streams() {
        let a: u64 = stream(1, "init").random();
        let b: u64 = stream(2, "init").random();
        assert_ne!(a, b);
    }
}
