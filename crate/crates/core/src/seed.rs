//! Per-replica seed derivation.
//!
//! `mix(seed, i)` is the splitmix64 finalizer applied to
//! `seed + (i + 1) · 0x9E3779B97F4A7C15` (wrapping). Each replica seeds its own
//! `ChaCha8Rng` with the mixed value, so replica `i` sees the same stream no
//! matter which worker runs it or how many workers there are.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

pub fn replica_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // first output of the reference splitmix64 generator seeded with 0
        assert_eq!(mix(0, 0), 0xE220_A839_7B1D_CDAF);
        assert_ne!(mix(0, 1), mix(1, 0));
    }

    #[test]
    fn distinct_over_small_range() {
        let mut v: Vec<u64> = (0..10_000).map(|i| mix(42, i)).collect();
        v.sort_unstable();
        v.dedup();
        assert_eq!(v.len(), 10_000);
    }
}
