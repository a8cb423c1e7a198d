//! Deterministic seed plumbing.
//!
//! One master seed drives every random choice in the pipeline. Independent
//! streams (per tree, per epoch, per ensemble member, per benchmark cell)
//! get their own seeds through [`derive`], so parallel and serial execution
//! draw identical values no matter how work is scheduled.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive an independent child seed from a master seed and a stream id.
///
/// SplitMix64 finalizer over `master ^ (stream * golden_gamma)`: cheap,
/// stateless, and well-distributed even for consecutive stream ids.
pub fn derive(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Portable, seedable RNG used everywhere randomness is needed. ChaCha has
/// identical output on every platform and Rust release, unlike `StdRng`,
/// whose algorithm is explicitly unspecified.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// FNV-1a over a string, for turning stable names into stream ids.
pub fn fnv1a(text: &str) -> u64 {
    let mut hash: u64 = 0xCBF2_9CE4_8422_2325;
    for byte in text.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derive_is_deterministic_and_stream_sensitive() {
        assert_eq!(derive(42, 0), derive(42, 0));
        assert_ne!(derive(42, 0), derive(42, 1));
        assert_ne!(derive(42, 0), derive(43, 0));
    }

    #[test]
    fn rng_reproduces_across_instances() {
        let a: Vec<u64> = (0..8).map(|_| rng(7).gen::<u64>()).collect();
        let mut r = rng(7);
        let b: Vec<u64> = (0..8).map(|_| r.gen::<u64>()).collect();
        assert_eq!(a[0], b[0]);
        // fresh rng every draw repeats the first value; streaming advances
        assert!(b.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn fnv1a_matches_reference_values() {
        // published FNV-1a test vectors
        assert_eq!(fnv1a(""), 0xCBF2_9CE4_8422_2325);
        assert_eq!(fnv1a("a"), 0xAF63_DC4C_8601_EC8C);
        assert_eq!(fnv1a("foobar"), 0x8594_4171_F739_67E8);
    }
}
