//! Counter-derived seeds for Monte Carlo replicates.

/// Derives the RNG seed for replicate `index` from a master seed.
///
/// SplitMix64 finalizer over `master ^ (index · φ)`. Each replicate seeds its
/// own generator from this value, so results are bit-identical for a fixed
/// master seed no matter how replicates are scheduled across workers.
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
