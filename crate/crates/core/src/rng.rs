//! Counter-based randomness.
//!
//! Every bit an agent ever draws is a pure function of
//! `(seed, agent, round, position)`: the triple `(seed, agent, round)` is
//! hashed into a stream key and position `k` reads the `k`-th output of a
//! splitmix64 stream started at that key. Nothing is stateful, so bits can be
//! requested in any order, from any thread, any number of times.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn splitmix64(x: u64) -> u64 {
    mix64(x.wrapping_add(GAMMA))
}

/// Key of the bit stream owned by `agent` in `round`.
#[inline]
pub fn stream_key(seed: u64, agent: u64, round: u64) -> u64 {
    let k = splitmix64(seed ^ 0x6D69_7865_642D_6D69);
    let k = splitmix64(k ^ agent);
    splitmix64(k ^ round.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Uniform 64-bit draw at `position` of the stream with the given key.
#[inline]
pub fn draw(key: u64, position: u64) -> u64 {
    mix64(key.wrapping_add(position.wrapping_add(1).wrapping_mul(GAMMA)))
}

/// Child seed number `index` of `master`. Used for per-trial and per-run seeds.
#[inline]
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ 0x005E_ED0F_5EED) ^ index.wrapping_mul(GAMMA))
}

/// Threshold `t` such that a uniform draw `u` is a zero bit iff `u < t`.
///
/// `p` is multiplied by 2^64 exactly (an f64 in [0, 1] has at most 64
/// significant fractional bits that matter here), so dyadic biases are
/// realized without rounding.
#[inline]
pub fn zero_threshold(p: f64) -> u128 {
    debug_assert!((0.0..=1.0).contains(&p));
    (p * 18_446_744_073_709_551_616.0) as u128
}

#[inline]
pub fn is_zero_bit(draw: u64, threshold: u128) -> bool {
    (draw as u128) < threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_are_exact_for_dyadic_biases() {
        assert_eq!(zero_threshold(0.5), 1u128 << 63);
        assert_eq!(zero_threshold(0.25), 1u128 << 62);
        assert_eq!(zero_threshold(1.0), 1u128 << 64);
        assert_eq!(zero_threshold(0.0), 0);
        assert!(is_zero_bit(u64::MAX, zero_threshold(1.0)));
        assert!(!is_zero_bit(0, zero_threshold(0.0)));
    }

    #[test]
    fn streams_differ_by_every_coordinate() {
        let base = stream_key(7, 3, 11);
        assert_ne!(base, stream_key(8, 3, 11));
        assert_ne!(base, stream_key(7, 4, 11));
        assert_ne!(base, stream_key(7, 3, 12));
        assert_eq!(base, stream_key(7, 3, 11));
        assert_ne!(draw(base, 0), draw(base, 1));
    }

    #[test]
    fn derived_seeds_do_not_collide_early() {
        let mut seen: Vec<u64> = (0..10_000).map(|i| derive_seed(42, i)).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 10_000);
    }
}
