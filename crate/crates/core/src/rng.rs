//! Seed derivation.
//!
//! Every stochastic operation takes an explicit generator. Independent streams
//! are derived from a single 64-bit master seed by hashing it together with a
//! list of integer labels (setting, iteration, sample size, estimator index,
//! replicate, ...). The hash is SplitMix64 applied label by label, so a stream
//! depends only on the master seed and its own labels, never on how many other
//! streams were created before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type StdRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and a list of labels.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(master), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

/// Generator seeded from `master` and `labels`.
pub fn stream(master: u64, labels: &[u64]) -> StdRng {
    StdRng::seed_from_u64(derive_seed(master, labels))
}

/// Stable 64-bit label for a string (FNV-1a).
pub fn label(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, &[1, 2]).random();
        let b: u64 = stream(7, &[1, 2]).random();
        let c: u64 = stream(7, &[2, 1]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(derive_seed(7, &[]), derive_seed(8, &[]));
    }

    #[test]
    fn labels_are_stable() {
        assert_eq!(label("nn"), label("nn"));
        assert_ne!(label("nn"), label("rounding-cubic"));
    }
}
