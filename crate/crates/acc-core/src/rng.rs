//! Deterministic randomness for reproducible compilation runs.
//!
//! Everything downstream that needs randomness (evidence shuffling, drop
//! priorities) goes through [`SplitMix64`] so that a run is fully determined
//! by its seed. Per-example seeds are derived from the run seed and the
//! trajectory id via [`fnv1a64`], which keeps examples independent of corpus
//! order: adding or removing one trajectory does not reshuffle the others.

/// SplitMix64 pseudo-random generator.
///
/// Small, fast, and trivially portable; the output sequence for a given seed
/// is identical on every platform, which is what makes byte-identical reruns
/// possible.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    /// Creates a generator seeded with `seed`.
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Returns the next 64-bit output.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Returns a uniformly distributed index in `0..bound`.
    ///
    /// Uses plain modulo reduction. The bias is negligible for the bounds we
    /// use (candidate counts, never anywhere near 2^64) and the arithmetic is
    /// easy to reproduce in other languages.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        self.next_u64() % bound
    }
}

/// FNV-1a 64-bit hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xCBF2_9CE4_8422_2325u64;
    for &byte in bytes {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Derives the seed for one example from the run seed and a stable id.
pub fn example_seed(base_seed: u64, id: &str) -> u64 {
    base_seed ^ fnv1a64(id.as_bytes())
}

/// Shuffles `items` in place with the Fisher-Yates algorithm driven by a
/// [`SplitMix64`] seeded with `seed`.
///
/// The loop runs the index down from `len - 1` to `1` and swaps with
/// `next_u64() % (i + 1)`; fixing the traversal direction and the reduction
/// makes the permutation reproducible from the seed alone.
pub fn shuffle<T>(items: &mut [T], seed: u64) {
    let mut rng = SplitMix64::new(seed);
    for i in (1..items.len()).rev() {
        let j = rng.next_below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Returns a seeded permutation of `1..=n`.
///
/// `result[p]` is the 1-based original index of the element placed at
/// position `p`. `permute(0, seed)` is empty and `permute(1, seed)` is `[1]`
/// for every seed.
pub fn permute(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n).collect();
    shuffle(&mut order, seed);
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    /// Independent SplitMix64 written from the published constants with a
    /// different code shape (u128 widening instead of wrapping ops), used to
    /// cross-check the production generator.
    fn reference_sequence(seed: u64, n: usize) -> Vec<u64> {
        const MASK: u128 = u64::MAX as u128;
        let mut state = seed as u128;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            state = (state + 0x9E37_79B9_7F4A_7C15) & MASK;
            let mut z = state;
            z = ((z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9) & MASK;
            z = ((z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB) & MASK;
            out.push((z ^ (z >> 31)) as u64);
        }
        out
    }

    #[test]
    fn first_output_for_seed_zero_matches_published_value() {
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        // The reference implementation must agree before we trust it below.
        assert_eq!(reference_sequence(0, 1)[0], 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn matches_reference_sequence_for_many_seeds() {
        for seed in [0u64, 1, 42, 0xDEAD_BEEF, u64::MAX] {
            let mut rng = SplitMix64::new(seed);
            let got: Vec<u64> = (0..64).map(|_| rng.next_u64()).collect();
            assert_eq!(got, reference_sequence(seed, 64), "seed {seed}");
        }
    }

    #[test]
    fn permute_handles_tiny_inputs() {
        assert!(permute(0, 7).is_empty());
        for seed in 0..32u64 {
            assert_eq!(permute(1, seed), vec![1]);
        }
    }

    #[test]
    fn permute_is_a_bijection() {
        for seed in 0..100u64 {
            let order = permute(17, seed);
            let distinct: BTreeSet<usize> = order.iter().copied().collect();
            assert_eq!(distinct.len(), 17);
            assert_eq!(*distinct.iter().next().unwrap(), 1);
            assert_eq!(*distinct.iter().last().unwrap(), 17);
        }
    }

    #[test]
    fn permute_matches_independent_fisher_yates() {
        // Drive an independently coded Fisher-Yates with the reference
        // generator and compare against the production permutation.
        for (n, seed) in [(5usize, 42u64), (9, 0), (16, 123_456_789)] {
            let draws = reference_sequence(seed, n.saturating_sub(1));
            let mut expected: Vec<usize> = (1..=n).collect();
            let mut draw = draws.iter();
            let mut i = n - 1;
            while i >= 1 {
                let j = (draw.next().unwrap() % (i as u64 + 1)) as usize;
                expected.swap(i, j);
                i -= 1;
            }
            assert_eq!(permute(n, seed), expected, "n={n} seed={seed}");
        }
    }

    #[test]
    fn permute_frozen_vectors() {
        // Frozen outputs of the cross-checked implementation; any change to
        // the generator or the shuffle order breaks these on purpose.
        assert_eq!(permute(5, 42), vec![2, 3, 1, 5, 4]);
        assert_eq!(permute(4, 0), vec![3, 2, 1, 4]);
    }

    #[test]
    fn fnv1a64_matches_known_vectors() {
        // Standard FNV-1a test vectors.
        assert_eq!(fnv1a64(b""), 0xCBF2_9CE4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xAF63_DC4C_8601_EC8C);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171F73967E8);
    }

    #[test]
    fn example_seed_mixes_id_into_base() {
        let a = example_seed(42, "traj-001");
        let b = example_seed(42, "traj-002");
        assert_ne!(a, b);
        assert_eq!(a, example_seed(42, "traj-001"));
        assert_eq!(example_seed(0, ""), fnv1a64(b""));
    }
}
