//! Seeded Fisher–Yates shuffle.
//!
//! The generator is SplitMix64 seeded directly with the 64-bit seed, and
//! bounded draws use Lemire's multiply-shift with rejection, so a given seed
//! yields the same permutation on every platform and toolchain.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

/// Identifier recorded in run manifests.
pub const PRNG_NAME: &str = "splitmix64/lemire-fisher-yates/v1";

pub struct ShuffleRng {
    inner: SplitMix64,
}

impl ShuffleRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: SplitMix64::from_seed(seed.to_le_bytes()),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..n`. `n` must be non-zero.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let mut m = u128::from(self.next_u64()) * u128::from(n);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = u128::from(self.next_u64()) * u128::from(n);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }
}

pub fn shuffle_in_place<T>(items: &mut [T], seed: u64) {
    let mut rng = ShuffleRng::new(seed);
    for i in (1..items.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Uniform random permutation of `items`, fixed by `seed`.
pub fn shuffle<T>(mut items: Vec<T>, seed: u64) -> Vec<T> {
    shuffle_in_place(&mut items, seed);
    items
}
