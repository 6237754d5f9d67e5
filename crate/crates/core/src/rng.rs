//! Deterministic random streams.
//!
//! Every random decision in the toolkit (splits, fold assignment, imbalance
//! subsampling, synthetic data) draws from [`SeededRng`], a SplitMix64
//! generator whose state is initialised to the raw 64-bit seed. The derived
//! operations are pinned so that other implementations can reproduce them
//! bit for bit:
//!
//! * `next_f64`: `(next_u64() >> 11) * 2^-53`, uniform on `[0, 1)`.
//! * `below(n)`: Lemire's widening multiply with rejection of the biased
//!   low range (`lo < (2^64 - n) % n`).
//! * `shuffle`: Fisher-Yates from the back, `j = below(i + 1)` for
//!   `i = len-1 ..= 1`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: SplitMix64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: SplitMix64::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let threshold = n.wrapping_neg() % n;
        loop {
            let wide = (self.next_u64() as u128) * (n as u128);
            let lo = wide as u64;
            if lo >= threshold {
                return (wide >> 64) as u64;
            }
        }
    }

    /// `true` with probability `p`.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Derives a child seed from a master seed and a textual key.
///
/// FNV-1a over the key bytes, xor the master seed, then one SplitMix64
/// output. Independent of call order, so grid cells can be scheduled freely.
pub fn derive_seed(master: u64, key: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in key.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    SeededRng::new(hash ^ master).next_u64()
}
