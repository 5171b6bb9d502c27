//! Seeded, platform-independent randomness.
//!
//! Every random decision in the toolkit (holdout shuffles, fold shuffles,
//! augmentation draws, mini-batch order) is driven by [`Stream`], a
//! xoshiro256++ generator whose 256-bit state is expanded from a 64-bit seed
//! with SplitMix64. Sub-streams are keyed by SHA-256 over a domain tag and the
//! caller's key material, so a stream depends only on its key and never on
//! scheduling or iteration order.
//!
//! Draw sequences:
//!
//! * `below(n)`: Lemire's multiply-shift with rejection, unbiased.
//! * `unit_f64()`: top 53 bits of the next output scaled by 2^-53, in [0, 1).
//! * `shuffle`: Fisher–Yates from the last index down, swapping `i` with
//!   `below(i + 1)`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct Stream(Xoshiro256PlusPlus);

impl Stream {
    pub fn from_seed(seed: u64) -> Self {
        Stream(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    /// Derive an independent stream from `seed` and a list of key parts.
    pub fn derive(seed: u64, domain: &str, parts: &[&[u8]]) -> Self {
        Self::from_seed(derive_seed(seed, domain, parts))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let mut m = (self.next_u64() as u128) * (n as u128);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = (self.next_u64() as u128) * (n as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// First eight bytes (little-endian) of
/// `SHA-256(domain || 0x00 || seed_le || for each part: len_le_u64 || part)`.
pub fn derive_seed(seed: u64, domain: &str, parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(domain.as_bytes());
    hasher.update([0u8]);
    hasher.update(seed.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Golden vector: changing the generator family or the seeding rule breaks
    // every persisted plan, so the first outputs are frozen here.
    #[test]
    fn golden_stream_seed_zero() {
        let mut s = Stream::from_seed(0);
        let got: Vec<u64> = (0..3).map(|_| s.next_u64()).collect();
        assert_eq!(got, GOLDEN_SEED0.to_vec());
    }

    const GOLDEN_SEED0: [u64; 3] = [0x53175d61490b23df, 0x61da6f3dc380d507, 0x5c0fdf91ec9a7bfc];

    #[test]
    fn below_stays_in_range() {
        let mut s = Stream::from_seed(7);
        for n in [1u64, 2, 3, 10, 1000, u64::MAX] {
            for _ in 0..200 {
                assert!(s.below(n) < n);
            }
        }
    }

    #[test]
    fn unit_in_half_open_interval() {
        let mut s = Stream::from_seed(1);
        for _ in 0..10_000 {
            let u = s.unit_f64();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn shuffle_is_permutation_and_reproducible() {
        let mut a: Vec<u32> = (0..50).collect();
        let mut b = a.clone();
        Stream::from_seed(42).shuffle(&mut a);
        Stream::from_seed(42).shuffle(&mut b);
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(a, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn derived_streams_differ_by_key() {
        let a = derive_seed(1, "x", &[b"abc"]);
        let b = derive_seed(1, "x", &[b"abd"]);
        let c = derive_seed(1, "y", &[b"abc"]);
        let d = derive_seed(1, "x", &[b"ab", b"c"]);
        assert!(a != b && a != c && a != d);
        assert_eq!(a, derive_seed(1, "x", &[b"abc"]));
    }
}
