//! Named, independently seeded random streams.
//!
//! Each subsystem draws from its own stream, derived from the master seed and
//! the stream name with a fixed hash, so extra draws in one subsystem never
//! shift the sequence seen by another.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream names used by the simulator.
pub mod streams {
    pub const MOBILITY: &str = "mobility";
    pub const MAC: &str = "mac";
    pub const TRAFFIC: &str = "traffic";
    pub const TOPOLOGY: &str = "topology";
    pub const CONTROL: &str = "control";
}

pub struct RngStream {
    name: String,
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    /// Panics on an empty name.
    pub fn new(name: &str, master_seed: u64) -> Self {
        assert!(!name.is_empty(), "rng stream name must be nonempty");
        let seed = derive_seed(name, master_seed);
        RngStream {
            name: name.to_owned(),
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The derived per-stream seed.
    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// FNV-1a over the name, then a splitmix64 finalizer mixed with the master seed.
pub fn derive_seed(name: &str, master_seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(h ^ splitmix64(master_seed))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draws(name: &str, seed: u64) -> Vec<u64> {
        let mut s = RngStream::new(name, seed);
        (0..100).map(|_| s.gen()).collect()
    }

    #[test]
    fn same_name_and_seed_repeat() {
        assert_eq!(draws("mobility", 42), draws("mobility", 42));
    }

    #[test]
    fn different_names_diverge() {
        let a = draws("mobility", 42);
        let b = draws("mac", 42);
        assert!(a.iter().zip(&b).all(|(x, y)| x != y));
    }

    #[test]
    fn different_seeds_diverge() {
        let a = draws("mobility", 42);
        let b = draws("mobility", 43);
        assert!(a.iter().zip(&b).all(|(x, y)| x != y));
    }

    #[test]
    fn derived_seed_is_pinned() {
        // Frozen so a change to the derivation shows up as a test failure
        // rather than as silently different experiment results.
        assert_eq!(derive_seed("mobility", 42), derive_seed("mobility", 42));
        let pinned = derive_seed("mobility", 42);
        assert_eq!(pinned, PINNED_MOBILITY_42);
    }

    const PINNED_MOBILITY_42: u64 = 13304230216094355398;

    #[test]
    #[should_panic]
    fn empty_name_rejected() {
        RngStream::new("", 1);
    }
}
