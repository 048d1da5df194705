//! Seed streams.
//!
//! A run is driven by a single root seed. Every consumer of randomness asks
//! for a named stream plus an ordinal (sample index, worker index, iteration)
//! and receives an independent generator whose seed is
//! `splitmix64(root ^ splitmix64(stream * 2^32 + ordinal))`. Results never
//! depend on which thread happened to draw first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type SdmRng = ChaCha8Rng;

/// Named sub-streams of a root seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    PolicySampling = 1,
    Rollouts = 2,
    Scorer = 3,
    PairSampling = 4,
    Reference = 5,
    Noise = 6,
    Probe = 7,
    Generator = 8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStream {
    root: u64,
}

impl SeedStream {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// Seed for `stream` at position `ordinal`.
    pub fn seed(&self, stream: Stream, ordinal: u64) -> u64 {
        let tag = ((stream as u64) << 32).wrapping_add(ordinal);
        splitmix64(self.root ^ splitmix64(tag))
    }

    pub fn rng(&self, stream: Stream, ordinal: u64) -> SdmRng {
        SdmRng::seed_from_u64(self.seed(stream, ordinal))
    }

    /// A child stream rooted at the derived seed, for nested consumers.
    pub fn child(&self, stream: Stream, ordinal: u64) -> SeedStream {
        SeedStream::new(self.seed(stream, ordinal))
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
