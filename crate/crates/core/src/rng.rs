//! Seed derivation for reproducible, independent random streams.
//!
//! A run is driven by one root seed. Every consumer of randomness (each
//! agent's values, each strategy, the adversary, the winner draw) gets its
//! own ChaCha stream keyed by `(root, stream id)`, so adding draws in one
//! consumer never shifts the numbers another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Winner,
    Values(usize),
    Strategy(usize),
    Adversary,
    Bidding(usize),
    TieBreak,
    Sampling,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Winner => 1,
            Stream::Values(i) => 0x100 + i as u64,
            Stream::Strategy(i) => 0x200 + i as u64,
            Stream::Adversary => 0x300,
            Stream::Bidding(i) => 0x400 + i as u64,
            Stream::TieBreak => 0x500,
            Stream::Sampling => 0x600,
        }
    }
}

pub fn stream(root: u64, which: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(which.id());
    rng
}

/// Root seed for replicate `index` of an experiment seeded with `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
