//! Per-session random streams.
//!
//! Every session owns independent generators for profile construction,
//! the sales agent and the user. Each is a ChaCha8 generator seeded with
//! `mix(mix(mix(base_seed) ^ session) ^ tag)`, where `mix` is the
//! SplitMix64 finalizer. Nothing about scheduling or the experimental
//! condition enters the seed, so session `i` sees the same draws in every
//! condition and under any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SessionRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Profile,
    Sales,
    User,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Profile => 0x7072_6f66,
            Stream::Sales => 0x7361_6c65,
            Stream::User => 0x7573_6572,
        }
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(base_seed: u64, session: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ session) ^ stream.tag())
}

pub fn stream(base_seed: u64, session: u64, which: Stream) -> SessionRng {
    ChaCha8Rng::seed_from_u64(derive_seed(base_seed, session, which))
}
