//! Seed derivation for independent random substreams.
//!
//! Every run, and every entity inside a run, draws from its own ChaCha8
//! stream keyed by a SplitMix64 hash of `(parent seed, stream kind, index)`.
//! Streams never share state, so the order in which entities or runs are
//! stepped cannot change any draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream kinds inside one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Run = 0x52_55_4e,
    UserMobility = 0x4d_4f_42,
    UserTraffic = 0x54_52_46,
    Drone = 0x44_42_53,
    Placement = 0x50_4c_43,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(parent ^ splitmix64(stream as u64)) ^ splitmix64(index.wrapping_add(1)))
}

/// Seed of run `index` in a batch keyed by `master`.
pub fn run_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, Stream::Run, index)
}

pub fn substream(run_seed: u64, stream: Stream, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(run_seed, stream, index))
}
