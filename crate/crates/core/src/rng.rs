//! Seeded random streams.
//!
//! Every replica owns an independent ChaCha8 stream whose seed is
//! `splitmix64(master ^ splitmix64(stream_id + 1))`. Adding replicas never
//! changes the streams of the existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every stochastic routine in the crate.
pub type SamplerRng = ChaCha8Rng;

/// Stream id reserved for the swap coordinator.
pub const COORDINATOR_STREAM: u64 = u64::MAX - 1;
/// Stream id reserved for drawing chain starting points.
pub const INIT_STREAM: u64 = u64::MAX - 2;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_seed(master: u64, stream_id: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream_id.wrapping_add(1)))
}

pub fn stream_rng(master: u64, stream_id: u64) -> SamplerRng {
    SamplerRng::seed_from_u64(stream_seed(master, stream_id))
}
