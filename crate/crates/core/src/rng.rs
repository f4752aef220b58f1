//! Seeded random streams.
//!
//! Every consumer derives its own ChaCha stream from the run seed plus a
//! tag path, so results do not depend on the order in which independent
//! pieces (windows, start nodes, groups) are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

// Stream tags for the top-level consumers of the run seed.
pub const TAG_SOCIAL: u64 = 1;
pub const TAG_ROSTER: u64 = 2;
pub const TAG_HOME: u64 = 3;
pub const TAG_SCHEDULE: u64 = 4;
pub const TAG_ATTEND: u64 = 5;
pub const TAG_JITTER: u64 = 6;
pub const TAG_WALKS: u64 = 7;
pub const TAG_FIT: u64 = 8;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream from `seed` and a path of tags.
pub fn substream(seed: u64, tags: &[u64]) -> StreamRng {
    let key = tags
        .iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)));
    ChaCha8Rng::seed_from_u64(key)
}
