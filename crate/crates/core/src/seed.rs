//! Counter-based seed splitting.
//!
//! Every random sub-task draws from `ChaCha8Rng` seeded with the root seed and
//! its own stream id, so results do not depend on scheduling order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream_id);
    r
}

/// Stream id for a `(tag, index)` pair.
pub fn stream_id(tag: u32, index: u64) -> u64 {
    ((tag as u64) << 40) ^ index
}

/// Child seed for a `(tag, index)` sub-task.
pub fn derive(seed: u64, tag: u32, index: u64) -> u64 {
    stream(seed, stream_id(tag, index)).random()
}
