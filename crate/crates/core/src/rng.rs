//! Counter-based random streams.
//!
//! Every consumer derives its generator from `(seed, stream)` so results do
//! not depend on call order or on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids reserved for the pipeline stages.
pub mod streams {
    pub const USER_PLACEMENT: u64 = 1;
    pub const AP_PERMUTATION: u64 = 2;
    pub const USER_PERMUTATION: u64 = 3;
    pub const CLUSTER_INIT: u64 = 4;
    pub const CLUSTER_USER_PERMUTATION: u64 = 5;
    /// Shadowing uses `SHADOWING_BASE + pair key`; keys never collide with
    /// the small ids above.
    pub const SHADOWING_BASE: u64 = 1 << 32;
    /// Oracle realizations use `REALIZATION_BASE + realization index`.
    pub const REALIZATION_BASE: u64 = 1 << 62;
}

/// Deterministic generator for one `(seed, stream)` pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
