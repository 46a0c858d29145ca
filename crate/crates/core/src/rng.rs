//! Deterministic counter-based random streams.
//!
//! Every randomized routine in the crate derives a fresh ChaCha stream from
//! `(seed, index)`, so results are identical regardless of how samples or
//! trials are chunked across workers.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sub-stream `index` of the generator family identified by `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
