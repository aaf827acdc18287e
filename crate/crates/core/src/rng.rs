//! Seedable, splittable random streams.
//!
//! Every run derives its generators from one `u64` seed. Independent
//! consumers (simulation axes, sweep points, filter steps) take their own
//! stream via [`substream`], so adding a consumer never perturbs another's
//! draws.

use rand::SeedableRng;
pub use rand_chacha::ChaCha20Rng as SimRng;

/// Identifier written into output headers.
pub const RNG_ALGORITHM: &str = "chacha20/rand_chacha-0.9";

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Stream `stream` of the generator family rooted at `seed`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
