//! Deterministic per-sample random streams.
//!
//! Every Monte Carlo routine draws from a ChaCha8 stream keyed by
//! `(seed, sample index)`, so results are reproducible and independent of
//! evaluation order or worker count.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// RNG stream for sample `index` of experiment `seed`.
pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform draw in [0, 1) with 53 bits of precision.
#[inline]
pub fn uniform(rng: &mut Stream) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
