//! Per-episode random streams.
//!
//! Episode `i` of a run with master seed `s` draws from ChaCha8 keyed by
//! `ChaCha8Rng::seed_from_u64(s)` with stream id `i` and word position 0.
//! Each node draw consumes one `f64` from `Rng::random` (53-bit
//! mantissa), in topological order. Streams never overlap, so episodes can
//! be evaluated in any order or on any number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Factory for episode streams under one master seed.
#[derive(Clone)]
pub struct StreamFactory {
    base: ChaCha8Rng,
}

impl StreamFactory {
    pub fn new(seed: u64) -> StreamFactory {
        StreamFactory { base: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        rng.set_word_pos(0);
        rng
    }
}

/// Index of the state selected by a uniform draw against `probs`.
/// Zero-probability states are never selected.
pub fn sample_index<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    // u landed in the rounding gap above the accumulated sum
    last_positive
}
