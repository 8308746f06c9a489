//! Counter-based variates: every draw is a pure function of (seed, index), so
//! ensembles can be generated in any order or in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const JITTER_STREAM: u64 = 0;
const SHIFT_STREAM: u64 = 1;

/// Uniform variate in [0, 1) for particle `index`.
pub(crate) fn jitter(seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(JITTER_STREAM);
    // one f64 consumes two 32-bit words
    rng.set_word_pos(index as u128 * 2);
    rng.random::<f64>()
}

// Additive recurrence based on the plastic number, the 2D analogue of the
// golden-ratio sequence.
const PLASTIC: f64 = 1.324_717_957_244_746;

/// Randomly shifted 2D Kronecker sequence.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kronecker {
    shift: [f64; 2],
}

impl Kronecker {
    pub(crate) fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(SHIFT_STREAM);
        Kronecker {
            shift: [rng.random::<f64>(), rng.random::<f64>()],
        }
    }

    pub(crate) fn point(&self, index: u64) -> [f64; 2] {
        let a1 = 1.0 / PLASTIC;
        let a2 = a1 * a1;
        let i = index as f64;
        [
            (self.shift[0] + i * a1).fract(),
            (self.shift[1] + i * a2).fract(),
        ]
    }
}
