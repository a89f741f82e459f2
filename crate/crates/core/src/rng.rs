//! Named random sub-streams derived from a single run seed.
//!
//! Every consumer of randomness draws from its own ChaCha stream so that one
//! component can be re-run without perturbing the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Generator,
    Split,
    Init,
    ClientSampling,
    Batching,
    GradCheck,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Generator => 1,
            Stream::Split => 2,
            Stream::Init => 3,
            Stream::ClientSampling => 4,
            Stream::Batching => 5,
            Stream::GradCheck => 6,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}

/// A sub-stream further keyed by an index (e.g. one per client or per round).
pub fn substream(seed: u64, which: Stream, index: u64) -> ChaCha8Rng {
    let mixed = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    let mut rng = ChaCha8Rng::seed_from_u64(mixed);
    rng.set_stream(which.id());
    rng.set_word_pos(0);
    rng
}
