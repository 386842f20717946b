//! Seeded random streams.
//!
//! Every consumer of randomness in a run draws from its own ChaCha stream
//! derived from the run seed, so adding or removing one consumer (say, a
//! make head) never shifts the numbers another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    EncoderInit = 1,
    MakeHeadInit = 2,
    ModelHeadInit = 3,
    Shuffle = 4,
    Dropout = 5,
    Split = 6,
    Synthetic = 7,
}

pub fn stream(seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
