//! Seeded random streams.
//!
//! Every randomized routine draws from a ChaCha20 generator keyed by the run
//! seed and a stream id. ChaCha is counter based, so a `(seed, stream)` pair
//! names a fixed sequence no matter which other streams were consumed first.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Stream ids used inside the crate. The high 32 bits carry the purpose, the
/// low 32 bits an index (epoch, view, ...).
pub mod stream {
    pub const PARAM_INIT: u64 = 1 << 32;
    pub const SHUFFLE: u64 = 2 << 32;
    pub const TRAIN_NOISE: u64 = 3 << 32;
    pub const SYNTH_LATENT: u64 = 4 << 32;
    pub const SYNTH_WEIGHTS: u64 = 5 << 32;
    pub const SYNTH_NOISE: u64 = 6 << 32;
    pub const GENERATIVE: u64 = 7 << 32;
    pub const PCCA: u64 = 8 << 32;
    pub const MNIST_ANGLE: u64 = 9 << 32;
    pub const MNIST_PARTNER: u64 = 10 << 32;
    pub const MNIST_NOISE: u64 = 11 << 32;
    pub const SPLIT: u64 = 12 << 32;
    pub const EVAL: u64 = 13 << 32;
}

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
