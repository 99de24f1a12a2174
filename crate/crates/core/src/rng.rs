//! Seeded random streams. Every stochastic component draws from its own
//! ChaCha stream so adding draws in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub mod streams {
    pub const INIT: u64 = 1;
    pub const ROLLOUT: u64 = 2;
    pub const DISCRIMINATOR: u64 = 3;
    pub const ENV: u64 = 4;
    pub const EVAL: u64 = 5;
}
