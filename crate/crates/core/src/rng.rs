//! Seed derivation for reproducible, schedule-independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Named stream families. Each consumer of randomness gets its own domain so
/// adding draws in one place never shifts another.
pub mod domain {
    pub const POOL: u64 = 1;
    pub const TRAIN_PAIRS: u64 = 2;
    pub const TEST_PAIRS: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SIM_X0: u64 = 5;
    pub const SIM_RANDOM_WEIGHTS: u64 = 6;
    pub const SESSION: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream `index` of family `domain` under master `seed`.
pub fn stream(seed: u64, domain: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}

/// Uniform sample on `[lo, hi]`; a collapsed range returns `lo` but still
/// consumes one draw so stream positions do not depend on the range.
pub fn uniform<R: rand::Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}
