//! Deterministic seed derivation.
//!
//! Every random stream in a run is keyed by the master seed plus a small
//! tuple of integers (seed index, trial index, stream tag), mixed through
//! splitmix64. A single trial can therefore be replayed without replaying
//! the trials before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// One round of the splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `keys` into `master` one splitmix64 round at a time.
pub fn derive(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |acc, &k| splitmix64(acc ^ k))
}

pub fn rng_from(master: u64, keys: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(master, keys))
}

/// Stream tags.
pub mod stream {
    pub const SAMPLER: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const SA_ACCEPT: u64 = 3;
    pub const SHAP: u64 = 4;
}
