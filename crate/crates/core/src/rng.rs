//! Seeded randomness and stream splitting.
//!
//! All randomness derives from one user seed. Sub-streams (per step, per example,
//! per sequence, per sample) use `seed ^ hash(indices)` where `hash` folds the
//! indices through splitmix64.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::diff::Tensor;

pub type Rng = rand_chacha::ChaCha8Rng;

/// Stream tags keep sub-streams of different purposes apart.
pub mod stream {
    pub const TRAIN_STEP: u64 = 1;
    pub const TRAIN_EXAMPLE: u64 = 2;
    pub const SAMPLE: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SYNTH: u64 = 5;
}

pub fn rng_from(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of an index tuple.
pub fn hash_indices(indices: &[u64]) -> u64 {
    indices
        .iter()
        .fold(0x6A09_E667_F3BC_C908u64, |h, &i| splitmix64(h ^ splitmix64(i)))
}

pub fn derive_seed(seed: u64, indices: &[u64]) -> u64 {
    seed ^ hash_indices(indices)
}

/// Standard normal draws in a tensor of the given shape.
pub fn normal_tensor(rng: &mut Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches draw count")
}
