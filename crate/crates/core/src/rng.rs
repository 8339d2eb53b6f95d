//! Seed derivation. Every random stream in a run comes from the root seed
//! plus a fixed per-component offset; stage and epoch streams are mixed in
//! with splitmix64 so they never alias across components.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const SPLIT: u64 = 0x0100;
pub const ENCODER_INIT: u64 = 0x1000;
pub const PROJECTION_INIT: u64 = 0x2000;
pub const CLASSIFIER_INIT: u64 = 0x3000;
pub const CFL_MINER: u64 = 0x1_0000;
pub const CFL_SHUFFLE: u64 = 0x2_0000;
pub const MLP_MINER: u64 = 0x3_0000;
pub const MLP_SHUFFLE: u64 = 0x4_0000;
pub const BASELINE: u64 = 0x5_0000;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sub_seed(root: u64, component: u64) -> u64 {
    root.wrapping_add(component)
}

pub fn stage_seed(root: u64, component: u64, stage: usize) -> u64 {
    splitmix64(sub_seed(root, component) ^ splitmix64(stage as u64))
}

pub fn epoch_seed(root: u64, component: u64, stage: usize, epoch: usize) -> u64 {
    splitmix64(stage_seed(root, component, stage) ^ splitmix64(!(epoch as u64)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
