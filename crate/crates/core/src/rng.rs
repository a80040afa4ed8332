//! Index-derived random streams.
//!
//! Every random decision is drawn from a stream keyed by
//! `(seed, epoch-or-split, index)`, so results never depend on the order in
//! which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream-space tags keeping unrelated consumers on disjoint streams.
pub mod salt {
    pub const INIT: u64 = 0x494e_4954;
    pub const SHUFFLE: u64 = 0x5348_5546;
    pub const MIXUP: u64 = 0x4d49_5855;
    pub const PAIRS: u64 = 0x5041_4952;
    pub const CLASSES: u64 = 0x434c_4153;
    pub const SAMPLES: u64 = 0x5341_4d50;
    pub const AUGMENT: u64 = 0x4155_474d;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with any number of stream coordinates.
pub fn derive_seed(seed: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(seed), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn stream(seed: u64, coords: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, coords))
}
