//! Seed derivation for reproducible random streams.
//!
//! Every consumer of randomness asks for a stream keyed by `(seed, domain,
//! index)`, so draws never depend on scheduling or on how many values some
//! other component consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Keep values stable: changing one changes every trace.
pub mod domain {
    pub const ROUND: u64 = 0x01;
    pub const TRIAL: u64 = 0x02;
    pub const INSTANCE: u64 = 0x03;
    pub const EXTENSION: u64 = 0x04;
    pub const PROBE: u64 = 0x05;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `(seed, domain, index)`.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(domain)) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Independent generator for `(seed, domain, index)`.
pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}
