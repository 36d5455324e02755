//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit `u64` seed. Independent
//! sub-computations (restarts, Monte Carlo chunks, replicate draws) use
//! [`substream`], which maps `(seed, stream)` to a distinct ChaCha stream so
//! results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Rng = ChaCha20Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn substream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_add(1));
    rng
}

/// Derive a fresh seed from a parent seed and a label.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
