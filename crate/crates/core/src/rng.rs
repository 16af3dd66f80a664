//! Deterministic random streams.
//!
//! Every stochastic component draws from ChaCha8 ([`rand_chacha::ChaCha8Rng`]). The
//! generator is seeded with `seed_from_u64(seed)` and then switched to a numbered
//! stream with `set_stream(id)`, so a `(seed, stream)` pair names one reproducible
//! sequence on every platform. Seeds for landscapes, runs and objective samples are
//! combined from several integers with [`derive_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used by runs, landscapes and samplers.
pub type RunRng = ChaCha8Rng;

/// Stream that draws the initial population of a run.
pub const INIT_STREAM: u64 = 0;
/// Stream that drives selection and variation during a run.
pub const EVOLVE_STREAM: u64 = 1;
/// Stream used when building an NK landscape.
pub const LANDSCAPE_STREAM: u64 = 2;
/// Stream used for a single objective sample.
pub const SAMPLE_STREAM: u64 = 3;

pub fn stream(seed: u64, stream: u64) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds an ordered list of integers into one 64-bit seed.
///
/// `h = mix(h ^ mix(part + 0x9e3779b97f4a7c15 * (i + 1)))` over the parts, starting
/// from `h = parts.len()`. Order matters: `[1, 2]` and `[2, 1]` give different seeds.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().enumerate().fold(parts.len() as u64, |h, (i, &p)| {
        let salt = 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1);
        mix(h ^ mix(p.wrapping_add(salt)))
    })
}
