//! Deterministic derivation of independent random substreams.
//!
//! Every randomized operation in this crate draws from a ChaCha stream keyed
//! by `(run seed, purpose domain, draw index)`. Draws for different purposes
//! or indices never share a stream, so results are byte-reproducible for a
//! fixed seed regardless of evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Purpose domains; keeping them distinct decorrelates, say, feature
/// resampling from change injection when both run under the same seed.
pub(crate) mod domain {
    pub const RESAMPLE: u64 = 1;
    pub const INJECT: u64 = 2;
    pub const SCENARIO_APS: u64 = 3;
    pub const SCENARIO_RSS: u64 = 4;
    pub const SCENARIO_SPLIT: u64 = 5;
}

/// Finalizer from the splitmix64 generator; decorrelates nearby seed values.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// RNG for the `index`-th draw of the given purpose domain under a run seed.
pub(crate) fn substream(seed: u64, domain: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}
