//! Counter-based derivation of per-trial RNG streams.
//!
//! Every experiment in this crate draws its randomness from a single 64-bit
//! master seed. Trial `i` uses the ChaCha12 generator keyed by the master
//! seed with its 64-bit stream counter set to `i`, so trials are mutually
//! independent and a trial's output never depends on how trials are
//! scheduled across workers.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// RNG used by all experiments.
pub type StreamRng = ChaCha12Rng;

/// Returns the generator for stream `index` under `master_seed`.
pub fn stream(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}
