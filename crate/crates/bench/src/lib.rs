//! Fixtures shared by the benchmarks.

use qmet_core::matcore::DensityMatrix;
use qmet_core::random::random_full_rank_density;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 0x5eed;

pub fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SEED)
}

/// Full-rank state of dimension `d`, fixed by [`SEED`].
pub fn mixed_state(d: usize) -> DensityMatrix {
    random_full_rank_density(&mut rng(), d, 0.05)
}
