//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riskshare_core::DiscreteRv;

/// `n` standard-normal-ish states (sum of uniforms), reproducible from `seed`.
pub fn random_total(n: usize, seed: u64) -> DiscreteRv {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n)
        .map(|_| (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0)
        .collect();
    DiscreteRv::new(values).expect("finite values")
}
