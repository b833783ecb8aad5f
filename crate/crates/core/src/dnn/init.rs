use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Architecture;

/// He initialization: weight entries drawn from `N(0, 2 / fan_in)` with
/// `fan_in = L_{l-1} + 1`, bias rows zero. Deterministic per seed.
pub fn kaiming_init(arch: &Architecture, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = DVector::zeros(arch.param_count());
    for l in 1..=arch.n_matrices() {
        let (rows, cols) = arch.matrix_shape(l);
        let off = arch.matrix_offset(l);
        let normal = Normal::new(0.0, (2.0 / rows as f64).sqrt()).expect("positive std");
        for c in 0..cols {
            for r in 0..rows - 1 {
                theta[off + c * rows + r] = normal.sample(&mut rng);
            }
        }
    }
    theta
}
