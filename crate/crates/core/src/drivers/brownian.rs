use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Driver;
use crate::error::{LabError, Result};

/// `count` i.i.d. standard normals from the ChaCha8 stream seeded by `seed`.
pub fn standard_normals(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `λ_k = √κ · B(t_k)` on `n` uniform steps over `[0, T]`.
///
/// The Gaussian stream depends only on `seed`, so runs with different `κ` and
/// the same seed are coupled path by path.
pub fn sample_brownian_driver(kappa: f64, horizon: f64, steps: usize, seed: u64) -> Result<Driver> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(LabError::InvalidArgument(format!("kappa must be positive, got {kappa}")));
    }
    if steps == 0 {
        return Err(LabError::InvalidArgument("Brownian driver needs at least one step".into()));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(LabError::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let sd = (horizon / steps as f64).sqrt();
    let scale = kappa.sqrt();
    let mut b = 0.0;
    let mut values = Vec::with_capacity(steps + 1);
    values.push(0.0);
    for z in standard_normals(seed, steps) {
        b += sd * z;
        values.push(scale * b);
    }
    Driver::new(values, horizon)
}
