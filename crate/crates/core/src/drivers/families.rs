//! Deterministic and randomized driver families used by checks and experiments.

use rand::Rng;

use super::{dirichlet_energy, Driver};

fn from_fn(horizon: f64, steps: usize, f: impl Fn(f64) -> f64) -> Driver {
    let dt = horizon / steps as f64;
    let values = (0..=steps)
        .map(|k| if k == 0 { 0.0 } else { f(if k == steps { horizon } else { k as f64 * dt }) })
        .collect();
    Driver::new(values, horizon).expect("family values are finite and start at zero")
}

pub fn zero_driver(horizon: f64, steps: usize) -> Driver {
    from_fn(horizon, steps, |_| 0.0)
}

/// `λ(t) = c t`.
pub fn linear_driver(slope: f64, horizon: f64, steps: usize) -> Driver {
    from_fn(horizon, steps, |t| slope * t)
}

/// `λ(t) = c √t`; its trace is a straight ray.
pub fn sqrt_driver(c: f64, horizon: f64, steps: usize) -> Driver {
    from_fn(horizon, steps, |t| c * t.sqrt())
}

/// `λ(t) = a sin(2π f t)`.
pub fn sine_driver(amplitude: f64, frequency: f64, horizon: f64, steps: usize) -> Driver {
    from_fn(horizon, steps, |t| amplitude * (2.0 * std::f64::consts::PI * frequency * t).sin())
}

/// Random piecewise-linear driver with `segments` pieces (`segments | steps`),
/// rescaled so its Dirichlet energy equals a uniform draw in `(0, max_energy]`.
pub fn random_pwl_driver<R: Rng + ?Sized>(
    rng: &mut R,
    segments: usize,
    horizon: f64,
    steps: usize,
    max_energy: f64,
) -> Driver {
    assert!(segments > 0 && steps % segments == 0, "segments must divide steps");
    let mut nodes = vec![0.0];
    let mut x = 0.0;
    for _ in 0..segments {
        x += rng.random_range(-1.0..1.0);
        nodes.push(x);
    }
    let coarse = Driver::new(nodes, horizon).expect("finite nodes");
    let fine = coarse.resample(steps).expect("positive steps");
    let e = dirichlet_energy(&fine).value();
    let target = max_energy * rng.random_range(1e-3..1.0f64);
    if e == 0.0 {
        return fine;
    }
    fine.scaled((target / e).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_pwl_respects_energy_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let d = random_pwl_driver(&mut rng, 8, 1.0, 64, 2.0);
            assert_eq!(d.steps(), 64);
            assert_eq!(d.values()[0], 0.0);
            assert!(dirichlet_energy(&d).value() <= 2.0 * (1.0 + 1e-12));
        }
    }
}
