use super::{dirichlet_energy, Driver};
use crate::error::{LabError, Result};

/// Output of [`mollify`]: the smoothed driver together with the two
/// quantities its contract is stated in.
#[derive(Clone, Debug)]
pub struct Mollified {
    pub driver: Driver,
    /// Kernel bandwidth that met the target.
    pub bandwidth: f64,
    /// `I(λ − φ)`, strictly below `ε²/2`.
    pub energy_gap: f64,
    /// `‖λ − φ‖_∞`, at most `ε √T`.
    pub sup_gap: f64,
}

/// Smooth approximation `φ` of `λ` with `φ(0) = 0` and `I(λ − φ) < ε²/2`.
///
/// Uses a local-linear Gaussian kernel smoother (which reproduces linear
/// functions exactly, boundaries included), halving the bandwidth from `T`
/// until the energy gap passes. Fails once the bandwidth drops below
/// `Δt/16`, where the smoother is the identity to machine precision.
pub fn mollify(driver: &Driver, eps: f64) -> Result<Mollified> {
    if !(eps > 0.0) {
        return Err(LabError::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    let target = 0.5 * eps * eps;
    let horizon = driver.horizon();
    let floor = driver.dt() / 16.0;
    let mut h = horizon;
    let mut best = f64::INFINITY;
    while h >= floor && driver.steps() > 0 {
        let phi = local_linear_smooth(driver, h);
        let diff = driver.sub(&phi)?;
        let gap = dirichlet_energy(&diff).value();
        if gap < target {
            let sup_gap = diff.sup_norm();
            debug_assert!(sup_gap <= eps * horizon.sqrt() * (1.0 + 1e-12));
            return Ok(Mollified { driver: phi, bandwidth: h, energy_gap: gap, sup_gap });
        }
        best = best.min(gap);
        h *= 0.5;
    }
    if driver.steps() == 0 {
        return Ok(Mollified { driver: driver.clone(), bandwidth: 0.0, energy_gap: 0.0, sup_gap: 0.0 });
    }
    Err(LabError::MollifyFailed { target, best })
}

fn local_linear_smooth(driver: &Driver, h: f64) -> Driver {
    let v = driver.values();
    let n = driver.steps();
    let dt = driver.dt();
    let reach = ((6.0 * h / dt).ceil() as usize).max(1);
    let mut out: Vec<f64> = (0..=n)
        .map(|k| {
            let lo = k.saturating_sub(reach);
            let hi = (k + reach).min(n);
            let (mut s0, mut s1, mut s2, mut y0, mut y1) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (j, &yj) in v.iter().enumerate().take(hi + 1).skip(lo) {
                let x = (j as f64 - k as f64) * dt;
                let w = (-0.5 * (x / h) * (x / h)).exp();
                s0 += w;
                s1 += w * x;
                s2 += w * x * x;
                y0 += w * yj;
                y1 += w * x * yj;
            }
            let det = s0 * s2 - s1 * s1;
            if det.abs() <= 1e-300 || s2 == 0.0 {
                y0 / s0
            } else {
                (s2 * y0 - s1 * y1) / det
            }
        })
        .collect();
    let shift = out[0];
    for x in &mut out {
        *x -= shift;
    }
    out[0] = 0.0;
    Driver::new(out, driver.horizon()).expect("smoothing preserves finiteness")
}
