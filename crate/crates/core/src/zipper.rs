//! Inverse Loewner transform by vertical-slit unzipping.

use serde::Serialize;

use crate::complex::Complex64;
use crate::drivers::Driver;
use crate::error::{LabError, Result};
use crate::forward::{Curve, SlitMap};

/// Driver and capacity increments recovered from a curve.
#[derive(Clone, Debug, Serialize)]
pub struct ZipResult {
    /// Recovered driver on a uniform grid over the recovered horizon; `None`
    /// for the single-point curve.
    pub driver: Option<Driver>,
    /// Capacity increment consumed by each curve point.
    pub increments: Vec<f64>,
    /// Slit base (driver level) found at each step.
    pub levels: Vec<f64>,
    /// Largest `|Im|` among the unzipped points after their own slit map.
    pub residual: f64,
}

impl ZipResult {
    pub fn horizon(&self) -> f64 {
        self.increments.iter().sum()
    }

    /// Cumulative capacity times `0 = T_0 < T_1 < …`.
    pub fn cumulative_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        std::iter::once(0.0)
            .chain(self.increments.iter().map(|dt| {
                t += dt;
                t
            }))
            .collect()
    }
}

/// Unzip `curve` point by point. Each step reads the current image
/// `w = x + iy` of the next point, records `λ = x` and `Δt = y²/4`, then maps
/// the remaining points with `z ↦ x + √((z − x)² + y²)`.
pub fn zip_curve(curve: &Curve) -> Result<ZipResult> {
    let mut pts: Vec<Complex64> = curve.points()[1..].to_vec();
    let n = pts.len();
    let mut increments = Vec::with_capacity(n);
    let mut levels = Vec::with_capacity(n);
    let mut residual = 0.0f64;
    for k in 0..n {
        let w = pts[k];
        if !(w.im > 0.0) {
            return Err(LabError::ZipperFailure { step: k + 1 });
        }
        let slit = SlitMap { base: w.re, height: w.im };
        residual = residual.max(slit.forward(w).im.abs());
        increments.push(w.im * w.im / 4.0);
        levels.push(w.re);
        for (j, z) in pts.iter_mut().enumerate().skip(k + 1) {
            *z = slit.forward(*z);
            if !(z.im > 0.0) {
                return Err(LabError::ZipperFailure { step: j + 1 });
            }
        }
    }
    let mut result = ZipResult { driver: None, increments, levels, residual };
    if n > 0 {
        result.driver = Some(resample_levels(&result)?);
    }
    Ok(result)
}

/// Places each slit level at the midpoint of its capacity interval, holds the
/// last level to the end, and resamples linearly onto a uniform grid.
fn resample_levels(zip: &ZipResult) -> Result<Driver> {
    let times = zip.cumulative_times();
    let n = zip.levels.len();
    let mut knots_t = Vec::with_capacity(n + 2);
    let mut knots_v = Vec::with_capacity(n + 2);
    knots_t.push(0.0);
    knots_v.push(0.0);
    for k in 0..n {
        knots_t.push(0.5 * (times[k] + times[k + 1]));
        knots_v.push(zip.levels[k]);
    }
    knots_t.push(times[n]);
    knots_v.push(zip.levels[n - 1]);
    let horizon = times[n];
    let dt = horizon / n as f64;
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    let mut seg = 0;
    for k in 1..=n {
        let t = if k == n { horizon } else { k as f64 * dt };
        while seg + 2 < knots_t.len() && knots_t[seg + 1] < t {
            seg += 1;
        }
        let (t0, t1) = (knots_t[seg], knots_t[seg + 1]);
        let w = if t1 > t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 1.0 };
        values.push(knots_v[seg] * (1.0 - w) + knots_v[seg + 1] * w);
    }
    Driver::new(values, horizon)
}

/// `(t_k, hcap = 2 t_k)` along the recovered capacity grid.
pub fn capacity_profile(result: &ZipResult) -> Vec<(f64, f64)> {
    result.cumulative_times().into_iter().map(|t| (t, 2.0 * t)).collect()
}
