//! Driving functions on uniform capacity-time grids.

mod brownian;
mod families;
mod mollify;

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub use brownian::{sample_brownian_driver, standard_normals};
pub use families::{linear_driver, random_pwl_driver, sine_driver, sqrt_driver, zero_driver};
pub use mollify::{mollify, Mollified};

/// A continuous real driving function, stored as its values on the uniform
/// grid `t_k = k T / n` and interpolated linearly in between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Driver {
    horizon: f64,
    values: Vec<f64>,
}

impl Driver {
    /// Validating constructor: nonempty values, `values[0] == 0`, all finite,
    /// positive horizon.
    pub fn new(values: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(LabError::InvalidDriver(format!("horizon must be positive, got {horizon}")));
        }
        let Some(&first) = values.first() else {
            return Err(LabError::InvalidDriver("no values".into()));
        };
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::InvalidDriver(format!("value {k} is not finite")));
        }
        if first != 0.0 {
            return Err(LabError::InvalidDriver(format!("driver must start at 0, got {first}")));
        }
        Ok(Driver { horizon, values })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of grid steps `n` (one less than the number of samples).
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        if self.steps() == 0 {
            0.0
        } else {
            self.horizon / self.steps() as f64
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps() {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|k| self.time(k))
    }

    /// Piecewise-linear evaluation; times outside `[0, T]` are clamped.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.steps();
        if n == 0 || t <= 0.0 {
            return self.values[0];
        }
        if t >= self.horizon {
            return self.values[n];
        }
        let x = t / self.dt();
        let k = (x.floor() as usize).min(n - 1);
        let w = x - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise difference of two drivers on the same grid.
    pub fn sub(&self, other: &Driver) -> Result<Driver> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Driver { horizon: self.horizon, values })
    }

    pub fn scaled(&self, c: f64) -> Driver {
        Driver {
            horizon: self.horizon,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn sup_distance(&self, other: &Driver) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Resample onto a uniform grid of `steps` steps over the same horizon.
    pub fn resample(&self, steps: usize) -> Result<Driver> {
        if steps == 0 {
            return Err(LabError::InvalidArgument("resample needs at least one step".into()));
        }
        let dt = self.horizon / steps as f64;
        let values = (0..=steps)
            .map(|k| if k == 0 { 0.0 } else { self.value_at(k as f64 * dt) })
            .collect();
        Driver::new(values, self.horizon)
    }

    fn check_same_grid(&self, other: &Driver) -> Result<()> {
        if self.steps() != other.steps() || self.horizon != other.horizon {
            return Err(LabError::GridMismatch(format!(
                "{} steps on [0,{}] vs {} steps on [0,{}]",
                self.steps(),
                self.horizon,
                other.steps(),
                other.horizon
            )));
        }
        Ok(())
    }
}

/// Build a driver from raw samples on a uniform grid over `[0, horizon]`.
pub fn make_driver(values: Vec<f64>, horizon: f64) -> Result<Driver> {
    Driver::new(values, horizon)
}

/// An extended nonnegative energy; `+inf` is representable.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EnergyValue(f64);

impl EnergyValue {
    pub const INFINITE: EnergyValue = EnergyValue(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 {
            return Err(LabError::InvalidArgument(format!("energy must be in [0, inf], got {value}")));
        }
        Ok(EnergyValue(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for EnergyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Exact Dirichlet energy `½ Σ (Δλ_k)² / Δt` of the piecewise-linear driver.
pub fn dirichlet_energy(driver: &Driver) -> EnergyValue {
    let n = driver.steps();
    if n == 0 {
        return EnergyValue(0.0);
    }
    let sum: f64 = driver.values.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    EnergyValue(0.5 * sum / driver.dt())
}

/// Piecewise-linear interpolation through every `(n/m)`-th sample, resampled
/// back onto the original grid. Requires `m | n`.
pub fn pwl_approximation(driver: &Driver, nodes: usize) -> Result<Driver> {
    let n = driver.steps();
    if nodes == 0 || n % nodes != 0 {
        return Err(LabError::InvalidArgument(format!(
            "node count {nodes} must divide the step count {n}"
        )));
    }
    let stride = n / nodes;
    let mut values = Vec::with_capacity(n + 1);
    for seg in 0..nodes {
        let a = driver.values[seg * stride];
        let b = driver.values[(seg + 1) * stride];
        for j in 0..stride {
            let w = j as f64 / stride as f64;
            values.push(if j == 0 { a } else { a + (b - a) * w });
        }
    }
    values.push(driver.values[n]);
    Ok(Driver { horizon: driver.horizon, values })
}

/// Grid oscillation: largest `|λ(t) − λ(s)|` over grid pairs with `|t − s| ≤ δ`.
///
/// Sliding-window max/min over windows of `⌊δ/Δt⌋ + 1` samples.
pub fn oscillation(driver: &Driver, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= driver.horizon * (1.0 + 1e-12)) {
        return Err(LabError::InvalidArgument(format!(
            "oscillation window must satisfy 0 < δ <= T, got δ={delta}, T={}",
            driver.horizon
        )));
    }
    if driver.steps() == 0 {
        return Ok(0.0);
    }
    let width = ((delta / driver.dt()) * (1.0 + 1e-12)).floor() as usize;
    Ok(window_oscillation(&driver.values, width))
}

/// Max over all index pairs `|i − j| ≤ width` of `|v_i − v_j|`.
pub(crate) fn window_oscillation(v: &[f64], width: usize) -> f64 {
    if width == 0 || v.len() < 2 {
        return 0.0;
    }
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    let mut best = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        while maxq.back().is_some_and(|&j| v[j] <= x) {
            maxq.pop_back();
        }
        maxq.push_back(i);
        while minq.back().is_some_and(|&j| v[j] >= x) {
            minq.pop_back();
        }
        minq.push_back(i);
        let lo = i.saturating_sub(width);
        while maxq.front().is_some_and(|&j| j < lo) {
            maxq.pop_front();
        }
        while minq.front().is_some_and(|&j| j < lo) {
            minq.pop_front();
        }
        best = best.max(v[maxq[0]] - v[minq[0]]);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn drv(values: &[f64]) -> Driver {
        make_driver(values.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn construction() {
        let d = drv(&[0.0]);
        assert_eq!(d.steps(), 0);
        assert_eq!(dirichlet_energy(&d).value(), 0.0);
        let d = drv(&[0.0, 0.3, -0.1]);
        assert_eq!(d.steps(), 2);
        assert_eq!(d.time(1), 0.5);
        assert!(make_driver(vec![0.5, 1.0], 1.0).is_err());
        assert!(make_driver(vec![0.0, f64::NAN], 1.0).is_err());
        assert!(make_driver(vec![0.0, f64::INFINITY], 1.0).is_err());
        assert!(make_driver(vec![], 1.0).is_err());
        assert!(make_driver(vec![0.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn energies() {
        let lin = linear_driver(2.0, 1.0, 100);
        assert_relative_eq!(dirichlet_energy(&lin).value(), 2.0, max_relative = 1e-12);
        assert_eq!(dirichlet_energy(&zero_driver(1.0, 10)).value(), 0.0);
        // ½(0.6²/0.5 + 0.8²/0.5)... written as ½ Σ Δλ²/Δt with Δt = 0.5
        let e = dirichlet_energy(&drv(&[0.0, 0.3, -0.1])).value();
        assert_relative_eq!(e, 0.5 * (0.09 + 0.16) / 0.5, max_relative = 1e-12);
        assert_relative_eq!(e, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn energy_value_rejects_negative() {
        assert!(EnergyValue::new(-1.0).is_err());
        assert!(EnergyValue::new(f64::NAN).is_err());
        assert!(EnergyValue::INFINITE > EnergyValue::new(1e300).unwrap());
    }

    #[test]
    fn pwl_cases() {
        let d = drv(&[0.0, 0.3, -0.1, 0.7]);
        assert_eq!(pwl_approximation(&d, 3).unwrap(), d);
        let lin = linear_driver(1.7, 1.0, 12);
        let approx = pwl_approximation(&lin, 4).unwrap();
        for (a, b) in approx.values().iter().zip(lin.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let tent = drv(&[0.0, 1.0, 0.0]);
        assert_eq!(pwl_approximation(&tent, 1).unwrap().values(), &[0.0, 0.0, 0.0]);
        assert!(pwl_approximation(&tent, 3).is_err());
        assert!(pwl_approximation(&tent, 0).is_err());
    }

    #[test]
    fn oscillation_cases() {
        let lin = linear_driver(1.0, 1.0, 1000);
        assert_relative_eq!(oscillation(&lin, 0.1).unwrap(), 0.1, max_relative = 1e-9);
        assert_eq!(oscillation(&zero_driver(1.0, 50), 0.3).unwrap(), 0.0);
        let s = sine_driver(1.0, 1.0, 1.0, 1000);
        let osc = oscillation(&s, 0.5).unwrap();
        assert!((osc - brute_oscillation(&s, 0.5)).abs() < 1e-15);
        assert!((osc - 2.0).abs() < 1e-4);
        assert!(oscillation(&lin, 0.0).is_err());
        assert!(oscillation(&lin, 1.5).is_err());
    }

    fn brute_oscillation(d: &Driver, delta: f64) -> f64 {
        let mut best = 0.0f64;
        let v = d.values();
        for i in 0..v.len() {
            for j in i..v.len() {
                if (j - i) as f64 * d.dt() <= delta * (1.0 + 1e-12) {
                    best = best.max((v[i] - v[j]).abs());
                }
            }
        }
        best
    }

    fn arb_driver() -> impl Strategy<Value = Driver> {
        prop::collection::vec(-3.0f64..3.0, 1..40).prop_map(|mut v| {
            v.insert(0, 0.0);
            make_driver(v, 1.0).unwrap()
        })
    }

    proptest! {
        #[test]
        fn energy_scales_quadratically(d in arb_driver(), c in -5.0f64..5.0) {
            let e = dirichlet_energy(&d).value();
            let ec = dirichlet_energy(&d.scaled(c)).value();
            prop_assert!((ec - c * c * e).abs() <= 1e-10 * (1.0 + ec));
        }

        #[test]
        fn oscillation_matches_brute_force_and_is_monotone(d in arb_driver(), a in 0.01f64..1.0, b in 0.01f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let o_lo = oscillation(&d, lo).unwrap();
            let o_hi = oscillation(&d, hi).unwrap();
            prop_assert!(o_lo <= o_hi);
            prop_assert_eq!(o_lo, brute_oscillation(&d, lo));
        }
    }
}
