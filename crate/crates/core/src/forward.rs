//! Loewner transform `λ ↦ γ` by composition of vertical-slit maps.
//!
//! Step `k` of a chain over a driver with `n` steps freezes the driver at the
//! midpoint level `u_k = (λ_{k−1} + λ_k)/2` for a capacity increment `Δt`.
//! The chain is therefore the exact Loewner flow of a piecewise-constant
//! driver, and each elementary inverse map adds half-plane capacity `2Δt`.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::complex::{sqrt_upper, Complex64};
use crate::drivers::Driver;
use crate::error::{LabError, Result};

/// Vertical slit `[base, base + i·height]` and its normalized maps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlitMap {
    pub base: f64,
    pub height: f64,
}

impl SlitMap {
    /// Slit of half-plane capacity `2Δt`.
    pub fn from_capacity_step(base: f64, dt: f64) -> Self {
        SlitMap { base, height: 2.0 * dt.sqrt() }
    }

    /// `H \ slit → H`: `z ↦ base + √((z − base)² + h²)`.
    #[inline]
    pub fn forward(&self, z: Complex64) -> Complex64 {
        let d = z - self.base;
        sqrt_upper(d * d + self.height * self.height) + self.base
    }

    /// `H → H \ slit`: `w ↦ base + √((w − base)² − h²)`.
    #[inline]
    pub fn inverse(&self, w: Complex64) -> Complex64 {
        let d = w - self.base;
        sqrt_upper(d * d - self.height * self.height) + self.base
    }

    /// Inverse map and its derivative `(w − base)/√((w − base)² − h²)`.
    #[inline]
    pub fn inverse_with_derivative(&self, w: Complex64) -> (Complex64, Complex64) {
        let d = w - self.base;
        let s = sqrt_upper(d * d - self.height * self.height);
        (s + self.base, d / s)
    }

    pub fn tip(&self) -> Complex64 {
        Complex64::new(self.base, self.height)
    }
}

/// The sequence of elementary maps realizing `f_t = g_t^{-1}` on a driver grid.
#[derive(Clone, Debug)]
pub struct MapChain {
    driver: Driver,
    levels: Vec<f64>,
    dt: f64,
    height: f64,
}

/// One elementary map per driver step, at the midpoint driver level.
pub fn build_chain(driver: &Driver) -> MapChain {
    let levels = driver.values().windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let dt = driver.dt();
    MapChain { driver: driver.clone(), levels, dt, height: 2.0 * dt.sqrt() }
}

impl MapChain {
    pub fn driver(&self) -> &Driver {
        &self.driver
    }

    pub fn steps(&self) -> usize {
        self.levels.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.driver.horizon()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn slit(&self, step: usize) -> SlitMap {
        SlitMap { base: self.levels[step], height: self.height }
    }

    /// Grid index of `t`, which must lie on the chain grid.
    pub fn grid_index(&self, t: f64) -> Result<usize> {
        let n = self.steps();
        if n == 0 {
            return if t == 0.0 { Ok(0) } else { Err(LabError::OffGrid { t, dt: 0.0 }) };
        }
        let x = t / self.dt;
        let k = x.round();
        if k < 0.0 || k > n as f64 || (x - k).abs() > 1e-8 {
            return Err(LabError::OffGrid { t, dt: self.dt });
        }
        Ok(k as usize)
    }

    /// `f_{t_k}(z)` for grid index `k`.
    pub fn map_at_step(&self, k: usize, z: Complex64) -> Result<Complex64> {
        check_upper(z)?;
        self.compose(k, z)
    }

    /// `f_{t_k}'(z)` for grid index `k`.
    pub fn derivative_at_step(&self, k: usize, z: Complex64) -> Result<Complex64> {
        Ok(self.map_and_derivative_at_step(k, z)?.1)
    }

    pub fn map_and_derivative_at_step(&self, k: usize, z: Complex64) -> Result<(Complex64, Complex64)> {
        check_upper(z)?;
        self.check_step(k)?;
        let mut w = z;
        let mut der = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let (next, d) = self.slit(j).inverse_with_derivative(w);
            check_orbit(next, j)?;
            der *= d;
            w = next;
        }
        Ok((w, der))
    }

    /// Centered map `f̂_{t_k}(z) = f_{t_k}(λ(t_k) + z)`.
    pub fn centered_map_at_step(&self, k: usize, z: Complex64) -> Result<Complex64> {
        self.check_step(k)?;
        self.map_at_step(k, z + self.driver.values()[k])
    }

    pub fn centered_derivative_at_step(&self, k: usize, z: Complex64) -> Result<Complex64> {
        self.check_step(k)?;
        self.derivative_at_step(k, z + self.driver.values()[k])
    }

    pub fn centered_map_and_derivative_at_step(&self, k: usize, z: Complex64) -> Result<(Complex64, Complex64)> {
        self.check_step(k)?;
        self.map_and_derivative_at_step(k, z + self.driver.values()[k])
    }

    /// Curve point `γ(t_k)`: the tip of slit `k` pushed through the first
    /// `k − 1` inverse maps.
    pub fn curve_point(&self, k: usize) -> Result<Complex64> {
        self.check_step(k)?;
        if k == 0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        self.compose(k - 1, self.slit(k - 1).tip())
    }

    fn compose(&self, k: usize, z: Complex64) -> Result<Complex64> {
        self.check_step(k)?;
        let mut w = z;
        for j in (0..k).rev() {
            w = self.slit(j).inverse(w);
            check_orbit(w, j)?;
        }
        Ok(w)
    }

    fn check_step(&self, k: usize) -> Result<()> {
        if k > self.steps() {
            return Err(LabError::InvalidArgument(format!(
                "grid index {k} beyond chain length {}",
                self.steps()
            )));
        }
        Ok(())
    }
}

#[inline]
fn check_upper(z: Complex64) -> Result<()> {
    if !(z.im > 0.0 && z.re.is_finite() && z.im.is_finite()) {
        return Err(LabError::OutsideHalfPlane { re: z.re, im: z.im });
    }
    Ok(())
}

#[inline]
fn check_orbit(w: Complex64, step: usize) -> Result<()> {
    if !(w.im > 0.0 && w.re.is_finite() && w.im.is_finite()) {
        return Err(LabError::Singularity { step: step + 1 });
    }
    Ok(())
}

/// `f_t(z)` at a grid time `t`.
pub fn evaluate_map(chain: &MapChain, t: f64, z: Complex64) -> Result<Complex64> {
    chain.map_at_step(chain.grid_index(t)?, z)
}

/// `f_t'(z)` at a grid time `t`, by the chain rule along the orbit.
pub fn evaluate_derivative(chain: &MapChain, t: f64, z: Complex64) -> Result<Complex64> {
    chain.derivative_at_step(chain.grid_index(t)?, z)
}

/// Capacity-parametrized trace: grid times and points in the closed upper
/// half-plane, starting at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    times: Vec<f64>,
    points: Vec<Complex64>,
}

impl Curve {
    pub fn new(times: Vec<f64>, points: Vec<Complex64>) -> Result<Self> {
        if times.len() != points.len() || times.is_empty() {
            return Err(LabError::InvalidArgument(format!(
                "curve needs equally many (>0) times and points, got {} and {}",
                times.len(),
                points.len()
            )));
        }
        if times[0] != 0.0 || points[0] != Complex64::new(0.0, 0.0) {
            return Err(LabError::InvalidArgument("curve must start at t=0, z=0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::InvalidArgument("curve times must increase strictly".into()));
        }
        if let Some(k) = points.iter().position(|z| !(z.im >= 0.0 && z.re.is_finite() && z.im.is_finite())) {
            return Err(LabError::InvalidArgument(format!("curve point {k} is outside the closed upper half-plane")));
        }
        Ok(Curve { times, points })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    /// Every point translated by `shift`.
    pub fn translated(&self, shift: Complex64) -> Curve {
        Curve {
            times: self.times.clone(),
            points: self.points.iter().map(|z| z + shift).collect(),
        }
    }

    pub fn same_grid(&self, other: &Curve) -> bool {
        self.len() == other.len()
            && self
                .times
                .iter()
                .zip(&other.times)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
    }
}

/// Trace the curve generated by `driver`.
pub fn trace(driver: &Driver) -> Result<Curve> {
    let points = trace_until(driver, |_, _| ControlFlow::Continue(()))?;
    Curve::new(driver.times().collect(), points)
}

/// Trace point by point, handing each `(k, γ(t_k))` to `visit`; stops early
/// when `visit` breaks. Returns the points computed so far.
pub fn trace_until(
    driver: &Driver,
    mut visit: impl FnMut(usize, Complex64) -> ControlFlow<()>,
) -> Result<Vec<Complex64>> {
    let chain = build_chain(driver);
    let mut points = Vec::with_capacity(chain.steps() + 1);
    let origin = Complex64::new(0.0, 0.0);
    points.push(origin);
    if visit(0, origin).is_break() {
        return Ok(points);
    }
    for k in 1..=chain.steps() {
        let z = chain.curve_point(k)?;
        points.push(z);
        if visit(k, z).is_break() {
            break;
        }
    }
    Ok(points)
}

/// `max_k |a(t_k) − b(t_k)|` on a shared grid.
pub fn sup_distance(a: &Curve, b: &Curve) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(LabError::GridMismatch(format!("curves with {} and {} points", a.len(), b.len())));
    }
    Ok(a.points.iter().zip(&b.points).fold(0.0, |m, (x, y)| m.max((x - y).norm())))
}

/// Discrete Fréchet distance: the infimum over monotone couplings of the two
/// point sequences of the largest coupled distance.
pub fn reparam_distance(a: &Curve, b: &Curve) -> f64 {
    let (p, q) = (a.points(), b.points());
    let mut prev = vec![f64::INFINITY; q.len()];
    let mut cur = vec![f64::INFINITY; q.len()];
    for (i, zp) in p.iter().enumerate() {
        for (j, zq) in q.iter().enumerate() {
            let d = (zp - zq).norm();
            let reach = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]),
            };
            cur[j] = d.max(reach);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[q.len() - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::{linear_driver, make_driver, random_pwl_driver, sqrt_driver, zero_driver};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_driver_chain() {
        let d = zero_driver(1.0, 100);
        let chain = build_chain(&d);
        assert_eq!(chain.steps(), 100);
        assert!(chain.levels().iter().all(|&u| u == 0.0));
        let z = c(0.3, 0.7);
        let expect_g = (z * z + 4.0).sqrt();
        let mut g = z;
        for j in 0..chain.steps() {
            g = chain.slit(j).forward(g);
        }
        assert!((g - expect_g).norm() < 1e-12);
    }

    #[test]
    fn single_step_tip() {
        let dt = 0.01;
        let s = SlitMap::from_capacity_step(0.4, dt);
        let tip = s.inverse(c(0.4, 0.0));
        assert!((tip - c(0.4, 2.0 * dt.sqrt())).norm() < 1e-12);
        assert_eq!(s.tip(), c(0.4, 0.2));
    }

    #[test]
    fn evaluation_closed_forms() {
        let chain = build_chain(&zero_driver(1.0, 64));
        let z = c(0.0, 2.0);
        assert_eq!(evaluate_map(&chain, 0.0, z).unwrap(), z);
        assert_eq!(evaluate_derivative(&chain, 0.0, z).unwrap(), c(1.0, 0.0));
        let f = evaluate_map(&chain, 1.0, z).unwrap();
        assert!((f - c(0.0, 8f64.sqrt())).norm() < 1e-12);
        let fp = evaluate_derivative(&chain, 1.0, z).unwrap();
        assert!((fp - c(1.0 / 2f64.sqrt(), 0.0)).norm() < 1e-12);
        assert_eq!(chain.centered_map_at_step(64, z).unwrap(), f);
    }

    #[test]
    fn evaluation_rejects_bad_input() {
        let chain = build_chain(&linear_driver(1.0, 1.0, 10));
        assert!(matches!(evaluate_map(&chain, 0.5, c(0.0, 0.0)), Err(LabError::OutsideHalfPlane { .. })));
        assert!(matches!(evaluate_map(&chain, 0.5, c(0.0, -1.0)), Err(LabError::OutsideHalfPlane { .. })));
        assert!(matches!(evaluate_map(&chain, 0.55, c(0.0, 1.0)), Err(LabError::OffGrid { .. })));
        assert!(evaluate_map(&chain, 2.0, c(0.0, 1.0)).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let d = random_pwl_driver(&mut rng, 4, 1.0, 64, 3.0);
            let chain = build_chain(&d);
            for &z in &[c(0.1, 0.3), c(-0.5, 0.05), c(1.0, 1.0)] {
                let h = 1e-6 * z.norm();
                let fp = chain.derivative_at_step(64, z).unwrap();
                let fd = (chain.map_at_step(64, z + h).unwrap() - chain.map_at_step(64, z - h).unwrap()) / (2.0 * h);
                assert!((fp - fd).norm() <= 1e-6 * fp.norm(), "{fp} vs {fd}");
            }
        }
    }

    #[test]
    fn zero_trace_is_vertical_slit() {
        let d = zero_driver(1.0, 10_000);
        let curve = trace(&d).unwrap();
        let err = curve
            .times()
            .iter()
            .zip(curve.points())
            .fold(0.0f64, |m, (t, z)| m.max((z - c(0.0, 2.0 * t.sqrt())).norm()));
        assert!(err <= 1e-3);
    }

    #[test]
    fn sqrt_driver_traces_a_ray() {
        let n = 400;
        let curve = trace(&sqrt_driver(1.0, 1.0, n)).unwrap();
        let args: Vec<f64> = curve.points()[n / 10..].iter().map(|z| z.arg()).collect();
        let lo = args.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = args.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo <= 1e-2, "angle spread {}", hi - lo);
        // self-consistency of the ray angle across resolutions
        let fine = trace(&sqrt_driver(1.0, 1.0, 4 * n)).unwrap();
        assert!((fine.points()[4 * n].arg() - curve.points()[n].arg()).abs() < 1e-2);
    }

    #[test]
    fn brownian_scaling_symmetry() {
        let a: f64 = 1.7;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = random_pwl_driver(&mut rng, 5, 1.0, 200, 2.0);
        let scaled = make_driver(d.values().iter().map(|v| a * v).collect(), a * a).unwrap();
        let g = trace(&d).unwrap();
        let gs = trace(&scaled).unwrap();
        for (z, zs) in g.points().iter().zip(gs.points()) {
            assert!((zs - z * a).norm() < 1e-10);
        }
    }

    #[test]
    fn finite_energy_traces_stay_above_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let d = random_pwl_driver(&mut rng, 6, 1.0, 300, 4.0);
            let g = trace(&d).unwrap();
            assert!(g.points()[1..].iter().all(|z| z.im > 0.0));
        }
    }

    #[test]
    fn scheme_converges_at_first_order() {
        // self-convergence on a curved trace: successive differences shrink
        let at = |n: usize| trace(&linear_driver(1.0, 1.0, n)).unwrap().points()[n];
        let (a, b, c4) = (at(100), at(200), at(400));
        let ratio = (a - b).norm() / (b - c4).norm();
        assert!(ratio >= 1.8, "ratio {ratio}");
    }

    #[test]
    fn trace_until_stops_early() {
        let pts = trace_until(&zero_driver(1.0, 50), |k, _| {
            if k == 5 { ControlFlow::Break(()) } else { ControlFlow::Continue(()) }
        })
        .unwrap();
        assert_eq!(pts.len(), 6);
    }

    #[test]
    fn distances() {
        let a = trace(&linear_driver(1.0, 1.0, 40)).unwrap();
        assert_eq!(sup_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(reparam_distance(&a, &a), 0.0);
        let b = a.translated(c(0.1, 0.0));
        assert_relative_eq!(sup_distance(&a, &b).unwrap(), 0.1, max_relative = 1e-12);
        assert_eq!(sup_distance(&a, &b).unwrap(), sup_distance(&b, &a).unwrap());
        let other = trace(&linear_driver(1.0, 1.0, 20)).unwrap();
        assert!(sup_distance(&a, &other).is_err());
    }

    fn segment(x: f64, samples: &[f64]) -> Curve {
        let times: Vec<f64> = (0..samples.len()).map(|k| k as f64).collect();
        let pts = samples.iter().map(|&y| c(x, y)).collect::<Vec<_>>();
        Curve { times, points: pts }
    }

    #[test]
    fn reparam_distance_two_speeds() {
        // same polyline, sampled uniformly and with a quadratic speed profile
        let uniform: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        let skewed: Vec<f64> = (0..=20).map(|k| (k as f64 / 20.0).powi(2)).collect();
        let a = segment(0.0, &uniform);
        let b = segment(0.0, &skewed);
        let cell = skewed.windows(2).chain(uniform.windows(2)).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!(reparam_distance(&a, &b) <= cell + 1e-15);
    }

    #[test]
    fn reparam_distance_offset_segments() {
        let ys: Vec<f64> = (0..=6).map(|k| k as f64 / 6.0).collect();
        let a = segment(0.0, &ys);
        let b = segment(0.2, &ys);
        let d = reparam_distance(&a, &b);
        assert!((d - brute_frechet(&a, &b)).abs() < 1e-15);
        assert_relative_eq!(d, 0.2, max_relative = 1e-12);
    }

    /// Exhaustive search over monotone couplings (lattice paths).
    fn brute_frechet(a: &Curve, b: &Curve) -> f64 {
        fn go(a: &[Complex64], b: &[Complex64], i: usize, j: usize) -> f64 {
            let d = (a[i] - b[j]).norm();
            if i + 1 == a.len() && j + 1 == b.len() {
                return d;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len() {
                best = best.min(go(a, b, i + 1, j));
            }
            if j + 1 < b.len() {
                best = best.min(go(a, b, i, j + 1));
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                best = best.min(go(a, b, i + 1, j + 1));
            }
            d.max(best)
        }
        go(a.points(), b.points(), 0, 0)
    }

    #[test]
    fn reparam_never_exceeds_sup() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let a = trace(&random_pwl_driver(&mut rng, 3, 1.0, 30, 2.0)).unwrap();
            let b = trace(&random_pwl_driver(&mut rng, 3, 1.0, 30, 2.0)).unwrap();
            assert!(reparam_distance(&a, &b) <= sup_distance(&a, &b).unwrap());
        }
    }

    #[test]
    fn small_grids_match_brute_frechet() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let a = trace(&random_pwl_driver(&mut rng, 2, 1.0, 6, 2.0)).unwrap();
            let b = trace(&random_pwl_driver(&mut rng, 2, 1.0, 6, 2.0)).unwrap();
            assert!((reparam_distance(&a, &b) - brute_frechet(&a, &b)).abs() < 1e-15);
        }
    }
}
