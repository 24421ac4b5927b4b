//! Randomized instance generators for each check.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::checks::{
    check_continuity_bound_at, check_derivative_energy_bound, check_dyadic_implication, check_koebe,
    check_rectangle_distortion_scaled, check_tip_distance_bound,
};
use super::{BoundCheck, BoundReport, TOL_EXACT, TOL_SOLVER};
use crate::complex::Complex64;
use crate::drivers::{dirichlet_energy, random_pwl_driver, sample_brownian_driver, Driver};
use crate::forward::build_chain;
use crate::seed::{mix, replica_rng};

fn failed(id: &str, tol: f64, label: &str, err: impl std::fmt::Display) -> BoundReport {
    let mut r = BoundReport::empty(id, tol);
    r.observe(f64::INFINITY, 0.0, 0.0, label);
    r.note("error", err.to_string());
    r
}

fn pwl(rng: &mut ChaCha8Rng, steps: usize, max_energy: f64) -> Driver {
    let choices = [1usize, 2, 4, 5, 8, 10];
    let segments = loop {
        let s = choices[rng.random_range(0..choices.len())];
        if steps % s == 0 {
            break s;
        }
    };
    random_pwl_driver(rng, segments, 1.0, steps, max_energy)
}

fn grid_times(steps: usize, points: usize) -> Vec<f64> {
    (0..points).map(|i| (i * steps / (points - 1)) as f64 / steps as f64).collect()
}

/// Pairs of random PWL drivers at sup distance at most 1.
#[derive(Clone, Debug)]
pub struct ContinuityBatch {
    pub steps: usize,
    pub y_grid: Vec<f64>,
    pub t_points: usize,
    pub wide_x: bool,
}

impl Default for ContinuityBatch {
    fn default() -> Self {
        ContinuityBatch {
            steps: 200,
            y_grid: vec![0.05, 0.1, 0.25, 0.5, 1.0, 2.0],
            t_points: 9,
            wide_x: false,
        }
    }
}

impl BoundCheck for ContinuityBatch {
    fn id(&self) -> &'static str {
        "continuity"
    }

    fn tolerance(&self) -> f64 {
        TOL_EXACT
    }

    fn run_instance(&self, seed: u64, index: u64) -> BoundReport {
        let mut rng = replica_rng(seed, index);
        let label = format!("pwl-pair-{index}");
        let a = pwl(&mut rng, self.steps, 4.0);
        let b = pwl(&mut rng, self.steps, 4.0);
        let diff = b.sub(&a).expect("same grid");
        let gap = diff.sup_norm();
        let b = if gap > 1.0 {
            let v: Vec<f64> = a.values().iter().zip(diff.values()).map(|(x, d)| x + d / gap).collect();
            Driver::new(v, 1.0).expect("finite")
        } else {
            b
        };
        let xs: &[f64] = if self.wide_x { &[-1.0, 0.0, 1.0] } else { &[0.0] };
        check_continuity_bound_at(&a, &b, &self.y_grid, &grid_times(self.steps, self.t_points), xs, &label)
            .unwrap_or_else(|e| failed(self.id(), self.tolerance(), &label, e))
    }
}

/// Random PWL drivers with energy at most `max_energy`.
#[derive(Clone, Debug)]
pub struct DerivativeEnergyBatch {
    pub steps: usize,
    pub y_grid: Vec<f64>,
    pub t_points: usize,
    pub max_energy: f64,
}

impl Default for DerivativeEnergyBatch {
    fn default() -> Self {
        DerivativeEnergyBatch {
            steps: 400,
            y_grid: vec![0.05, 0.1, 0.2, 0.5, 1.0],
            t_points: 11,
            max_energy: 4.0,
        }
    }
}

impl BoundCheck for DerivativeEnergyBatch {
    fn id(&self) -> &'static str {
        "derivative-energy"
    }

    fn tolerance(&self) -> f64 {
        TOL_SOLVER
    }

    fn run_instance(&self, seed: u64, index: u64) -> BoundReport {
        let mut rng = replica_rng(seed, index);
        let label = format!("pwl-{index}");
        let d = pwl(&mut rng, self.steps, self.max_energy);
        let mut r = check_derivative_energy_bound(&d, &self.y_grid, &grid_times(self.steps, self.t_points))
            .unwrap_or_else(|e| failed(self.id(), self.tolerance(), &label, e));
        r.witness.driver = label;
        r.notes.remove("energy");
        r
    }
}

/// Random PWL drivers with `c = I_D(λ)` and a random `y ∈ [0.02, 0.5]`.
#[derive(Clone, Debug)]
pub struct TipDistanceBatch {
    pub steps: usize,
    pub max_energy: f64,
}

impl Default for TipDistanceBatch {
    fn default() -> Self {
        TipDistanceBatch { steps: 200, max_energy: 4.0 }
    }
}

impl BoundCheck for TipDistanceBatch {
    fn id(&self) -> &'static str {
        "tip-distance"
    }

    fn tolerance(&self) -> f64 {
        TOL_SOLVER
    }

    fn run_instance(&self, seed: u64, index: u64) -> BoundReport {
        let mut rng = replica_rng(seed, index);
        let label = format!("pwl-{index}");
        let d = pwl(&mut rng, self.steps, self.max_energy);
        let y = rng.random_range(0.02..=0.5);
        let c = dirichlet_energy(&d).value();
        let mut r = check_tip_distance_bound(&d, c, y).unwrap_or_else(|e| failed(self.id(), self.tolerance(), &label, e));
        r.witness.driver = label;
        r.notes.remove("c");
        r
    }
}

/// Random driver (PWL or Brownian), grid time, base point `z` and a
/// companion `w` with `|z − w| ≤ r Im z`.
#[derive(Clone, Debug)]
pub struct KoebeBatch {
    pub steps: usize,
    pub pairs: usize,
}

impl Default for KoebeBatch {
    fn default() -> Self {
        KoebeBatch { steps: 100, pairs: 8 }
    }
}

fn random_driver(rng: &mut ChaCha8Rng, steps: usize, index: u64) -> (Driver, String) {
    if rng.random_bool(0.5) {
        (pwl(rng, steps, 4.0), format!("pwl-{index}"))
    } else {
        let kappa = rng.random_range(0.1..4.0);
        let seed = rng.random::<u64>();
        let d = sample_brownian_driver(kappa, 1.0, steps, seed).expect("valid parameters");
        (d, format!("brownian-{index}"))
    }
}

impl BoundCheck for KoebeBatch {
    fn id(&self) -> &'static str {
        "koebe"
    }

    fn tolerance(&self) -> f64 {
        TOL_EXACT
    }

    fn run_instance(&self, seed: u64, index: u64) -> BoundReport {
        let mut rng = replica_rng(seed, index);
        let (d, label) = random_driver(&mut rng, self.steps, index);
        let chain = build_chain(&d);
        let mut report = BoundReport::empty(self.id(), self.tolerance());
        for _ in 0..self.pairs {
            let k = rng.random_range(0..=self.steps);
            let t = d.time(k);
            let y = rng.random_range(0.02..=1.0);
            let z = Complex64::new(d.values()[k] + rng.random_range(-1.0..=1.0), y);
            let r = rng.random_range(0.0..0.95);
            let rho = rng.random_range(0.0..=1.0) * r * y;
            let w = z + Complex64::from_polar(rho, rng.random_range(0.0..std::f64::consts::TAU));
            let one = check_koebe(&chain, t, z, w, r).unwrap_or_else(|e| failed(self.id(), self.tolerance(), &label, e));
            let mut one = one;
            one.witness.driver = label.clone();
            report = report.merge(one);
        }
        report
    }
}

/// Random driver, grid time, scale `R` and two points of `S` with
/// `Im ≥ y`, applied to `w ↦ f_t(λ_t + R w)`.
#[derive(Clone, Debug)]
pub struct RectangleBatch {
    pub steps: usize,
    pub pairs: usize,
}

impl Default for RectangleBatch {
    fn default() -> Self {
        RectangleBatch { steps: 100, pairs: 8 }
    }
}

impl BoundCheck for RectangleBatch {
    fn id(&self) -> &'static str {
        "rectangle-distortion"
    }

    fn tolerance(&self) -> f64 {
        TOL_EXACT
    }

    fn run_instance(&self, seed: u64, index: u64) -> BoundReport {
        let mut rng = replica_rng(seed, index);
        let (d, label) = random_driver(&mut rng, self.steps, index);
        let chain = build_chain(&d);
        let mut report = BoundReport::empty(self.id(), self.tolerance());
        let mut empirical: f64 = 0.0;
        for _ in 0..self.pairs {
            let k = rng.random_range(0..=self.steps);
            let y: f64 = rng.random_range(0.01..=1.0);
            let scale = rng.random_range(0.1..=2.0);
            let mut point = || Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(y..=1.0));
            let (z1, z2) = (point(), point());
            let mut one = check_rectangle_distortion_scaled(&chain, d.time(k), d.values()[k], scale, z1, z2, y)
                .unwrap_or_else(|e| failed(self.id(), self.tolerance(), &label, e));
            if let Some(c) = one.notes.get("empirical_c1").and_then(|v| v.as_f64()) {
                empirical = empirical.max(c);
            }
            one.witness.driver = label.clone();
            report = report.merge(one);
        }
        report.notes.remove("empirical_c1");
        report.note("empirical_c1", empirical);
        report
    }
}

/// Half random PWL drivers, half `√κ B` at `κ = kappa`, on `4^{m_max}`
/// steps over `[0, 1]`.
#[derive(Clone, Debug)]
pub struct DyadicBatch {
    pub beta: f64,
    pub n: u32,
    pub m_max: u32,
    pub kappa: f64,
    pub t_points: usize,
}

impl Default for DyadicBatch {
    fn default() -> Self {
        DyadicBatch { beta: 0.8, n: 1, m_max: 5, kappa: 0.4, t_points: 65 }
    }
}

impl BoundCheck for DyadicBatch {
    fn id(&self) -> &'static str {
        "dyadic-implication"
    }

    fn tolerance(&self) -> f64 {
        TOL_SOLVER
    }

    fn run_instance(&self, seed: u64, index: u64) -> BoundReport {
        let steps = 4usize.pow(self.m_max);
        let (d, label) = if index % 2 == 0 {
            let mut rng = replica_rng(seed, index);
            (pwl(&mut rng, steps, 2.0), format!("pwl-{index}"))
        } else {
            let d = sample_brownian_driver(self.kappa, 1.0, steps, mix(seed, index)).expect("valid parameters");
            (d, format!("brownian-{index}"))
        };
        let mut r = check_dyadic_implication(&d, self.beta, self.n, self.m_max, self.t_points)
            .unwrap_or_else(|e| failed(self.id(), self.tolerance(), &label, e));
        let satisfied = r.notes.get("hypothesis").and_then(|v| v.as_str()) == Some("satisfied");
        r.notes.remove("hypothesis");
        r.notes.remove("hypothesis_failed_at");
        r.note("hypothesis_satisfied", usize::from(satisfied));
        r.witness.driver = label;
        r
    }

    fn run_batch(&self, instances: usize, seed: u64) -> BoundReport {
        use rayon::prelude::*;
        let reports: Vec<BoundReport> =
            (0..instances as u64).into_par_iter().map(|i| self.run_instance(seed, i)).collect();
        let satisfied: u64 = reports
            .iter()
            .map(|r| r.notes.get("hypothesis_satisfied").and_then(|v| v.as_u64()).unwrap_or(0))
            .sum();
        let mut merged = reports
            .into_iter()
            .fold(BoundReport::empty(self.id(), self.tolerance()), BoundReport::merge);
        merged.note("hypothesis_satisfied", satisfied);
        merged.note("instances", instances);
        merged.note("seed", seed);
        merged
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::BoundRegistry;

    #[test]
    fn small_batches_pass_and_are_deterministic() {
        let reg = BoundRegistry::standard();
        for name in reg.names() {
            let check = reg.get(name).unwrap();
            let a = check.run_batch(6, 11);
            assert!(a.pass, "{name}: {a:?}");
            assert_eq!(a.bound_id, name);
            let b = check.run_batch(6, 11);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn continuity_pairs_within_unit_distance() {
        let c = ContinuityBatch::default();
        for i in 0..20 {
            let mut rng = replica_rng(5, i);
            let a = pwl(&mut rng, c.steps, 4.0);
            assert_eq!(a.steps(), 200);
        }
        let r = ContinuityBatch { wide_x: true, ..Default::default() }.run_batch(4, 1);
        assert!(r.pass);
        assert_eq!(r.points, 4 * 6 * 9 * 3);
    }
}
