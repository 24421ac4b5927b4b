//! Deterministic inequality checks with explicit constants.
//!
//! Each check is available as a plain function over explicit inputs and as a
//! named [`BoundCheck`] strategy that draws randomized instances from a seed.
//! [`BoundRegistry`] resolves checks by name for the CLI.

mod batch;
mod checks;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use batch::{
    ContinuityBatch, DerivativeEnergyBatch, DyadicBatch, KoebeBatch, RectangleBatch, TipDistanceBatch,
};
pub use checks::{
    check_continuity_bound, check_continuity_bound_at, check_derivative_energy_bound, check_dyadic_implication,
    check_koebe, check_rectangle_distortion, check_rectangle_distortion_scaled, check_tip_distance_bound,
    dyadic_q, psi,
};
pub(crate) use checks::local_increment;

/// Report tolerance for bounds evaluated through the discretized solver.
pub const TOL_SOLVER: f64 = 1e-2;
/// Report tolerance for inequalities the discrete maps satisfy exactly.
pub const TOL_EXACT: f64 = 1e-9;

/// Rectangle distortion constants at `r = 1/2`: `c₁ = 12¹⁰`.
pub fn rect_c1() -> f64 {
    12f64.powi(10)
}

/// Rectangle distortion exponent at `r = 1/2`: `c₂ = 2 log₂ 12`.
pub fn rect_c2() -> f64 {
    2.0 * 12f64.log2()
}

/// Multiplier of `Q(x) = c₁(1 + x²)^{c₂}`: `12 e¹⁰ · c̃₁`.
pub fn dyadic_c1() -> f64 {
    12.0 * 10f64.exp() * rect_c1()
}

/// Exponent of `Q`: `c̃₂ / 2`.
pub fn dyadic_c2() -> f64 {
    rect_c2() / 2.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub y: f64,
    pub driver: String,
}

/// Outcome of one inequality check; `worst_ratio ≤ 1` means the inequality
/// held everywhere it was evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_id: String,
    pub points: usize,
    pub worst_ratio: f64,
    pub witness: Witness,
    pub pass: bool,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, serde_json::Value>,
}

impl BoundReport {
    pub fn empty(bound_id: &str, tolerance: f64) -> Self {
        BoundReport {
            bound_id: bound_id.to_string(),
            points: 0,
            worst_ratio: 0.0,
            witness: Witness::default(),
            pass: true,
            tolerance,
            notes: BTreeMap::new(),
        }
    }

    /// Record one evaluation; NaN ratios count as failures.
    pub fn observe(&mut self, ratio: f64, t: f64, y: f64, driver: &str) {
        let ratio = if ratio.is_nan() { f64::INFINITY } else { ratio };
        self.points += 1;
        if ratio > self.worst_ratio || self.points == 1 {
            self.worst_ratio = ratio;
            self.witness = Witness { t, y, driver: driver.to_string() };
        }
        self.pass = self.worst_ratio <= 1.0 + self.tolerance;
    }

    pub fn note(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.notes.insert(key.to_string(), value.into());
    }

    /// Combine with another report of the same bound; the earlier witness
    /// wins ties.
    pub fn merge(mut self, other: BoundReport) -> BoundReport {
        if other.points > 0 && (self.points == 0 || other.worst_ratio > self.worst_ratio) {
            self.worst_ratio = other.worst_ratio;
            self.witness = other.witness;
        }
        self.points += other.points;
        self.pass = self.pass && other.pass && self.worst_ratio <= 1.0 + self.tolerance;
        for (k, v) in other.notes {
            self.notes.entry(k).or_insert(v);
        }
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// A named inequality check that can generate and evaluate its own
/// randomized instances.
pub trait BoundCheck: Send + Sync {
    fn id(&self) -> &'static str;

    fn tolerance(&self) -> f64;

    /// Evaluate instance `index` drawn from the stream keyed by `seed`.
    fn run_instance(&self, seed: u64, index: u64) -> BoundReport;

    /// Evaluate `instances` instances in parallel; the merged report does not
    /// depend on the worker count.
    fn run_batch(&self, instances: usize, seed: u64) -> BoundReport {
        let reports: Vec<BoundReport> = (0..instances as u64)
            .into_par_iter()
            .map(|i| self.run_instance(seed, i))
            .collect();
        let mut merged = reports
            .into_iter()
            .fold(BoundReport::empty(self.id(), self.tolerance()), BoundReport::merge);
        merged.note("instances", instances);
        merged.note("seed", seed);
        merged
    }
}

/// Name → check lookup.
pub struct BoundRegistry {
    checks: BTreeMap<&'static str, Box<dyn BoundCheck>>,
}

impl BoundRegistry {
    pub fn new() -> Self {
        BoundRegistry { checks: BTreeMap::new() }
    }

    /// All six checks with their default batch parameters.
    pub fn standard() -> Self {
        let mut r = BoundRegistry::new();
        r.register(Box::new(ContinuityBatch::default()));
        r.register(Box::new(DerivativeEnergyBatch::default()));
        r.register(Box::new(TipDistanceBatch::default()));
        r.register(Box::new(KoebeBatch::default()));
        r.register(Box::new(RectangleBatch::default()));
        r.register(Box::new(DyadicBatch::default()));
        r
    }

    pub fn register(&mut self, check: Box<dyn BoundCheck>) {
        self.checks.insert(check.id(), check);
    }

    pub fn get(&self, name: &str) -> Option<&dyn BoundCheck> {
        self.checks.get(name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.checks.keys().copied().collect()
    }
}

impl Default for BoundRegistry {
    fn default() -> Self {
        Self::standard()
    }
}
