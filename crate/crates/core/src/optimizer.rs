//! Penalty-method minimization of the Dirichlet energy under curve
//! constraints.
//!
//! The driver is piecewise linear with `m` free node values (`λ(0) = 0`) on
//! `[0, T]`, traced on `m · substeps` uniform steps. Each outer round
//! minimizes `I_D + μ P` with `μ` growing tenfold per round. The inner solver
//! is a limited-memory quasi-Newton descent with backtracking, preconditioned
//! by the exact energy Hessian; gradients are central finite differences
//! through the forward solver.

use std::collections::VecDeque;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::complex::Complex64;
use crate::drivers::{dirichlet_energy, Driver};
use crate::error::{LabError, Result};
use crate::forward::{trace, Curve};
use crate::seed::replica_rng;

#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    /// `sup_k |γ(t_k) − target(t_k)| ≤ δ`; `δ = ∞` leaves the curve free.
    Tube { target: Curve, delta: f64 },
    /// `|γ(T) − z*| ≤ tol`.
    Endpoint { target: Complex64, tol: f64 },
    /// `|γ(t) − center| ≥ radius` for all `t`.
    AvoidDisk { center: Complex64, radius: f64 },
}

impl Constraint {
    pub fn describe(&self) -> serde_json::Value {
        match self {
            Constraint::Tube { target, delta } => json!({
                "kind": "tube",
                "delta": if delta.is_finite() { json!(delta) } else { json!("inf") },
                "target_points": target.len(),
            }),
            Constraint::Endpoint { target, tol } => json!({
                "kind": "endpoint",
                "target": [target.re, target.im],
                "tol": tol,
            }),
            Constraint::AvoidDisk { center, radius } => json!({
                "kind": "avoid-disk",
                "center": [center.re, center.im],
                "radius": radius,
            }),
        }
    }

    fn validate(&self, steps: usize, horizon: f64) -> Result<()> {
        let bad = |m: String| Err(LabError::InvalidArgument(m));
        match self {
            Constraint::Tube { target, delta } => {
                if !(*delta > 0.0) {
                    return bad(format!("tube radius must be positive, got {delta}"));
                }
                if target.len() != steps + 1 || (target.horizon() - horizon).abs() > 1e-12 * horizon {
                    return Err(LabError::GridMismatch(format!(
                        "tube target has {} points on [0, {}], optimizer traces {} steps on [0, {}]",
                        target.len(),
                        target.horizon(),
                        steps,
                        horizon
                    )));
                }
            }
            Constraint::Endpoint { tol, .. } => {
                if !(*tol > 0.0) {
                    return bad(format!("endpoint tolerance must be positive, got {tol}"));
                }
            }
            Constraint::AvoidDisk { radius, .. } => {
                if !(*radius > 0.0) {
                    return bad(format!("disk radius must be positive, got {radius}"));
                }
            }
        }
        Ok(())
    }

    /// `(Σ_k v_k² Δt, max_k v_k)` for the pointwise violations `v_k`.
    fn violation(&self, curve: &Curve, dt: f64) -> (f64, f64) {
        let pts = curve.points();
        let fold = |v: &mut dyn Iterator<Item = f64>| {
            v.fold((0.0, 0.0f64), |(s, m), x| if x > 0.0 { (s + x * x * dt, m.max(x)) } else { (s, m) })
        };
        match self {
            Constraint::Tube { target, delta } => {
                if delta.is_infinite() {
                    return (0.0, 0.0);
                }
                fold(&mut pts.iter().zip(target.points()).map(|(z, w)| (z - w).norm() - delta))
            }
            Constraint::Endpoint { target, tol } => {
                let v = ((pts[pts.len() - 1] - target).norm() - tol).max(0.0);
                (v * v, v)
            }
            Constraint::AvoidDisk { center, radius } => fold(&mut pts.iter().map(|z| radius - (z - center).norm())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptOptions {
    pub horizon: f64,
    pub substeps: usize,
    pub mu0: f64,
    pub mu_factor: f64,
    pub rounds: usize,
    pub max_inner: usize,
    pub fd_step: f64,
    /// Residual at or below which the constraint counts as satisfied.
    pub feasibility_tol: f64,
    /// Random starts in addition to the zero driver.
    pub perturbations: usize,
    pub perturbation_scale: f64,
    pub seed: u64,
}

impl Default for OptOptions {
    fn default() -> Self {
        OptOptions {
            horizon: 1.0,
            substeps: 4,
            mu0: 10.0,
            mu_factor: 10.0,
            rounds: 6,
            max_inner: 200,
            fd_step: 1e-4,
            feasibility_tol: 1e-3,
            perturbations: 4,
            perturbation_scale: 0.3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptResult {
    /// Minimizer on the traced grid.
    pub driver: Driver,
    /// Free node values `λ(T/m), …, λ(T)`.
    pub nodes: Vec<f64>,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub infeasible: bool,
}

impl OptResult {
    pub fn to_json(&self, constraint: &Constraint, driver_file: &str) -> serde_json::Value {
        json!({
            "constraint": constraint.describe(),
            "m": self.nodes.len(),
            "energy": self.energy,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "infeasible": self.infeasible,
            "driver_file": driver_file,
        })
    }
}

struct Problem<'a> {
    constraint: &'a Constraint,
    m: usize,
    opts: &'a OptOptions,
}

impl Problem<'_> {
    fn steps(&self) -> usize {
        self.m * self.opts.substeps
    }

    fn driver(&self, nodes: &[f64]) -> Driver {
        let s = self.opts.substeps;
        let mut values = Vec::with_capacity(self.steps() + 1);
        values.push(0.0);
        let mut prev = 0.0;
        for &x in nodes {
            for j in 1..=s {
                values.push(if j == s { x } else { prev + (x - prev) * (j as f64 / s as f64) });
            }
            prev = x;
        }
        Driver::new(values, self.opts.horizon).expect("finite nodes")
    }

    fn energy(&self, nodes: &[f64]) -> f64 {
        let mut prev = 0.0;
        let mut sum = 0.0;
        for &x in nodes {
            sum += (x - prev) * (x - prev);
            prev = x;
        }
        0.5 * sum * self.m as f64 / self.opts.horizon
    }

    /// `(penalty integral, residual)`; `+∞` if the trace hits a singularity.
    fn violation(&self, nodes: &[f64]) -> (f64, f64) {
        match trace(&self.driver(nodes)) {
            Ok(curve) => self.constraint.violation(&curve, self.opts.horizon / self.steps() as f64),
            Err(_) => (f64::INFINITY, f64::INFINITY),
        }
    }

    fn objective(&self, nodes: &[f64], mu: f64) -> f64 {
        self.energy(nodes) + mu * self.violation(nodes).0
    }

    fn gradient(&self, nodes: &[f64], mu: f64) -> Vec<f64> {
        let h = self.opts.fd_step;
        let mut x = nodes.to_vec();
        (0..nodes.len())
            .map(|j| {
                x[j] = nodes[j] + h;
                let up = self.objective(&x, mu);
                x[j] = nodes[j] - h;
                let down = self.objective(&x, mu);
                x[j] = nodes[j];
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    /// Solve `H v = g` for the energy Hessian `H = (m/T) · tridiag(−1, 2, −1)`
    /// with the last diagonal entry 1 (free endpoint).
    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        let n = g.len();
        let scale = self.m as f64 / self.opts.horizon;
        let diag = |i: usize| if i + 1 == n { 1.0 } else { 2.0 };
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut b = diag(0);
        c[0] = -1.0 / b;
        d[0] = g[0] / scale / b;
        for i in 1..n {
            b = diag(i) + c[i - 1];
            c[i] = -1.0 / b;
            d[i] = (g[i] / scale + d[i - 1]) / b;
        }
        let mut v = vec![0.0; n];
        v[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            v[i] = d[i] - c[i] * v[i + 1];
        }
        v
    }

    fn quasi_newton_direction(&self, g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y) in memory.iter().rev() {
            let rho = 1.0 / dot(y, s);
            let a = rho * dot(s, &q);
            axpy(&mut q, -a, y);
            alphas.push((a, rho));
        }
        let mut r = self.precondition(&q);
        for ((s, y), (a, rho)) in memory.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &r);
            axpy(&mut r, a - b, s);
        }
        r.iter().map(|v| -v).collect()
    }

    /// Minimize `I_D + μ P` from `x`; returns the iterate, iteration count
    /// and whether the stopping rule fired before the cap.
    fn descend(&self, mut x: Vec<f64>, mu: f64) -> (Vec<f64>, usize, bool) {
        let mut f = self.objective(&x, mu);
        let mut g = self.gradient(&x, mu);
        let mut memory: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
        for it in 1..=self.opts.max_inner {
            let mut p = self.quasi_newton_direction(&g, &memory);
            let mut slope = dot(&g, &p);
            if !(slope < 0.0) {
                memory.clear();
                p = self.precondition(&g).iter().map(|v| -v).collect();
                slope = dot(&g, &p);
            }
            if !(slope < 0.0) {
                return (x, it, true);
            }
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let trial: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
                let ft = self.objective(&trial, mu);
                if ft <= f + 1e-4 * alpha * slope {
                    accepted = Some((trial, ft));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((next, fnext)) = accepted else {
                return (x, it, true);
            };
            let step = alpha * p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let decrease = f - fnext;
            let gnext = self.gradient(&next, mu);
            let s: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gnext.iter().zip(&g).map(|(a, b)| a - b).collect();
            if dot(&s, &y) > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                memory.push_back((s, y));
                if memory.len() > 8 {
                    memory.pop_front();
                }
            }
            x = next;
            f = fnext;
            g = gnext;
            if decrease <= 1e-12 * (1.0 + f.abs()) || step < 1e-9 {
                return (x, it, true);
            }
        }
        (x, self.opts.max_inner, false)
    }

    fn solve(&self, start: Vec<f64>) -> OptResult {
        let mut x = start;
        let mut mu = self.opts.mu0;
        let mut iterations = 0;
        let mut settled = false;
        for round in 0..self.opts.rounds {
            let (next, its, done) = self.descend(x, mu);
            x = next;
            iterations += its;
            settled = done;
            if round + 1 < self.opts.rounds {
                mu *= self.opts.mu_factor;
            }
        }
        let residual = self.violation(&x).1;
        let driver = self.driver(&x);
        let infeasible = !(residual <= self.opts.feasibility_tol);
        OptResult {
            energy: dirichlet_energy(&driver).value(),
            driver,
            nodes: x,
            residual,
            iterations,
            converged: settled && !infeasible,
            infeasible,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn check_options(m: usize, opts: &OptOptions) -> Result<()> {
    if m < 2 {
        return Err(LabError::InvalidArgument(format!("need at least 2 driver segments, got {m}")));
    }
    if opts.substeps == 0 || opts.rounds == 0 || !(opts.horizon > 0.0) || !(opts.fd_step > 0.0) {
        return Err(LabError::InvalidArgument("optimizer options must be positive".into()));
    }
    Ok(())
}

/// Gradient of `I_D + μ P` at `nodes`, as used by the descent.
pub fn objective_gradient(constraint: &Constraint, nodes: &[f64], mu: f64, opts: &OptOptions) -> Result<Vec<f64>> {
    check_options(nodes.len(), opts)?;
    constraint.validate(nodes.len() * opts.substeps, opts.horizon)?;
    Ok(Problem { constraint, m: nodes.len(), opts }.gradient(nodes, mu))
}

/// Minimize from each start in parallel and keep the best: the feasible
/// result of least energy, otherwise the one of least residual.
pub fn minimize_from_starts(
    constraint: &Constraint,
    m: usize,
    starts: Vec<Vec<f64>>,
    opts: &OptOptions,
) -> Result<OptResult> {
    check_options(m, opts)?;
    constraint.validate(m * opts.substeps, opts.horizon)?;
    if starts.is_empty() || starts.iter().any(|s| s.len() != m) {
        return Err(LabError::InvalidArgument(format!("starts must be nonempty with {m} node values each")));
    }
    let problem = Problem { constraint, m, opts };
    let results: Vec<OptResult> = starts.into_par_iter().map(|s| problem.solve(s)).collect();
    let mut best: Option<OptResult> = None;
    for r in results {
        let better = match &best {
            None => true,
            Some(b) => match (r.infeasible, b.infeasible) {
                (false, true) => true,
                (false, false) => r.energy < b.energy,
                (true, true) => r.residual < b.residual,
                (true, false) => false,
            },
        };
        if better {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Zero driver plus `opts.perturbations` seeded random-walk starts.
pub fn default_starts(m: usize, opts: &OptOptions) -> Vec<Vec<f64>> {
    let mut starts = vec![vec![0.0; m]];
    let sd = opts.perturbation_scale / (m as f64).sqrt();
    for i in 0..opts.perturbations {
        let mut rng = replica_rng(opts.seed, i as u64);
        let mut x = 0.0;
        starts.push(
            (0..m)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x += sd * z;
                    x
                })
                .collect(),
        );
    }
    starts
}

/// `inf I_D` over `m`-node drivers whose trace satisfies `constraint`.
pub fn minimize_energy(constraint: &Constraint, m: usize, opts: &OptOptions) -> Result<OptResult> {
    minimize_from_starts(constraint, m, default_starts(m, opts), opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodRow {
    pub delta: f64,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub infeasible: bool,
}

/// Minimized energy over the tube of each radius around the trace of
/// `target` (resampled onto the optimizer grid). Each radius also restarts
/// from the previous minimizer.
pub fn neighborhood_limit(target: &Driver, deltas: &[f64], m: usize, opts: &OptOptions) -> Result<Vec<NeighborhoodRow>> {
    check_options(m, opts)?;
    if deltas.is_empty() || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LabError::InvalidArgument("delta list must be nonempty and strictly decreasing".into()));
    }
    if (target.horizon() - opts.horizon).abs() > 1e-12 * opts.horizon {
        return Err(LabError::GridMismatch("target horizon differs from the optimizer horizon".into()));
    }
    let curve = trace(&target.resample(m * opts.substeps)?)?;
    let mut rows = Vec::with_capacity(deltas.len());
    let mut warm: Option<Vec<f64>> = None;
    for &delta in deltas {
        let constraint = Constraint::Tube { target: curve.clone(), delta };
        let mut starts = default_starts(m, opts);
        if let Some(w) = warm.take() {
            starts.push(w);
        }
        let r = minimize_from_starts(&constraint, m, starts, opts)?;
        rows.push(NeighborhoodRow {
            delta,
            energy: r.energy,
            residual: r.residual,
            iterations: r.iterations,
            converged: r.converged,
            infeasible: r.infeasible,
        });
        warm = Some(r.nodes);
    }
    Ok(rows)
}
