//! Seeded Monte Carlo over SLE_κ samples.
//!
//! Replica `i` of a run keyed by `seed` draws its Brownian increments from the
//! stream seeded by [`mix`](crate::seed::mix)`(seed, i)`. Hit counts are merged
//! by integer addition, so every estimate is independent of the worker count.
//! Because the Gaussian stream does not depend on κ, runs that share a seed
//! are coupled across κ and across nested events.

mod experiments;
pub mod stats;

use std::fmt::Write as _;
use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{dyadic_q, psi};
use crate::complex::Complex64;
use crate::drivers::{oscillation, sample_brownian_driver, Driver};
use crate::error::{LabError, Result};
use crate::fmt::fmt_f64;
use crate::forward::{build_chain, trace_until, Curve, MapChain};
use crate::seed::mix;

pub use experiments::{
    chi_square_energy, complement_bound, complement_bound_check, moment_bound, oscillation_bound,
    oscillation_tail, pwl_convergence, pwl_convergence_bound, zeta_limit, ChiSquareResult, ComplementResult,
    ConvergenceRow, MomentResult, OscillationTailResult, CONVERGENCE_HEADER, DEFAULT_C0,
};

/// Default SLE tracing grid on `[0, 1]`.
pub const DEFAULT_STEPS: usize = 2048;

/// Largest tolerated fraction of replicas lost to solver singularities.
pub const INDETERMINATE_BUDGET: f64 = 1e-3;

/// Range of `y` for derivative events: `y ≤ 2^{−n}` or `y ≤ 1/√n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeScale {
    Dyadic,
    Sqrt,
}

/// Right-hand side of a derivative event.
///
/// `Q` compares against `Q(p(t,y)) y^{−β}`, `Psi` against `ψ(n) y^{−β}`, and
/// `Corner` checks the dyadic corner values `|f̂'_{j/4^m}(i 2^{−m})| ≤ 2^{βm}`
/// (always on the dyadic scale).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeForm {
    Q,
    Psi,
    Corner,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    /// `sup_k |γ(t_k) − target(t_k)| < δ`, or its complement.
    Tube { target: Curve, delta: f64, complement: bool },
    /// `sup_{[0,1]} |λ| ≥ a`.
    DriverSup { level: f64 },
    /// Derivative bound violated somewhere on the `(t, y)` grid: `t_points`
    /// equally spaced grid times and `y` halving every half octave over
    /// `octaves` octaves below the scale.
    Derivative {
        beta: f64,
        n: u32,
        scale: DerivativeScale,
        form: DerivativeForm,
        t_points: usize,
        octaves: u32,
    },
    /// `osc(λ, δ, [0,1]) ≥ r √(δ log(1/δ))`.
    Oscillation { delta: f64, r: f64 },
}

impl Event {
    /// Short label used in the `event` CSV column.
    pub fn label(&self) -> String {
        match self {
            Event::Tube { delta, complement, .. } => {
                format!("tube{}:delta={}", if *complement { "-complement" } else { "" }, fmt_f64(*delta))
            }
            Event::DriverSup { level } => format!("driver-sup:a={}", fmt_f64(*level)),
            Event::Derivative { beta, n, scale, form, .. } => format!(
                "derivative:beta={};n={n};scale={};form={}",
                fmt_f64(*beta),
                match scale {
                    DerivativeScale::Dyadic => "dyadic",
                    DerivativeScale::Sqrt => "sqrt",
                },
                match form {
                    DerivativeForm::Q => "q",
                    DerivativeForm::Psi => "psi",
                    DerivativeForm::Corner => "corner",
                }
            ),
            Event::Oscillation { delta, r } => format!("oscillation:delta={};r={}", fmt_f64(*delta), fmt_f64(*r)),
        }
    }

    fn validate(&self, steps: usize) -> Result<()> {
        let bad = |m: String| Err(LabError::InvalidArgument(m));
        match self {
            Event::Tube { target, delta, .. } => {
                if !(*delta > 0.0) {
                    return bad(format!("tube radius must be positive, got {delta}"));
                }
                if target.len() != steps + 1 || (target.horizon() - 1.0).abs() > 1e-12 {
                    return Err(LabError::GridMismatch(format!(
                        "tube target has {} points on [0, {}], replicas use {} steps on [0, 1]",
                        target.len(),
                        target.horizon(),
                        steps
                    )));
                }
            }
            Event::DriverSup { level } => {
                if !(*level > 0.0) {
                    return bad(format!("sup level must be positive, got {level}"));
                }
            }
            Event::Derivative { beta, n, form, t_points, octaves, .. } => {
                if !(*beta > 0.0 && *beta < 1.0) {
                    return bad(format!("beta must be in (0,1), got {beta}"));
                }
                if *n == 0 || *t_points < 2 {
                    return bad("derivative event needs n >= 1 and at least two t points".into());
                }
                if *form == DerivativeForm::Corner {
                    let m_max = n + octaves;
                    if m_max > 12 || steps % 4usize.pow(m_max) != 0 {
                        return bad(format!("corner events need steps divisible by 4^{m_max}"));
                    }
                }
            }
            Event::Oscillation { delta, r } => {
                if !(*delta > 0.0 && *delta <= 1.0) || !(*r > 0.0) {
                    return bad(format!("oscillation event needs 0 < δ <= 1 and r > 0, got δ={delta}, r={r}"));
                }
            }
        }
        Ok(())
    }

    fn needs_trace(&self) -> bool {
        matches!(self, Event::Tube { .. } | Event::Derivative { .. })
    }

    /// `Ok(true)` on a hit; solver singularities surface as errors.
    pub fn occurs(&self, driver: &Driver) -> Result<bool> {
        match self {
            Event::Tube { target, delta, complement } => {
                let pts = target.points();
                let mut inside = true;
                trace_until(driver, |k, z| {
                    if (z - pts[k]).norm() >= *delta {
                        inside = false;
                        ControlFlow::Break(())
                    } else {
                        ControlFlow::Continue(())
                    }
                })?;
                Ok(inside != *complement)
            }
            Event::DriverSup { level } => Ok(driver.sup_norm() >= *level),
            Event::Oscillation { delta, r } => {
                let threshold = r * (delta * (1.0 / delta).ln()).sqrt();
                Ok(oscillation(driver, *delta)? >= threshold)
            }
            Event::Derivative { beta, n, scale, form, t_points, octaves } => {
                let chain = build_chain(driver);
                if *form == DerivativeForm::Corner {
                    return corner_violated(&chain, *beta, *n, n + octaves);
                }
                let top = match scale {
                    DerivativeScale::Dyadic => 2f64.powi(-(*n as i32)),
                    DerivativeScale::Sqrt => 1.0 / (*n as f64).sqrt(),
                };
                let steps = driver.steps();
                for i in 0..*t_points {
                    let k = i * steps / (t_points - 1);
                    for j in 0..=2 * octaves {
                        let y = top * 2f64.powf(-(j as f64) / 2.0);
                        let rhs = match form {
                            DerivativeForm::Q => dyadic_q(crate::bounds::local_increment(driver, k, y)),
                            _ => psi(*n as f64),
                        } * y.powf(-beta);
                        let d = chain.centered_derivative_at_step(k, Complex64::new(0.0, y))?;
                        if d.norm() > rhs {
                            return Ok(true);
                        }
                    }
                }
                Ok(false)
            }
        }
    }
}

fn corner_violated(chain: &MapChain, beta: f64, n: u32, m_max: u32) -> Result<bool> {
    for m in n..=m_max {
        let cells = 4usize.pow(m);
        let stride = chain.steps() / cells;
        let y = 2f64.powi(-(m as i32));
        let cap = 2f64.powf(beta * m as f64);
        for j in 1..=cells {
            if chain.centered_derivative_at_step(j * stride, Complex64::new(0.0, y))?.norm() > cap {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Frequency estimate of one event at one κ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub event: String,
    pub kappa: f64,
    pub replicas: usize,
    pub hits: usize,
    pub p_hat: f64,
    pub se: f64,
    pub kappa_log_p: f64,
    pub seed: u64,
    pub indeterminate: usize,
}

pub const MC_HEADER: &str = "event,kappa,N,hits,p_hat,se,kappa_log_p,seed,indeterminate";

impl McResult {
    /// `p̂ = hits / (N − indeterminate)`, `SE = √(p̂(1 − p̂)/N)`.
    pub fn from_counts(event: String, kappa: f64, replicas: usize, hits: usize, indeterminate: usize, seed: u64) -> Self {
        let valid = replicas - indeterminate;
        let p_hat = if valid == 0 { 0.0 } else { hits as f64 / valid as f64 };
        let se = (p_hat * (1.0 - p_hat) / replicas as f64).sqrt();
        let kappa_log_p = if hits == 0 { f64::NEG_INFINITY } else { kappa * p_hat.ln() };
        McResult { event, kappa, replicas, hits, p_hat, se, kappa_log_p, seed, indeterminate }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.event,
            fmt_f64(self.kappa),
            self.replicas,
            self.hits,
            fmt_f64(self.p_hat),
            fmt_f64(self.se),
            fmt_f64(self.kappa_log_p),
            self.seed,
            self.indeterminate
        )
    }

    /// Standard error of `κ log p̂` by the delta method.
    pub fn kappa_log_se(&self) -> f64 {
        if self.hits == 0 {
            f64::INFINITY
        } else {
            self.kappa * self.se / self.p_hat
        }
    }
}

pub fn results_to_csv(rows: &[McResult]) -> String {
    let mut out = String::from(MC_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

pub(crate) fn check_budget(indeterminate: usize, replicas: usize) -> Result<()> {
    if indeterminate as f64 >= INDETERMINATE_BUDGET * replicas as f64 && indeterminate > 0 {
        return Err(LabError::SingularityBudget { indeterminate, replicas });
    }
    Ok(())
}

pub(crate) fn validate_run(kappa: f64, replicas: usize, steps: usize) -> Result<()> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(LabError::InvalidArgument(format!("kappa must be positive, got {kappa}")));
    }
    if replicas == 0 || steps == 0 {
        return Err(LabError::InvalidArgument("need at least one replica and one step".into()));
    }
    Ok(())
}

/// Run `per_replica` over `replicas` seeded Brownian drivers on `[0, 1]` and
/// collect the outputs in replica order.
pub(crate) fn replicate<T: Send>(
    kappa: f64,
    replicas: usize,
    steps: usize,
    seed: u64,
    per_replica: impl Fn(&Driver) -> T + Sync,
) -> Vec<T> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let d = sample_brownian_driver(kappa, 1.0, steps, mix(seed, i)).expect("validated parameters");
            per_replica(&d)
        })
        .collect()
}

/// Frequency of `event` over `replicas` samples of SLE_κ traced on `steps`
/// uniform steps over `[0, 1]`.
pub fn estimate_event(event: &Event, kappa: f64, replicas: usize, steps: usize, seed: u64) -> Result<McResult> {
    validate_run(kappa, replicas, steps)?;
    event.validate(steps)?;
    let (hits, indeterminate) = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let d = sample_brownian_driver(kappa, 1.0, steps, mix(seed, i)).expect("validated parameters");
            match event.occurs(&d) {
                Ok(true) => (1usize, 0usize),
                Ok(false) => (0, 0),
                Err(LabError::Singularity { .. }) => (0, 1),
                Err(e) if event.needs_trace() => panic!("unexpected replica failure: {e}"),
                Err(_) => (0, 1),
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    check_budget(indeterminate, replicas)?;
    Ok(McResult::from_counts(event.label(), kappa, replicas, hits, indeterminate, seed))
}

/// One row of an LDP slope table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdpRow {
    #[serde(flatten)]
    pub result: McResult,
    /// Fewer than 50 hits: the row is too thin to read a slope from.
    pub low_hits: bool,
}

pub const LDP_HEADER: &str = "event,kappa,N,hits,p_hat,se,kappa_log_p,seed,indeterminate,low_hits";

/// Minimum hit count for a trustworthy row.
pub const MIN_HITS: usize = 50;

/// Estimates for each κ in a decreasing list, all sharing `seed`.
pub fn ldp_slope(event: &Event, kappas: &[f64], replicas: usize, steps: usize, seed: u64) -> Result<Vec<LdpRow>> {
    if kappas.is_empty() {
        return Err(LabError::InvalidArgument("kappa list is empty".into()));
    }
    if kappas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LabError::InvalidArgument("kappa list must be strictly decreasing".into()));
    }
    kappas
        .iter()
        .map(|&k| {
            let result = estimate_event(event, k, replicas, steps, seed)?;
            let low_hits = result.hits < MIN_HITS;
            Ok(LdpRow { result, low_hits })
        })
        .collect()
}

pub fn ldp_to_csv(rows: &[LdpRow]) -> String {
    let mut out = String::from(LDP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{}", r.result.csv_row(), r.low_hits);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::{linear_driver, zero_driver};
    use crate::forward::trace;

    fn tube(target: &Driver, delta: f64, complement: bool) -> Event {
        Event::Tube { target: trace(target).unwrap(), delta, complement }
    }

    #[test]
    fn wide_tube_is_certain() {
        let e = tube(&linear_driver(1.0, 1.0, 64), 10.0, false);
        let r = estimate_event(&e, 0.5, 200, 64, 1).unwrap();
        assert_eq!(r.hits, 200);
        assert_eq!(r.p_hat, 1.0);
        assert_eq!(r.se, 0.0);
        assert_eq!(r.kappa_log_p, 0.0);
    }

    #[test]
    fn complement_counts_add_up() {
        let target = zero_driver(1.0, 64);
        let a = estimate_event(&tube(&target, 0.3, false), 1.0, 300, 64, 9).unwrap();
        let b = estimate_event(&tube(&target, 0.3, true), 1.0, 300, 64, 9).unwrap();
        assert_eq!(a.hits + b.hits, 300);
    }

    #[test]
    fn nested_tubes_are_monotone() {
        let target = zero_driver(1.0, 64);
        let mut last = 0;
        for delta in [0.1, 0.2, 0.4, 0.8] {
            let r = estimate_event(&tube(&target, delta, false), 1.0, 300, 64, 4).unwrap();
            assert!(r.hits >= last);
            last = r.hits;
        }
    }

    #[test]
    fn zero_hits_give_negative_infinity() {
        let r = estimate_event(&Event::DriverSup { level: 100.0 }, 1.0, 100, 32, 0).unwrap();
        assert_eq!(r.hits, 0);
        assert_eq!(r.kappa_log_p, f64::NEG_INFINITY);
        assert!(r.csv_row().contains(",-inf,"));
    }

    #[test]
    fn estimates_do_not_depend_on_thread_count() {
        let e = Event::Oscillation { delta: 0.1, r: 1.0 };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| estimate_event(&e, 1.0, 2000, 200, 3).unwrap());
        let b = four.install(|| estimate_event(&e, 1.0, 2000, 200, 3).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn validation() {
        assert!(estimate_event(&Event::DriverSup { level: 1.0 }, 0.0, 10, 10, 0).is_err());
        assert!(estimate_event(&Event::DriverSup { level: -1.0 }, 1.0, 10, 10, 0).is_err());
        let e = tube(&zero_driver(1.0, 32), 0.3, false);
        assert!(matches!(estimate_event(&e, 1.0, 10, 64, 0), Err(LabError::GridMismatch(_))));
        assert!(ldp_slope(&Event::DriverSup { level: 1.0 }, &[0.1, 0.2], 10, 10, 0).is_err());
    }

    #[test]
    fn budget_rule() {
        assert!(check_budget(0, 10).is_ok());
        assert!(check_budget(1, 10_000).is_ok());
        assert!(check_budget(10, 10_000).is_err());
        assert!(check_budget(1, 100).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = McResult::from_counts("driver-sup:a=1".into(), 0.1, 1000, 3, 0, 7);
        let csv = results_to_csv(&[r]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), MC_HEADER);
        let cols: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(cols.len(), 9);
        assert_eq!(cols[3], "3");
        assert_eq!(cols[4], "0.003");
    }
}
