//! Desk-scale checks of the probabilistic estimates.

use serde::{Deserialize, Serialize};

use super::stats::{mean_variance, median};
use super::{check_budget, estimate_event, replicate, validate_run, DerivativeForm, DerivativeScale, Event, McResult};
use crate::complex::Complex64;
use crate::drivers::{dirichlet_energy, pwl_approximation};
use crate::error::{LabError, Result};
use crate::forward::{build_chain, sup_distance, trace};

/// Default for the absolute constant of the oscillation tail estimate.
pub const DEFAULT_C0: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentResult {
    pub kappa: f64,
    pub t: f64,
    pub y: f64,
    pub replicas: usize,
    pub mean: f64,
    pub se: f64,
    pub indeterminate: usize,
}

/// Sample mean and standard error of `|f̂'_t(iy)|^{2/κ}` for each `y`, all
/// evaluated on the same replicas.
pub fn moment_bound(kappa: f64, t: f64, ys: &[f64], replicas: usize, steps: usize, seed: u64) -> Result<Vec<MomentResult>> {
    validate_run(kappa, replicas, steps)?;
    if ys.iter().any(|y| !(*y > 0.0)) {
        return Err(LabError::InvalidArgument("y values must be positive".into()));
    }
    let k = (t * steps as f64).round();
    if !(0.0..=steps as f64).contains(&k) || (t * steps as f64 - k).abs() > 1e-8 {
        return Err(LabError::OffGrid { t, dt: 1.0 / steps as f64 });
    }
    let k = k as usize;
    let p = 2.0 / kappa;
    let samples = replicate(kappa, replicas, steps, seed, |d| {
        let chain = build_chain(d);
        ys.iter()
            .map(|&y| chain.centered_derivative_at_step(k, Complex64::new(0.0, y)).map(|z| z.norm().powf(p)))
            .collect::<Result<Vec<f64>>>()
            .ok()
    });
    let valid: Vec<&Vec<f64>> = samples.iter().flatten().collect();
    let indeterminate = replicas - valid.len();
    check_budget(indeterminate, replicas)?;
    Ok(ys
        .iter()
        .enumerate()
        .map(|(j, &y)| {
            let col: Vec<f64> = valid.iter().map(|v| v[j]).collect();
            let (mean, var) = mean_variance(&col);
            MomentResult { kappa, t, y, replicas, mean, se: (var / col.len() as f64).sqrt(), indeterminate }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub kappa: f64,
    pub m: usize,
    pub replicas: usize,
    pub seed: u64,
    pub mean: f64,
    pub variance: f64,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// `(2/κ) I(λ_m)` where `λ_m` is the `m`-node piecewise-linear interpolant
/// of `√κ B` sampled on `4m` steps.
pub fn chi_square_energy(kappa: f64, m: usize, replicas: usize, seed: u64) -> Result<ChiSquareResult> {
    if m == 0 {
        return Err(LabError::InvalidArgument("need at least one node".into()));
    }
    validate_run(kappa, replicas, 4 * m)?;
    let samples = replicate(kappa, replicas, 4 * m, seed, |d| {
        let approx = pwl_approximation(d, m).expect("m divides 4m");
        2.0 / kappa * dirichlet_energy(&approx).value()
    });
    let (mean, variance) = mean_variance(&samples);
    Ok(ChiSquareResult { kappa, m, replicas, seed, mean, variance, samples })
}

/// `c₀ δ^{(r/c₀)²/κ}`.
pub fn oscillation_bound(kappa: f64, delta: f64, r: f64, c0: f64) -> f64 {
    c0 * delta.powf((r / c0).powi(2) / kappa)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationTailResult {
    #[serde(flatten)]
    pub result: McResult,
    pub delta: f64,
    pub r: f64,
    pub c0: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Frequency of `osc(√κB, δ, [0,1]) ≥ r √(δ log(1/δ))` against the tail
/// bound; passes when `p̂ − 3 SE` does not exceed it.
pub fn oscillation_tail(
    kappa: f64,
    delta: f64,
    r: f64,
    replicas: usize,
    steps: usize,
    seed: u64,
    c0: f64,
) -> Result<OscillationTailResult> {
    if !(c0 > 0.0) || !(r > c0) {
        return Err(LabError::InvalidArgument(format!("need r > c0 > 0, got r={r}, c0={c0}")));
    }
    let result = estimate_event(&Event::Oscillation { delta, r }, kappa, replicas, steps, seed)?;
    let bound = oscillation_bound(kappa, delta, r, c0);
    let pass = result.p_hat - 3.0 * result.se <= bound;
    Ok(OscillationTailResult { result, delta, r, c0, bound, pass })
}

/// `4^n / (1 − 4^{−(β/κ−1)}) · 4^{−βn/κ}`, `+∞` once `κ ≥ β`.
pub fn complement_bound(beta: f64, kappa: f64, n: u32) -> f64 {
    if kappa >= beta {
        return f64::INFINITY;
    }
    let n = n as f64;
    4f64.powf(n) / (1.0 - 4f64.powf(-(beta / kappa - 1.0))) * 4f64.powf(-beta * n / kappa)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementResult {
    /// Frequency of the `Q`-form derivative bound failing for some `y ≤ 2^{−n}`.
    pub violation: McResult,
    /// Frequency of some dyadic corner exceeding `2^{βm}`, `m ∈ [n, n+2]`.
    pub corner: McResult,
    pub beta: f64,
    pub n: u32,
    pub bound: f64,
    /// Bound with the extra `2 e^{−log n / κ}` term.
    pub bound_p: f64,
    pub pass: bool,
}

/// Octaves below `2^{−n}` covered by the complement check.
pub const COMPLEMENT_OCTAVES: u32 = 2;

/// Monte Carlo frequency of the derivative-bound complement against the
/// arithmetic bound, on `4^{n+2}` steps.
pub fn complement_bound_check(beta: f64, kappa: f64, n: u32, replicas: usize, seed: u64) -> Result<ComplementResult> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(LabError::InvalidArgument(format!("beta must be in (0,1), got {beta}")));
    }
    if n == 0 || n + COMPLEMENT_OCTAVES > 6 {
        return Err(LabError::InvalidArgument(format!("need 1 <= n <= {}, got {n}", 6 - COMPLEMENT_OCTAVES)));
    }
    let steps = 4usize.pow(n + COMPLEMENT_OCTAVES);
    let event = |form| Event::Derivative {
        beta,
        n,
        scale: DerivativeScale::Dyadic,
        form,
        t_points: 33,
        octaves: COMPLEMENT_OCTAVES,
    };
    let violation = estimate_event(&event(DerivativeForm::Q), kappa, replicas, steps, seed)?;
    let corner = estimate_event(&event(DerivativeForm::Corner), kappa, replicas, steps, seed)?;
    let bound = complement_bound(beta, kappa, n);
    let bound_p = bound + 2.0 * (-(n as f64).ln() / kappa).exp();
    let pass = violation.p_hat - 3.0 * violation.se <= bound;
    Ok(ComplementResult { violation, corner, beta, n, bound, bound_p, pass })
}

/// Upper end of the admissible exponent range: `½(1 − √((1+β)/2))`.
pub fn zeta_limit(beta: f64) -> f64 {
    0.5 * (1.0 - ((1.0 + beta) / 2.0).sqrt())
}

/// `B(n,κ) (n/2)^{−β/κ}` with `B(n,κ) = 2 + c₀ + n/(1 − 4^{−(β/κ−1)})`;
/// `+∞` once `κ ≥ β`.
pub fn pwl_convergence_bound(n: usize, kappa: f64, beta: f64, c0: f64) -> f64 {
    if kappa >= beta {
        return f64::INFINITY;
    }
    let nf = n as f64;
    let b = 2.0 + c0 + nf / (1.0 - 4f64.powf(-(beta / kappa - 1.0)));
    b * (nf / 2.0).powf(-beta / kappa)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub median_sup: f64,
    pub violation_freq: f64,
    pub se: f64,
    pub bound: f64,
    /// `κ < β`; outside this regime the bound is vacuous.
    pub in_regime: bool,
    pub replicas: usize,
    pub indeterminate: usize,
}

pub const CONVERGENCE_HEADER: &str = "n,median_sup,violation_freq,se,bound,in_regime,N,indeterminate";

impl ConvergenceRow {
    pub fn csv_row(&self) -> String {
        use crate::fmt::fmt_f64;
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n,
            fmt_f64(self.median_sup),
            fmt_f64(self.violation_freq),
            fmt_f64(self.se),
            fmt_f64(self.bound),
            self.in_regime,
            self.replicas,
            self.indeterminate
        )
    }
}

/// Sup distance between the trace of `√κB` on `fine_steps` steps and the
/// trace of its `n`-node piecewise-linear interpolant, for each `n`.
#[allow(clippy::too_many_arguments)]
pub fn pwl_convergence(
    kappa: f64,
    n_list: &[usize],
    beta: f64,
    zeta: f64,
    replicas: usize,
    fine_steps: usize,
    seed: u64,
    c0: f64,
) -> Result<Vec<ConvergenceRow>> {
    validate_run(kappa, replicas, fine_steps)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(LabError::InvalidArgument(format!("beta must be in (0,1), got {beta}")));
    }
    let limit = zeta_limit(beta);
    if !(zeta > 0.0 && zeta < limit) {
        return Err(LabError::InvalidArgument(format!("zeta must lie in (0, {limit}), got {zeta}")));
    }
    if n_list.is_empty() || n_list.iter().any(|&n| n == 0 || fine_steps % n != 0) {
        return Err(LabError::InvalidArgument(format!("every n must divide the fine grid size {fine_steps}")));
    }
    let errors = replicate(kappa, replicas, fine_steps, seed, |d| {
        let fine = trace(d).ok()?;
        n_list
            .iter()
            .map(|&n| {
                let coarse = trace(&pwl_approximation(d, n).expect("n divides the grid")).ok()?;
                sup_distance(&fine, &coarse).ok()
            })
            .collect::<Option<Vec<f64>>>()
    });
    let valid: Vec<&Vec<f64>> = errors.iter().flatten().collect();
    let indeterminate = replicas - valid.len();
    check_budget(indeterminate, replicas)?;
    let count = valid.len() as f64;
    Ok(n_list
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let col: Vec<f64> = valid.iter().map(|v| v[j]).collect();
            let threshold = (n as f64).powf(-zeta);
            let freq = col.iter().filter(|&&e| e >= threshold).count() as f64 / count;
            ConvergenceRow {
                n,
                median_sup: median(&col),
                violation_freq: freq,
                se: (freq * (1.0 - freq) / count).sqrt(),
                bound: pwl_convergence_bound(n, kappa, beta, c0),
                in_regime: kappa < beta,
                replicas,
                indeterminate,
            }
        })
        .collect())
}
