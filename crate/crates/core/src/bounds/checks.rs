use super::{dyadic_c1, dyadic_c2, rect_c1, rect_c2, BoundReport, TOL_EXACT, TOL_SOLVER};
use crate::complex::Complex64;
use crate::drivers::{dirichlet_energy, Driver};
use crate::error::{LabError, Result};
use crate::forward::{build_chain, MapChain};

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs <= 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn grid_indices(chain: &MapChain, t_grid: &[f64]) -> Result<Vec<usize>> {
    t_grid.iter().map(|&t| chain.grid_index(t)).collect()
}

fn check_y_grid(y_grid: &[f64]) -> Result<()> {
    if y_grid.iter().any(|y| !(*y > 0.0 && y.is_finite())) {
        return Err(LabError::InvalidArgument("y grid must lie in (0, inf)".into()));
    }
    Ok(())
}

/// `|f_t¹(x+iy) − f_t²(x+iy)| ≤ ‖λ₁ − λ₂‖_∞ √(1 + 4/y²)` along `x = 0`.
pub fn check_continuity_bound(
    lambda1: &Driver,
    lambda2: &Driver,
    y_grid: &[f64],
    t_grid: &[f64],
) -> Result<BoundReport> {
    check_continuity_bound_at(lambda1, lambda2, y_grid, t_grid, &[0.0], "pair")
}

/// As [`check_continuity_bound`] with an explicit set of real parts.
pub fn check_continuity_bound_at(
    lambda1: &Driver,
    lambda2: &Driver,
    y_grid: &[f64],
    t_grid: &[f64],
    xs: &[f64],
    label: &str,
) -> Result<BoundReport> {
    check_y_grid(y_grid)?;
    let gap = lambda1.sup_distance(lambda2)?;
    let (c1, c2) = (build_chain(lambda1), build_chain(lambda2));
    let mut report = BoundReport::empty("continuity", TOL_EXACT);
    for k in grid_indices(&c1, t_grid)? {
        let t = lambda1.time(k);
        for &y in y_grid {
            for &x in xs {
                let z = Complex64::new(x, y);
                let r = match (c1.map_at_step(k, z), c2.map_at_step(k, z)) {
                    (Ok(a), Ok(b)) => ratio((a - b).norm(), gap * (1.0 + 4.0 / (y * y)).sqrt()),
                    _ => f64::INFINITY,
                };
                report.observe(r, t, y, label);
            }
        }
    }
    Ok(report)
}

/// `log|f̂_t'(iy)| ≤ ½ I_D(λ)`, reported as `|f̂_t'(iy)| / e^{I_D/2}`.
pub fn check_derivative_energy_bound(driver: &Driver, y_grid: &[f64], t_grid: &[f64]) -> Result<BoundReport> {
    check_y_grid(y_grid)?;
    let energy = dirichlet_energy(driver).value();
    let chain = build_chain(driver);
    let rhs = (0.5 * energy).exp();
    let mut report = BoundReport::empty("derivative-energy", TOL_SOLVER);
    for k in grid_indices(&chain, t_grid)? {
        let t = driver.time(k);
        for &y in y_grid {
            let r = match chain.centered_derivative_at_step(k, Complex64::new(0.0, y)) {
                Ok(d) => ratio(d.norm(), rhs),
                Err(_) => f64::INFINITY,
            };
            report.observe(r, t, y, "driver");
        }
    }
    report.note("energy", energy);
    Ok(report)
}

/// `|γ(t) − f̂_t(iy)| ≤ y e^{c/2}` at every grid time, for `I_D(λ) ≤ c`.
pub fn check_tip_distance_bound(driver: &Driver, c: f64, y: f64) -> Result<BoundReport> {
    check_y_grid(&[y])?;
    let energy = dirichlet_energy(driver).value();
    if energy > c * (1.0 + 1e-12) {
        return Err(LabError::InvalidArgument(format!("driver energy {energy} exceeds the cap c = {c}")));
    }
    let chain = build_chain(driver);
    let rhs = y * (0.5 * c).exp();
    let mut report = BoundReport::empty("tip-distance", TOL_SOLVER);
    for k in 0..=chain.steps() {
        let r = match (chain.curve_point(k), chain.centered_map_at_step(k, Complex64::new(0.0, y))) {
            (Ok(g), Ok(f)) => ratio((g - f).norm(), rhs),
            _ => f64::INFINITY,
        };
        report.observe(r, driver.time(k), y, "driver");
    }
    report.note("c", c);
    Ok(report)
}

/// Koebe distortion at `w` relative to `z` for `|z − w| ≤ r Im z`:
/// `(1−r)/(1+r)³ ≤ |f'(w)|/|f'(z)| ≤ (1+r)/(1−r)³`.
///
/// The worst ratio is the larger of the violations of either side.
pub fn check_koebe(chain: &MapChain, t: f64, z: Complex64, w: Complex64, r: f64) -> Result<BoundReport> {
    if !(0.0..1.0).contains(&r) {
        return Err(LabError::InvalidArgument(format!("Koebe radius ratio must be in [0,1), got {r}")));
    }
    if !(z.im > 0.0) || (z - w).norm() > r * z.im * (1.0 + 1e-12) {
        return Err(LabError::InvalidArgument("Koebe precondition |z-w| <= r Im z violated".into()));
    }
    let k = chain.grid_index(t)?;
    let mut report = BoundReport::empty("koebe", TOL_EXACT);
    let lower = (1.0 - r) / (1.0 + r).powi(3);
    let upper = (1.0 + r) / (1.0 - r).powi(3);
    let worst = match (chain.derivative_at_step(k, z), chain.derivative_at_step(k, w)) {
        (Ok(dz), Ok(dw)) => {
            let q = dw.norm() / dz.norm();
            (q / upper).max(lower / q)
        }
        _ => f64::INFINITY,
    };
    report.observe(worst, t, z.im, "chain");
    Ok(report)
}

/// `|f'(z₂)| ≤ c₁ y^{−c₂} |f'(z₁)|` for `z₁, z₂` in the rectangle
/// `[−1,1] × [0,1]` with imaginary parts at least `y`, applied to `f_t`.
pub fn check_rectangle_distortion(
    chain: &MapChain,
    t: f64,
    z1: Complex64,
    z2: Complex64,
    y: f64,
) -> Result<BoundReport> {
    check_rectangle_distortion_scaled(chain, t, 0.0, 1.0, z1, z2, y)
}

/// Rectangle distortion for `g(w) = f_t(center + scale·w)`.
pub fn check_rectangle_distortion_scaled(
    chain: &MapChain,
    t: f64,
    center: f64,
    scale: f64,
    z1: Complex64,
    z2: Complex64,
    y: f64,
) -> Result<BoundReport> {
    let inside = |z: Complex64| z.re.abs() <= 1.0 && z.im <= 1.0 && z.im >= y;
    if !(y > 0.0 && y <= 1.0) || !inside(z1) || !inside(z2) || !(scale > 0.0) {
        return Err(LabError::InvalidArgument("rectangle distortion needs z1, z2 in S with Im >= y, 0 < y <= 1".into()));
    }
    let k = chain.grid_index(t)?;
    let (c1, c2) = (rect_c1(), rect_c2());
    let mut report = BoundReport::empty("rectangle-distortion", TOL_EXACT);
    let to_domain = |z: Complex64| z * scale + center;
    let (r, empirical) = match (
        chain.derivative_at_step(k, to_domain(z1)),
        chain.derivative_at_step(k, to_domain(z2)),
    ) {
        (Ok(d1), Ok(d2)) => {
            let q = d2.norm() / d1.norm();
            (q / (c1 * y.powf(-c2)), q * y.powf(c2))
        }
        _ => (f64::INFINITY, f64::INFINITY),
    };
    report.observe(r, t, y, "chain");
    report.note("empirical_c1", empirical);
    report.note("c2", c2);
    Ok(report)
}

/// `Q(x) = c₁ (1 + x²)^{c₂}` with the rectangle-lemma instantiation of the
/// constants.
pub fn dyadic_q(x: f64) -> f64 {
    dyadic_c1() * (1.0 + x * x).powf(dyadic_c2())
}

/// `ψ(n) = c₁ (1 + log n)^{c₂}`.
pub fn psi(n: f64) -> f64 {
    dyadic_c1() * (1.0 + n.ln()).powf(dyadic_c2())
}

/// `(1/y) sup_{s ∈ [0, y²]} |λ(t + s) − λ(t)|`, with `t + s` clamped to the
/// horizon.
pub(crate) fn local_increment(driver: &Driver, k: usize, y: f64) -> f64 {
    let t = driver.time(k);
    let base = driver.values()[k];
    let end = (t + y * y).min(driver.horizon());
    let last = ((end / driver.dt()).floor() as usize).min(driver.steps());
    let mut sup = (driver.value_at(end) - base).abs();
    for v in &driver.values()[k..=last.max(k)] {
        sup = sup.max((v - base).abs());
    }
    sup / y
}

/// Dyadic corner hypothesis ⇒ derivative bound.
///
/// If `|f̂'_{j/4^m}(i 2^{−m})| ≤ 2^{βm}` for every `m ∈ [n, m_max]` and
/// `j = 1..4^m`, verifies `|f̂_t'(iy)| ≤ Q(p(t,y)) y^{−β}` on a `(t, y)` grid
/// with `y ∈ [2^{−m_max}, 2^{−n}]`. A failed hypothesis is reported in the
/// notes, not as a bound failure.
pub fn check_dyadic_implication(
    driver: &Driver,
    beta: f64,
    n: u32,
    m_max: u32,
    t_points: usize,
) -> Result<BoundReport> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(LabError::InvalidArgument(format!("beta must be in (0,1), got {beta}")));
    }
    if (driver.horizon() - 1.0).abs() > 1e-12 {
        return Err(LabError::InvalidArgument("dyadic check needs horizon 1".into()));
    }
    if m_max < n || m_max > 12 {
        return Err(LabError::InvalidArgument(format!("need n <= m_max <= 12, got n={n}, m_max={m_max}")));
    }
    let finest = 4usize.pow(m_max);
    if driver.steps() % finest != 0 {
        return Err(LabError::InvalidArgument(format!(
            "driver steps {} must be a multiple of 4^m_max = {finest}",
            driver.steps()
        )));
    }
    let chain = build_chain(driver);
    let mut report = BoundReport::empty("dyadic-implication", TOL_SOLVER);
    report.note("m_max", m_max);
    report.note("n", n);
    report.note("beta", beta);
    report.note("constants", "c1 = 12 e^10 * 12^10, c2 = log2(12) (rectangle lemma at r = 1/2)");

    for m in n..=m_max {
        let cells = 4usize.pow(m);
        let stride = driver.steps() / cells;
        let y = 2f64.powi(-(m as i32));
        let cap = 2f64.powf(beta * m as f64);
        for j in 1..=cells {
            let holds = chain
                .centered_derivative_at_step(j * stride, Complex64::new(0.0, y))
                .map(|d| d.norm() <= cap)
                .unwrap_or(false);
            if !holds {
                report.note("hypothesis", "not satisfied");
                report.note("hypothesis_failed_at", serde_json::json!({ "m": m, "j": j }));
                return Ok(report);
            }
        }
    }
    report.note("hypothesis", "satisfied");

    let steps = driver.steps();
    let t_points = t_points.clamp(1, steps + 1);
    let octaves = (m_max - n) as usize;
    let ys: Vec<f64> = (0..=2 * octaves).map(|i| 2f64.powf(-(n as f64) - i as f64 / 2.0)).collect();
    for i in 0..t_points {
        let k = if t_points == 1 { 0 } else { i * steps / (t_points - 1) };
        for &y in &ys {
            let p = local_increment(driver, k, y);
            let rhs = dyadic_q(p) * y.powf(-beta);
            let r = match chain.centered_derivative_at_step(k, Complex64::new(0.0, y)) {
                Ok(d) => ratio(d.norm(), rhs),
                Err(_) => f64::INFINITY,
            };
            report.observe(r, driver.time(k), y, "driver");
        }
    }
    Ok(report)
}
