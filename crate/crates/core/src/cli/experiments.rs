//! Experiment kinds, registered by name.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Deserialize;
use serde_json::json;

use super::config::{ConstraintSpec, DriverSpec, EventSpec, ExperimentConfig};
use crate::bounds::BoundRegistry;
use crate::drivers::{dirichlet_energy, oscillation, pwl_approximation};
use crate::error::{LabError, Result};
use crate::fmt::fmt_f64;
use crate::forward::trace;
use crate::io::{curve_from_csv, curve_to_csv, driver_to_csv};
use crate::montecarlo::{
    chi_square_energy, complement_bound_check, estimate_event, ldp_slope, ldp_to_csv, moment_bound,
    oscillation_tail, pwl_convergence, results_to_csv, stats::ks_two_sample, CONVERGENCE_HEADER, DEFAULT_C0,
    DEFAULT_STEPS,
};
use crate::optimizer::{minimize_energy, neighborhood_limit, OptOptions};
use crate::seed::mix;
use crate::zipper::{capacity_profile, zip_curve};

/// A file produced by an experiment, relative to the output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: &str, contents: String) -> Self {
        Artifact { name: name.to_string(), contents }
    }

    fn json(name: &str, value: &serde_json::Value) -> Self {
        let mut s = serde_json::to_string_pretty(value).expect("json serializes");
        s.push('\n');
        Artifact::new(name, s)
    }
}

pub trait Experiment: Send + Sync {
    fn kind(&self) -> &'static str;

    /// Run with the config's parameters; nothing touches the filesystem
    /// except reads named in the parameters.
    fn run(&self, config: &ExperimentConfig) -> Result<Vec<Artifact>>;
}

pub struct ExperimentRegistry {
    kinds: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl ExperimentRegistry {
    pub fn new() -> Self {
        ExperimentRegistry { kinds: BTreeMap::new() }
    }

    pub fn standard() -> Self {
        let mut r = ExperimentRegistry::new();
        r.register(Box::new(TraceExperiment));
        r.register(Box::new(ZipExperiment));
        r.register(Box::new(EnergyExperiment));
        r.register(Box::new(VerifyBoundsExperiment));
        r.register(Box::new(McExperiment));
        r.register(Box::new(LdpSlopeExperiment));
        r.register(Box::new(OptimizeExperiment));
        r.register(Box::new(ApproxConvergeExperiment));
        r
    }

    pub fn register(&mut self, e: Box<dyn Experiment>) {
        self.kinds.insert(e.kind(), e);
    }

    pub fn get(&self, kind: &str) -> Option<&dyn Experiment> {
        self.kinds.get(kind).map(|b| b.as_ref())
    }

    pub fn kinds(&self) -> Vec<&'static str> {
        self.kinds.keys().copied().collect()
    }
}

impl Default for ExperimentRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

fn default_horizon() -> f64 {
    1.0
}

fn default_trace_steps() -> usize {
    1000
}

fn default_mc_steps() -> usize {
    DEFAULT_STEPS
}

fn default_c0() -> f64 {
    DEFAULT_C0
}

fn invalid(msg: impl Into<String>) -> LabError {
    LabError::InvalidArgument(msg.into())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceParams {
    driver: DriverSpec,
    #[serde(default = "default_trace_steps")]
    steps: usize,
    #[serde(default = "default_horizon")]
    horizon: f64,
}

struct TraceExperiment;

impl Experiment for TraceExperiment {
    fn kind(&self) -> &'static str {
        "trace"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<Vec<Artifact>> {
        let p: TraceParams = config.params()?;
        let driver = p.driver.build(p.horizon, p.steps, config.seed)?;
        let curve = trace(&driver)?;
        let tip = curve.points()[curve.len() - 1];
        let summary = json!({
            "steps": driver.steps(),
            "horizon": driver.horizon(),
            "energy": dirichlet_energy(&driver).value(),
            "endpoint": [tip.re, tip.im],
        });
        Ok(vec![
            Artifact::new("driver.csv", driver_to_csv(&driver)),
            Artifact::new("curve.csv", curve_to_csv(&curve)),
            Artifact::json("summary.json", &summary),
        ])
    }
}

/// Either unzip a curve file, or trace a driver and unzip the result.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ZipParams {
    #[serde(default)]
    curve: Option<std::path::PathBuf>,
    #[serde(default)]
    driver: Option<DriverSpec>,
    #[serde(default = "default_trace_steps")]
    steps: usize,
    #[serde(default = "default_horizon")]
    horizon: f64,
}

struct ZipExperiment;

impl Experiment for ZipExperiment {
    fn kind(&self) -> &'static str {
        "zip"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<Vec<Artifact>> {
        let p: ZipParams = config.params()?;
        let (curve, source) = match (&p.curve, &p.driver) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
                (curve_from_csv(&text, path)?, None)
            }
            (None, Some(spec)) => {
                let d = spec.build(p.horizon, p.steps, config.seed)?;
                (trace(&d)?, Some(d))
            }
            _ => return Err(invalid("zip needs exactly one of `curve` or `driver`")),
        };
        let z = zip_curve(&curve)?;
        let mut summary = json!({
            "points": curve.len(),
            "horizon": z.horizon(),
            "residual": z.residual,
        });
        if let (Some(orig), Some(rec)) = (&source, &z.driver) {
            if orig.steps() == rec.steps() {
                let err = orig
                    .values()
                    .iter()
                    .zip(rec.values())
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                summary["roundtrip_error"] = json!(err);
            }
        }
        let mut cap = String::from("t,hcap\n");
        for (t, h) in capacity_profile(&z) {
            let _ = writeln!(cap, "{},{}", fmt_f64(t), fmt_f64(h));
        }
        let mut out = vec![Artifact::new("capacity.csv", cap), Artifact::json("summary.json", &summary)];
        if let Some(d) = &z.driver {
            out.insert(0, Artifact::new("zip_driver.csv", driver_to_csv(d)));
        }
        Ok(out)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnergyParams {
    driver: DriverSpec,
    #[serde(default = "default_trace_steps")]
    steps: usize,
    #[serde(default = "default_horizon")]
    horizon: f64,
    /// Node counts for piecewise-linear approximations.
    #[serde(default)]
    nodes: Vec<usize>,
    /// Windows for the oscillation modulus.
    #[serde(default)]
    oscillation: Vec<f64>,
}

struct EnergyExperiment;

impl Experiment for EnergyExperiment {
    fn kind(&self) -> &'static str {
        "energy"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<Vec<Artifact>> {
        let p: EnergyParams = config.params()?;
        let d = p.driver.build(p.horizon, p.steps, config.seed)?;
        let pwl = p
            .nodes
            .iter()
            .map(|&m| Ok(json!({ "nodes": m, "energy": dirichlet_energy(&pwl_approximation(&d, m)?).value() })))
            .collect::<Result<Vec<_>>>()?;
        let osc = p
            .oscillation
            .iter()
            .map(|&delta| Ok(json!({ "delta": delta, "oscillation": oscillation(&d, delta)? })))
            .collect::<Result<Vec<_>>>()?;
        let v = json!({
            "steps": d.steps(),
            "horizon": d.horizon(),
            "energy": dirichlet_energy(&d).value(),
            "pwl": pwl,
            "oscillation": osc,
        });
        Ok(vec![Artifact::json("energy.json", &v)])
    }
}

fn default_instances() -> usize {
    1000
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsParams {
    /// Check names; all registered checks when empty.
    #[serde(default)]
    checks: Vec<String>,
    #[serde(default = "default_instances")]
    instances: usize,
}

struct VerifyBoundsExperiment;

impl Experiment for VerifyBoundsExperiment {
    fn kind(&self) -> &'static str {
        "verify-bounds"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<Vec<Artifact>> {
        let p: BoundsParams = config.params()?;
        let reg = BoundRegistry::standard();
        let names: Vec<String> =
            if p.checks.is_empty() { reg.names().iter().map(|s| s.to_string()).collect() } else { p.checks.clone() };
        let checks = names
            .iter()
            .map(|n| reg.get(n).ok_or_else(|| invalid(format!("unknown bound check `{n}`; known: {:?}", reg.names()))))
            .collect::<Result<Vec<_>>>()?;
        if p.instances == 0 {
            return Err(invalid("instances must be positive"));
        }
        let reports: Vec<_> = checks.iter().map(|c| c.run_batch(p.instances, config.seed)).collect();
        let all_pass = reports.iter().all(|r| r.pass);
        let v = json!({ "all_pass": all_pass, "reports": reports });
        Ok(vec![Artifact::json("bounds.json", &v)])
    }
}

#[derive(Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case", deny_unknown_fields)]
enum McParams {
    Event {
        event: EventSpec,
        kappa: f64,
        replicas: usize,
        #[serde(default = "default_mc_steps")]
        steps: usize,
    },
    Moment {
        kappas: Vec<f64>,
        ys: Vec<f64>,
        #[serde(default = "default_horizon")]
        t: f64,
        replicas: usize,
        #[serde(default = "default_mc_steps")]
        steps: usize,
    },
    ChiSquare {
        kappas: Vec<f64>,
        m: usize,
        replicas: usize,
    },
    OscillationTail {
        kappa: f64,
        delta: f64,
        rs: Vec<f64>,
        replicas: usize,
        #[serde(default = "default_osc_steps")]
        steps: usize,
        #[serde(default = "default_c0")]
        c0: f64,
    },
    ComplementBound {
        beta: f64,
        kappa: f64,
        n: u32,
        replicas: usize,
    },
}

fn default_osc_steps() -> usize {
    1000
}

struct McExperiment;

impl Experiment for McExperiment {
    fn kind(&self) -> &'static str {
        "mc"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<Vec<Artifact>> {
        let seed = config.seed;
        match config.params::<McParams>()? {
            McParams::Event { event, kappa, replicas, steps } => {
                let r = estimate_event(&event.build(steps, seed)?, kappa, replicas, steps, seed)?;
                Ok(vec![Artifact::new("mc.csv", results_to_csv(&[r]))])
            }
            McParams::Moment { kappas, ys, t, replicas, steps } => {
                let mut csv = String::from("kappa,t,y,N,mean,se,indeterminate,seed\n");
                for kappa in kappas {
                    for m in moment_bound(kappa, t, &ys, replicas, steps, seed)? {
                        let _ = writeln!(
                            csv,
                            "{},{},{},{},{},{},{},{}",
                            fmt_f64(m.kappa),
                            fmt_f64(m.t),
                            fmt_f64(m.y),
                            m.replicas,
                            fmt_f64(m.mean),
                            fmt_f64(m.se),
                            m.indeterminate,
                            seed
                        );
                    }
                }
                Ok(vec![Artifact::new("moment.csv", csv)])
            }
            McParams::ChiSquare { kappas, m, replicas } => {
                if kappas.is_empty() {
                    return Err(invalid("kappa list is empty"));
                }
                let runs = kappas
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| chi_square_energy(k, m, replicas, mix(seed, i as u64)))
                    .collect::<Result<Vec<_>>>()?;
                let mut csv = String::from("kappa,m,N,mean,variance,seed\n");
                for r in &runs {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{}",
                        fmt_f64(r.kappa),
                        r.m,
                        r.replicas,
                        fmt_f64(r.mean),
                        fmt_f64(r.variance),
                        r.seed
                    );
                }
                let ks: Vec<_> = runs
                    .windows(2)
                    .map(|w| {
                        let (d, p) = ks_two_sample(&w[0].samples, &w[1].samples);
                        json!({ "kappa_a": w[0].kappa, "kappa_b": w[1].kappa, "statistic": d, "p_value": p })
                    })
                    .collect();
                Ok(vec![
                    Artifact::new("chi_square.csv", csv),
                    Artifact::json("chi_square_ks.json", &json!({ "m": m, "ks": ks })),
                ])
            }
            McParams::OscillationTail { kappa, delta, rs, replicas, steps, c0 } => {
                let mut csv = String::from("event,kappa,N,hits,p_hat,se,kappa_log_p,seed,indeterminate,c0,bound,pass\n");
                for r in rs {
                    let o = oscillation_tail(kappa, delta, r, replicas, steps, seed, c0)?;
                    let _ =
                        writeln!(csv, "{},{},{},{}", o.result.csv_row(), fmt_f64(o.c0), fmt_f64(o.bound), o.pass);
                }
                Ok(vec![Artifact::new("oscillation_tail.csv", csv)])
            }
            McParams::ComplementBound { beta, kappa, n, replicas } => {
                let c = complement_bound_check(beta, kappa, n, replicas, seed)?;
                let csv = results_to_csv(&[c.violation.clone(), c.corner.clone()]);
                let v = json!({
                    "beta": c.beta,
                    "kappa": kappa,
                    "n": c.n,
                    "bound": c.bound,
                    "bound_p": c.bound_p,
                    "p_hat": c.violation.p_hat,
                    "se": c.violation.se,
                    "corner_p_hat": c.corner.p_hat,
                    "pass": c.pass,
                });
                Ok(vec![Artifact::new("complement.csv", csv), Artifact::json("complement.json", &v)])
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LdpParams {
    event: EventSpec,
    kappas: Vec<f64>,
    replicas: usize,
    #[serde(default = "default_mc_steps")]
    steps: usize,
}

struct LdpSlopeExperiment;

impl Experiment for LdpSlopeExperiment {
    fn kind(&self) -> &'static str {
        "ldp-slope"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<Vec<Artifact>> {
        let p: LdpParams = config.params()?;
        let event = p.event.build(p.steps, config.seed)?;
        let rows = ldp_slope(&event, &p.kappas, p.replicas, p.steps, config.seed)?;
        Ok(vec![Artifact::new("ldp.csv", ldp_to_csv(&rows))])
    }
}

fn default_m() -> usize {
    32
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerKnobs {
    #[serde(default)]
    substeps: Option<usize>,
    #[serde(default)]
    rounds: Option<usize>,
    #[serde(default)]
    max_inner: Option<usize>,
    #[serde(default)]
    perturbations: Option<usize>,
    #[serde(default)]
    feasibility_tol: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Neighborhood {
    target: DriverSpec,
    deltas: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizeParams {
    #[serde(default)]
    constraint: Option<ConstraintSpec>,
    #[serde(default)]
    neighborhood: Option<Neighborhood>,
    #[serde(default = "default_m")]
    m: usize,
    #[serde(default = "default_horizon")]
    horizon: f64,
    /// Treat an infeasible result as a runtime failure.
    #[serde(default)]
    assert_feasible: bool,
    #[serde(default)]
    options: Option<OptimizerKnobs>,
}

struct OptimizeExperiment;

impl Experiment for OptimizeExperiment {
    fn kind(&self) -> &'static str {
        "optimize"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<Vec<Artifact>> {
        let p: OptimizeParams = config.params()?;
        let mut opts = OptOptions { horizon: p.horizon, seed: config.seed, ..Default::default() };
        if let Some(k) = &p.options {
            opts.substeps = k.substeps.unwrap_or(opts.substeps);
            opts.rounds = k.rounds.unwrap_or(opts.rounds);
            opts.max_inner = k.max_inner.unwrap_or(opts.max_inner);
            opts.perturbations = k.perturbations.unwrap_or(opts.perturbations);
            opts.feasibility_tol = k.feasibility_tol.unwrap_or(opts.feasibility_tol);
        }
        match (&p.constraint, &p.neighborhood) {
            (Some(spec), None) => {
                let constraint = spec.build(p.horizon, p.m * opts.substeps, config.seed)?;
                let r = minimize_energy(&constraint, p.m, &opts)?;
                if p.assert_feasible && r.infeasible {
                    return Err(LabError::Infeasible { residual: r.residual });
                }
                Ok(vec![
                    Artifact::json("opt.json", &r.to_json(&constraint, "opt_driver.csv")),
                    Artifact::new("opt_driver.csv", driver_to_csv(&r.driver)),
                ])
            }
            (None, Some(nb)) => {
                let target = nb.target.build(p.horizon, p.m * opts.substeps, config.seed)?;
                let rows = neighborhood_limit(&target, &nb.deltas, p.m, &opts)?;
                if p.assert_feasible {
                    if let Some(r) = rows.iter().find(|r| r.infeasible) {
                        return Err(LabError::Infeasible { residual: r.residual });
                    }
                }
                let mut csv = String::from("delta,energy,residual,iterations,converged,infeasible\n");
                for r in &rows {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{}",
                        fmt_f64(r.delta),
                        fmt_f64(r.energy),
                        fmt_f64(r.residual),
                        r.iterations,
                        r.converged,
                        r.infeasible
                    );
                }
                Ok(vec![Artifact::new("neighborhood.csv", csv)])
            }
            _ => Err(invalid("optimize needs exactly one of `constraint` or `neighborhood`")),
        }
    }
}

fn default_fine_steps() -> usize {
    1024
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvergeParams {
    kappa: f64,
    n_list: Vec<usize>,
    beta: f64,
    zeta: f64,
    replicas: usize,
    #[serde(default = "default_fine_steps")]
    fine_steps: usize,
    #[serde(default = "default_c0")]
    c0: f64,
}

struct ApproxConvergeExperiment;

impl Experiment for ApproxConvergeExperiment {
    fn kind(&self) -> &'static str {
        "approx-converge"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<Vec<Artifact>> {
        let p: ConvergeParams = config.params()?;
        let rows = pwl_convergence(p.kappa, &p.n_list, p.beta, p.zeta, p.replicas, p.fine_steps, config.seed, p.c0)?;
        let mut csv = String::from(CONVERGENCE_HEADER);
        csv.push('\n');
        for r in &rows {
            let _ = writeln!(csv, "{}", r.csv_row());
        }
        Ok(vec![Artifact::new("convergence.csv", csv)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text, Path::new("t.json")).unwrap()
    }

    #[test]
    fn registry_has_every_kind() {
        let r = ExperimentRegistry::standard();
        assert_eq!(
            r.kinds(),
            vec!["approx-converge", "energy", "ldp-slope", "mc", "optimize", "trace", "verify-bounds", "zip"]
        );
    }

    #[test]
    fn trace_zero_driver() {
        let c = cfg(r#"{"kind":"trace","params":{"driver":{"type":"zero"},"steps":100}}"#);
        let a = TraceExperiment.run(&c).unwrap();
        assert_eq!(a.iter().map(|x| x.name.as_str()).collect::<Vec<_>>(), ["driver.csv", "curve.csv", "summary.json"]);
        let last = a[1].contents.lines().last().unwrap();
        assert!(last.starts_with("1,"));
    }

    #[test]
    fn zip_roundtrip_reports_error() {
        let c = cfg(r#"{"kind":"zip","params":{"driver":{"type":"linear","slope":1},"steps":200}}"#);
        let a = ZipExperiment.run(&c).unwrap();
        let s: serde_json::Value = serde_json::from_str(&a.last().unwrap().contents).unwrap();
        assert!(s["roundtrip_error"].as_f64().unwrap() < 5e-2);
    }

    #[test]
    fn energy_of_linear_driver() {
        let c = cfg(r#"{"kind":"energy","params":{"driver":{"type":"linear","slope":1},"steps":10,"nodes":[5]}}"#);
        let a = EnergyExperiment.run(&c).unwrap();
        let v: serde_json::Value = serde_json::from_str(&a[0].contents).unwrap();
        assert!((v["energy"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bad_params_are_validation_errors() {
        let c = cfg(r#"{"kind":"trace","params":{"driver":{"type":"zero"},"nope":1}}"#);
        assert!(matches!(TraceExperiment.run(&c), Err(LabError::Parse { .. })));
        let c = cfg(r#"{"kind":"verify-bounds","params":{"checks":["nope"]}}"#);
        assert!(matches!(VerifyBoundsExperiment.run(&c), Err(LabError::InvalidArgument(_))));
        let c = cfg(r#"{"kind":"optimize","params":{}}"#);
        assert!(OptimizeExperiment.run(&c).is_err());
    }

    #[test]
    fn infeasible_assertion_is_runtime_error() {
        let c = cfg(
            r#"{"kind":"optimize","params":{"m":2,"assert_feasible":true,
                "constraint":{"type":"avoid-disk","center":[0,1.4142135623730951],"radius":3},
                "options":{"rounds":2,"max_inner":5,"perturbations":0}}}"#,
        );
        assert!(matches!(OptimizeExperiment.run(&c), Err(LabError::Infeasible { .. })));
    }
}
