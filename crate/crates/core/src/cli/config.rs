//! Experiment configuration documents.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::complex::Complex64;
use crate::drivers::{linear_driver, make_driver, sample_brownian_driver, sine_driver, sqrt_driver, zero_driver, Driver};
use crate::error::{LabError, Result};
use crate::forward::trace;
use crate::io::read_driver;
use crate::montecarlo::{DerivativeForm, DerivativeScale, Event};
use crate::optimizer::Constraint;

/// One experiment: `{kind, seed, out?, params}`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "empty_params")]
    pub params: serde_json::Value,
}

fn empty_params() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Parse { path: origin.to_path_buf(), message: e.to_string() })
    }

    /// Decode `params` into the typed parameters of an experiment kind.
    pub fn params<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.params.clone()).map_err(|e| LabError::Parse {
            path: PathBuf::from(format!("<{} params>", self.kind)),
            message: e.to_string(),
        })
    }
}

/// Driver families addressable from a config. `steps` and `horizon` come
/// from the surrounding parameters except for `values` and `csv`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriverSpec {
    Zero {},
    Linear { slope: f64 },
    Sqrt { c: f64 },
    Sine { amplitude: f64, frequency: f64 },
    /// Samples on a uniform grid over `[0, horizon]`, starting at 0.
    Values { values: Vec<f64> },
    Csv { path: PathBuf },
    /// `√κ B` drawn from the experiment seed.
    Brownian { kappa: f64 },
}

impl DriverSpec {
    pub fn build(&self, horizon: f64, steps: usize, seed: u64) -> Result<Driver> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(LabError::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        let needs_steps = !matches!(self, DriverSpec::Values { .. } | DriverSpec::Csv { .. });
        if needs_steps && steps == 0 {
            return Err(LabError::InvalidArgument("steps must be positive".into()));
        }
        let finite = |x: f64, name: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(LabError::InvalidArgument(format!("{name} must be finite")))
            }
        };
        match self {
            DriverSpec::Zero {} => Ok(zero_driver(horizon, steps)),
            DriverSpec::Linear { slope } => {
                finite(*slope, "slope")?;
                Ok(linear_driver(*slope, horizon, steps))
            }
            DriverSpec::Sqrt { c } => {
                finite(*c, "c")?;
                Ok(sqrt_driver(*c, horizon, steps))
            }
            DriverSpec::Sine { amplitude, frequency } => {
                finite(*amplitude, "amplitude")?;
                finite(*frequency, "frequency")?;
                Ok(sine_driver(*amplitude, *frequency, horizon, steps))
            }
            DriverSpec::Values { values } => make_driver(values.clone(), horizon),
            DriverSpec::Csv { path } => read_driver(path),
            DriverSpec::Brownian { kappa } => sample_brownian_driver(*kappa, horizon, steps, seed),
        }
    }
}

/// Events addressable from a config; targets are traced on the run grid.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EventSpec {
    Tube {
        target: DriverSpec,
        delta: f64,
        #[serde(default)]
        complement: bool,
    },
    DriverSup {
        level: f64,
    },
    Oscillation {
        delta: f64,
        r: f64,
    },
    Derivative {
        beta: f64,
        n: u32,
        scale: DerivativeScale,
        form: DerivativeForm,
        #[serde(default = "default_t_points")]
        t_points: usize,
        #[serde(default = "default_octaves")]
        octaves: u32,
    },
}

fn default_t_points() -> usize {
    33
}

fn default_octaves() -> u32 {
    2
}

impl EventSpec {
    pub fn build(&self, steps: usize, seed: u64) -> Result<Event> {
        Ok(match self {
            EventSpec::Tube { target, delta, complement } => Event::Tube {
                target: trace(&target.build(1.0, steps, seed)?.resample(steps)?)?,
                delta: *delta,
                complement: *complement,
            },
            EventSpec::DriverSup { level } => Event::DriverSup { level: *level },
            EventSpec::Oscillation { delta, r } => Event::Oscillation { delta: *delta, r: *r },
            EventSpec::Derivative { beta, n, scale, form, t_points, octaves } => Event::Derivative {
                beta: *beta,
                n: *n,
                scale: *scale,
                form: *form,
                t_points: *t_points,
                octaves: *octaves,
            },
        })
    }
}

/// Optimizer constraints; a missing or null tube radius means `δ = ∞`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConstraintSpec {
    Tube {
        target: DriverSpec,
        #[serde(default)]
        delta: Option<f64>,
    },
    Endpoint {
        target: [f64; 2],
        tol: f64,
    },
    AvoidDisk {
        center: [f64; 2],
        radius: f64,
    },
}

impl ConstraintSpec {
    pub fn build(&self, horizon: f64, steps: usize, seed: u64) -> Result<Constraint> {
        Ok(match self {
            ConstraintSpec::Tube { target, delta } => Constraint::Tube {
                target: trace(&target.build(horizon, steps, seed)?.resample(steps)?)?,
                delta: delta.unwrap_or(f64::INFINITY),
            },
            ConstraintSpec::Endpoint { target, tol } => {
                Constraint::Endpoint { target: Complex64::new(target[0], target[1]), tol: *tol }
            }
            ConstraintSpec::AvoidDisk { center, radius } => {
                Constraint::AvoidDisk { center: Complex64::new(center[0], center[1]), radius: *radius }
            }
        })
    }
}
