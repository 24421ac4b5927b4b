//! Command-line front end.
//!
//! `loewner-lab <kind> --config cfg.json [--out DIR] [--seed N] [--threads N]`
//! runs one experiment. Payload files are written only after the experiment
//! finishes, together with `manifest.json`, which lists every file, the
//! config hash, seed and crate version, and is the only file carrying a
//! timestamp.
//!
//! Exit status: 0 on success, 1 on invalid input, 2 on runtime failure. Errors
//! are reported on stderr as one JSON object.

pub mod config;
pub mod experiments;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

pub use config::{ConstraintSpec, DriverSpec, EventSpec, ExperimentConfig};
pub use experiments::{Artifact, Experiment, ExperimentRegistry};

use crate::error::LabError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Output directory used when neither `--out`, the config, nor
/// `LOEWNER_LAB_OUT` names one.
pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Parser)]
#[command(name = "loewner-lab", version, about = "Numerical Loewner evolution experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace the curve of a driver
    Trace(RunArgs),
    /// Recover a driver from a curve
    Zip(RunArgs),
    /// Dirichlet energy and related driver statistics
    Energy(RunArgs),
    /// Run the deterministic inequality checks
    VerifyBounds(RunArgs),
    /// Monte Carlo estimates
    Mc(RunArgs),
    /// Event probabilities over a decreasing list of κ
    LdpSlope(RunArgs),
    /// Constrained energy minimization
    Optimize(RunArgs),
    /// Piecewise-linear approximation convergence
    ApproxConverge(RunArgs),
}

impl Command {
    pub fn kind(&self) -> &'static str {
        match self {
            Command::Trace(_) => "trace",
            Command::Zip(_) => "zip",
            Command::Energy(_) => "energy",
            Command::VerifyBounds(_) => "verify-bounds",
            Command::Mc(_) => "mc",
            Command::LdpSlope(_) => "ldp-slope",
            Command::Optimize(_) => "optimize",
            Command::ApproxConverge(_) => "approx-converge",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Trace(a)
            | Command::Zip(a)
            | Command::Energy(a)
            | Command::VerifyBounds(a)
            | Command::Mc(a)
            | Command::LdpSlope(a)
            | Command::Optimize(a)
            | Command::ApproxConverge(a) => a,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config (JSON)
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed, overriding the config
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub threads: Option<usize>,
}

/// A failure with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    fn to_json(&self) -> String {
        json!({ "error": self.kind, "message": self.message, "exit_code": self.code }).to_string()
    }
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        let (code, kind) = match &e {
            LabError::Parse { .. } => (EXIT_INVALID, "parse"),
            LabError::InvalidArgument(_) => (EXIT_INVALID, "invalid-argument"),
            LabError::InvalidDriver(_) => (EXIT_INVALID, "invalid-driver"),
            LabError::GridMismatch(_) => (EXIT_INVALID, "grid-mismatch"),
            LabError::OffGrid { .. } => (EXIT_INVALID, "off-grid"),
            LabError::OutsideHalfPlane { .. } => (EXIT_INVALID, "outside-half-plane"),
            LabError::Singularity { .. } => (EXIT_RUNTIME, "singularity"),
            LabError::ZipperFailure { .. } => (EXIT_RUNTIME, "zipper-failure"),
            LabError::MollifyFailed { .. } => (EXIT_RUNTIME, "mollify-failed"),
            LabError::SingularityBudget { .. } => (EXIT_RUNTIME, "singularity-budget"),
            LabError::Infeasible { .. } => (EXIT_RUNTIME, "infeasible"),
            LabError::Io { .. } => (EXIT_RUNTIME, "io"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

/// Files written by a successful run.
#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Load, validate and run one experiment, then write its artifacts.
pub fn run(kind: &str, args: &RunArgs) -> Result<RunOutcome, Failure> {
    let raw = std::fs::read(&args.config).map_err(|e| Failure {
        code: EXIT_INVALID,
        kind: "config",
        message: format!("cannot read {}: {e}", args.config.display()),
    })?;
    let text = String::from_utf8(raw.clone()).map_err(|_| Failure {
        code: EXIT_INVALID,
        kind: "config",
        message: format!("{} is not UTF-8", args.config.display()),
    })?;
    let mut config = ExperimentConfig::parse(&text, &args.config)?;
    if config.kind != kind {
        return Err(Failure {
            code: EXIT_INVALID,
            kind: "config",
            message: format!("config kind `{}` does not match subcommand `{kind}`", config.kind),
        });
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.threads == Some(0) {
        return Err(Failure { code: EXIT_INVALID, kind: "config", message: "--threads must be positive".into() });
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.out.clone())
        .or_else(|| std::env::var_os("LOEWNER_LAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

    let registry = ExperimentRegistry::standard();
    let experiment = registry.get(kind).ok_or_else(|| Failure {
        code: EXIT_INVALID,
        kind: "config",
        message: format!("unknown experiment kind `{kind}`"),
    })?;
    let artifacts = match args.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Failure {
                code: EXIT_RUNTIME,
                kind: "threads",
                message: e.to_string(),
            })?;
            pool.install(|| experiment.run(&config))
        }
        None => experiment.run(&config),
    }?;
    write_outputs(&out_dir, &config, &raw, &artifacts)?;
    let mut files: Vec<String> = artifacts.into_iter().map(|a| a.name).collect();
    files.push("manifest.json".into());
    Ok(RunOutcome { out_dir, files })
}

fn write_outputs(dir: &Path, config: &ExperimentConfig, raw: &[u8], artifacts: &[Artifact]) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.contents).map_err(|e| LabError::io(&path, e))?;
    }
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = json!({
        "kind": config.kind,
        "config_sha256": sha256_hex(raw),
        "seed": config.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "files": artifacts.iter().map(|a| json!({ "name": a.name, "sha256": sha256_hex(a.contents.as_bytes()) })).collect::<Vec<_>>(),
        "created_unix": created,
    });
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| LabError::io(&path, e))?;
    Ok(())
}

/// Parse `args`, run, and return the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let f = Failure { code: EXIT_INVALID, kind: "usage", message: e.to_string() };
            eprintln!("{}", f.to_json());
            return f.code;
        }
    };
    match run(cli.command.kind(), cli.command.args()) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", outcome.out_dir.join(f).display());
            }
            EXIT_OK
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            f.code
        }
    }
}
