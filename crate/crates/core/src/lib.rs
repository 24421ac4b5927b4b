//! Numerical Loewner evolution in the upper half-plane.
//!
//! The crate simulates chordal SLE_κ through vertical-slit map composition,
//! inverts curves back to drivers with a zipper, checks deterministic
//! distortion and energy inequalities, estimates event probabilities by
//! seeded Monte Carlo, and minimizes Dirichlet energy under curve constraints
//! to compare against large-deviation slopes.

pub mod bounds;
pub mod cli;
pub mod complex;
pub mod drivers;
pub mod error;
pub mod fmt;
pub mod forward;
pub mod io;
pub mod montecarlo;
pub mod optimizer;
pub mod seed;
pub mod zipper;

pub use error::{LabError, Result};
