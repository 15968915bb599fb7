//! Simulation library for three driven atoms coupled to a phase-structured
//! cavity mode with an exchange interaction: dressed-state resonance
//! analysis, steady-state photon statistics, delayed correlations, parameter
//! sweeps, and a command-line front end.
//!
//! All frequencies and rates are expressed in units of the cavity linewidth;
//! time is in units of its inverse.

pub mod cli;
pub mod correlations;
pub mod error;
pub mod hilbert;
pub mod lindblad;
pub mod model;
pub mod sparse;
pub mod spectrum;
pub mod sweep;

pub use error::{Error, Result};
