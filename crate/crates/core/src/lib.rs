//! Direction-dependent photon statistics of a laser-driven two-ion crystal.
//!
//! The crate is organised along the measurement chain:
//!
//! * [`config`] and [`geometry`]: parameters and the map from trap, laser and
//!   slit settings to the optical phase δ.
//! * [`engine`]: master-equation engine for one or two two- or three-level
//!   emitters (steady state, quantum-regression correlations, heralding).
//! * [`contrast`]: the experimental contrast budget layered on the ideal
//!   prediction.
//! * [`stream`]: quantum-jump simulation of detector click streams.
//! * [`correlator`]: streaming g²(τ) estimation and G¹ fringe fitting.
//! * [`cli`]: the `ihbt` command-line surface.

pub mod cli;
pub mod config;
pub mod contrast;
pub mod correlator;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod manifest;
pub mod stream;
pub mod units;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
