//! Master-equation engine for one or two driven emitters.
//!
//! Basis ordering is ion 1 ⊗ ion 2 with per-ion levels g, e (, d). Rates are
//! rad/s externally; the Liouvillian is kept in units of the total decay rate.

mod correlation;
mod density;
mod liouvillian;
mod system;

pub use correlation::{g2_zero_analytic, heralded_state, sinc, CoincidenceHarmonics, Engine, PhaseSpread};
pub use density::{DensityMatrix, DensitySummary};
pub use liouvillian::{unvec, vectorize, CVector, Liouvillian};
pub use system::{
    build_three_level_system, build_two_level_system, decay_rate, saturation_conversions,
    ChannelKind, CMatrix, CollapseChannel, DetectionOperator, QuantumSystem, C64,
};

use crate::config::ExperimentConfig;
use crate::error::Result;

/// Steady state of a system (convenience wrapper).
pub fn steady_state(system: &QuantumSystem) -> Result<DensityMatrix> {
    Liouvillian::new(system).steady_state()
}

/// Normalised g²(τ) for a given steady state.
pub fn g2_tau(
    system: &QuantumSystem,
    rho: &DensityMatrix,
    d1: &DetectionOperator,
    d2: &DetectionOperator,
    taus: &[f64],
) -> Result<Vec<f64>> {
    let l = Liouvillian::new(system);
    let norm = |d: &DetectionOperator| rho.expect(&(d.matrix().adjoint() * d.matrix())).re;
    let (i1, i2) = (norm(d1), norm(d2));
    if i1 < 1e-12 || i2 < 1e-12 {
        return Err(crate::error::Error::DarkDirection { rate: i1.min(i2) });
    }
    let g = correlation::coincidence_curve(&l, rho, d1, d2, taus)?;
    Ok(g.into_iter().map(|x| x / (i1 * i2)).collect())
}

/// Repump rate from the configured repump time (or dwell fraction).
pub fn repump_rate(config: &ExperimentConfig) -> f64 {
    let atom = &config.atom;
    if let Some(t) = atom.repump_time {
        return 1.0 / t;
    }
    let gamma = decay_rate(atom);
    let s = config.laser.saturation.unwrap_or(0.0);
    let rho_ee = s / 2.0 / (1.0 + s);
    match atom.metastable_dwell_fraction {
        // p = shelving flux / repump rate, solve for the rate
        Some(p) if p > 0.0 => atom.branching_to_metastable * gamma * rho_ee / p,
        _ => 1e3 * gamma,
    }
}

/// Two-ion system as configured: three-level when branching is non-zero.
pub fn build_from_config(config: &ExperimentConfig, ion_count: usize) -> Result<QuantumSystem> {
    if config.atom.branching_to_metastable > 0.0 {
        build_three_level_system(&config.laser, &config.atom, repump_rate(config), ion_count)
    } else {
        build_two_level_system(&config.laser, &config.atom, ion_count)
    }
}
