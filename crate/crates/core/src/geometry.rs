//! Trap, laser and detector geometry reduced to the optical phase δ.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, GeometryMapping, IonCrystalParams, LaserParams, Vec3};
use crate::error::{Error, Result};
use crate::units::EPSILON_0;

/// Relative mismatch between explicit and derived separation that triggers a warning.
const SEPARATION_WARN: f64 = 0.02;

/// A detector placement reduced to its optical phase and a collection weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionDirection {
    pub phase: f64,
    pub weight: f64,
}

impl DetectionDirection {
    pub fn new(phase: f64, weight: f64) -> Result<Self> {
        if !(weight >= 0.0) {
            return Err(Error::domain("weight", "must be >= 0"));
        }
        Ok(Self { phase, weight })
    }
}

/// Optical phase, unwrapped and wrapped to (−π, π].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalPhase {
    pub unwrapped: f64,
    pub wrapped: f64,
}

/// Equilibrium distance of two identical ions in a harmonic axial well,
/// d³ = q² / (2π ε₀ m ω_z²).
pub fn ion_separation(crystal: &IonCrystalParams) -> Result<f64> {
    if !(crystal.ion_mass > 0.0) {
        return Err(Error::domain("ion_mass", "must be positive"));
    }
    if crystal.ion_charge == 0.0 || !crystal.ion_charge.is_finite() {
        return Err(Error::domain("ion_charge", "must be nonzero"));
    }
    if !(crystal.axial_trap_frequency > 0.0) {
        return Err(Error::domain("axial_trap_frequency", "must be positive"));
    }
    let q2 = crystal.ion_charge * crystal.ion_charge;
    let w2 = crystal.axial_trap_frequency * crystal.axial_trap_frequency;
    Ok((q2 / (TAU * EPSILON_0 * crystal.ion_mass * w2)).cbrt())
}

/// Separation actually used: the explicit value if given, otherwise the
/// equilibrium formula.
pub fn resolved_separation(crystal: &IonCrystalParams) -> Result<f64> {
    let derived = ion_separation(crystal)?;
    match crystal.separation {
        Some(explicit) => {
            let mismatch = (explicit - derived).abs() / derived;
            if mismatch > SEPARATION_WARN {
                log::warn!(
                    "explicit separation {:.4} um differs from equilibrium value {:.4} um by {:.1} %",
                    explicit * 1e6,
                    derived * 1e6,
                    mismatch * 100.0
                );
            }
            Ok(explicit)
        }
        None => Ok(derived),
    }
}

pub fn wrap_phase(phase: f64) -> f64 {
    let mut w = phase.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn require_unit(name: &'static str, v: &Vec3) -> Result<()> {
    let n = dot(v, v).sqrt();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::domain(name, format!("not normalized (|v| = {n})")));
    }
    Ok(())
}

/// δ = (k_L − k r̂)·d for a detector in direction `detector_direction`.
///
/// The emitted wavenumber is taken equal to the laser wavenumber.
pub fn optical_phase(
    laser: &LaserParams,
    crystal: &IonCrystalParams,
    detector_direction: &Vec3,
) -> Result<OpticalPhase> {
    require_unit("detector_direction", detector_direction)?;
    require_unit("propagation_direction", &laser.propagation_direction)?;
    require_unit("crystal_axis", &crystal.crystal_axis)?;
    if !(laser.wavelength > 0.0) {
        return Err(Error::domain("wavelength", "must be positive"));
    }
    let d = resolved_separation(crystal)?;
    let k = TAU / laser.wavelength;
    let laser_term = k * d * dot(&laser.propagation_direction, &crystal.crystal_axis);
    let detector_term = k * d * dot(detector_direction, &crystal.crystal_axis);
    let unwrapped = laser_term - detector_term;
    Ok(OpticalPhase {
        unwrapped,
        wrapped: wrap_phase(unwrapped),
    })
}

/// Unit vector at polar angle `theta` from the crystal axis, in the plane
/// spanned by the axis and the laser.
pub fn direction_at_polar_angle(laser: &LaserParams, crystal: &IonCrystalParams, theta: f64) -> Vec3 {
    let a = crystal.crystal_axis;
    let l = laser.propagation_direction;
    let along = dot(&l, &a);
    let mut perp = [l[0] - along * a[0], l[1] - along * a[1], l[2] - along * a[2]];
    let mut n = dot(&perp, &perp).sqrt();
    if n < 1e-12 {
        // laser along the axis: any perpendicular will do
        let trial = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let t = dot(&trial, &a);
        perp = [trial[0] - t * a[0], trial[1] - t * a[1], trial[2] - t * a[2]];
        n = dot(&perp, &perp).sqrt();
    }
    let (s, c) = theta.sin_cos();
    [
        c * a[0] + s * perp[0] / n,
        c * a[1] + s * perp[1] / n,
        c * a[2] + s * perp[2] / n,
    ]
}

/// δ = 2π (x − x₀) / L.
pub fn slit_to_phase(mapping: &GeometryMapping, slit_position: f64) -> f64 {
    TAU * (slit_position - mapping.fringe_offset) / mapping.fringe_period
}

/// Inverse of [`slit_to_phase`].
pub fn phase_to_slit(mapping: &GeometryMapping, phase: f64) -> f64 {
    mapping.fringe_offset + phase * mapping.fringe_period / TAU
}

/// Absolute (unwrapped) phase seen through the slit at `slit_position` when
/// the ions sit `separation` apart.
///
/// The fringe order at the fringe offset comes from the configured laser and
/// observation angle; at fixed direction δ scales linearly with the separation.
pub fn phase_at_slit(config: &ExperimentConfig, slit_position: f64, separation: f64) -> Result<f64> {
    if !(separation > 0.0) {
        return Err(Error::domain("separation", "must be positive"));
    }
    let reference = resolved_separation(&config.ions)?;
    let dir = direction_at_polar_angle(
        &config.laser,
        &config.ions,
        config.geometry.polar_angle_reference,
    );
    let order = (optical_phase(&config.laser, &config.ions, &dir)?.unwrapped / TAU).round();
    let at_reference = TAU * order + slit_to_phase(&config.geometry, slit_position);
    Ok(at_reference * separation / reference)
}

/// Separation after retuning the axial trap frequency to `axial` (rad/s).
///
/// The configured separation is scaled by the ω^(−2/3) law, so an explicit
/// reference value stays authoritative.
pub fn separation_at_axial_frequency(config: &ExperimentConfig, axial: f64) -> Result<f64> {
    let mut tuned = config.ions.clone();
    tuned.axial_trap_frequency = axial;
    let ratio = ion_separation(&tuned)? / ion_separation(&config.ions)?;
    Ok(resolved_separation(&config.ions)? * ratio)
}
