//! Experiment parameter set and its TOML representation.
//!
//! The file has sections `[ions]`, `[laser]`, `[atom]`, `[motion]`,
//! `[detectors]`, `[geometry]` plus the optional `[model]`, `[simulation]`
//! and `[uncertainty]`. Quantities accept unit suffixes (see [`crate::units`]).
//! Everything is SI once loaded.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::units::{Dimension, RawQuantity, DALTON, ELEMENTARY_CHARGE};

pub type Vec3 = [f64; 3];

/// FWHM of a Gaussian divided by its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonCrystalParams {
    pub ion_mass: f64,
    pub ion_charge: f64,
    /// rad/s
    pub axial_trap_frequency: f64,
    /// rad/s
    pub radial_trap_frequencies: [f64; 2],
    /// Explicit separation in m. When absent it is derived from the axial frequency.
    pub separation: Option<f64>,
    pub crystal_axis: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserParams {
    pub wavelength: f64,
    pub propagation_direction: Vec3,
    /// Laser minus atomic frequency, rad/s (negative = red detuned).
    pub detuning: f64,
    pub saturation: Option<f64>,
    /// Single-ion Rabi frequency, rad/s.
    pub rabi_frequency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomParams {
    pub excited_lifetime: f64,
    /// Fraction of excited-state decays that end in the metastable shelf.
    pub branching_to_metastable: f64,
    /// Explicit per-ion probability of sitting in the shelf. Derived from the
    /// repump time by the three-level engine when absent.
    pub metastable_dwell_fraction: Option<f64>,
    /// Mean time to pump the shelf back to the ground state. `None` means no repumper.
    pub repump_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    pub mean_phonon_number: f64,
    pub debye_waller_visibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub efficiency: f64,
    /// Hz per detector
    pub dark_rate: f64,
    /// Per-detector Gaussian timing jitter (standard deviation), s.
    pub timing_jitter_sigma: f64,
    pub dead_time: f64,
    pub bin_width: f64,
    pub correlation_window: f64,
    /// Detected signal rate per detector used for the dark-count offset, Hz.
    pub signal_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryMapping {
    /// Fringe period at the slit plane, m.
    pub fringe_period: f64,
    /// Slit position of the central G1 maximum (δ = 0), m.
    pub fringe_offset: f64,
    pub slit_width: f64,
    pub slit_position: f64,
    /// Observation polar angle (to the crystal axis) at the fringe offset, rad.
    pub polar_angle_reference: f64,
}

/// How the single-ion (shelved partner) episodes are mixed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixWeighting {
    /// Coincidences weighted by rate squared (2R vs R), normalized by the mean intensity.
    Rate,
    /// Time-weighted average of separately normalized episode g² values.
    Episode,
}

/// The τ-resolved curve that the jitter acts on in the contrast model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemporalModel {
    /// Exponential return to 1 with the excited-state lifetime.
    LifetimeEnvelope,
    /// Full quantum-regression curve from the engine.
    Engine,
}

/// How photons from different points of the slit are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlitModel {
    /// Both photons of a pair share the slit phase (δ₁ = δ₂).
    Collinear,
    /// Independent phases for the two photons (full δ₁, δ₂ double integral).
    TwoPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub temporal: TemporalModel,
    pub mix_weighting: MixWeighting,
    pub slit: SlitModel,
    /// Bins on each side of τ = 0 averaged into the predicted g²(0); 0 takes
    /// the smeared curve at τ = 0.
    pub zero_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    /// Probability weight of the detected channel in the unraveling.
    pub collection_weight: f64,
    /// Interval over which the motional and slit phase are held fixed, s.
    pub coherence_time: f64,
    /// Length of one independent trajectory, s.
    pub chunk_duration: f64,
    /// Discarded relaxation time before each trajectory, s.
    pub burn_in: f64,
}

/// 1σ parameter uncertainties propagated into the prediction band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uncertainties {
    pub saturation: f64,
    pub visibility: f64,
    pub fringe_period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub ions: IonCrystalParams,
    pub laser: LaserParams,
    pub atom: AtomParams,
    pub motion: MotionParams,
    pub detectors: DetectorParams,
    pub geometry: GeometryMapping,
    pub model: ModelParams,
    pub simulation: SimulationParams,
    pub uncertainty: Uncertainties,
}

/// Calcium-40 mass in u.
const CA40_MASS_U: f64 = 39.962_590_9;

impl ExperimentConfig {
    /// Reference parameter set of the two-ion ⁴⁰Ca⁺ experiment.
    pub fn reference() -> Self {
        let alpha = (12.0 * 397e-9 / 6.7e-6_f64).acos();
        ExperimentConfig {
            ions: IonCrystalParams {
                ion_mass: CA40_MASS_U * DALTON,
                ion_charge: ELEMENTARY_CHARGE,
                axial_trap_frequency: std::f64::consts::TAU * 760e3,
                radial_trap_frequencies: [
                    std::f64::consts::TAU * 1.275e6,
                    std::f64::consts::TAU * 1.568e6,
                ],
                separation: Some(6.7e-6),
                crystal_axis: [0.0, 0.0, 1.0],
            },
            laser: LaserParams {
                wavelength: 397e-9,
                propagation_direction: [alpha.sin(), 0.0, alpha.cos()],
                detuning: -std::f64::consts::TAU * 30e6,
                saturation: Some(0.46),
                rabi_frequency: None,
            },
            atom: AtomParams {
                excited_lifetime: 6.9e-9,
                branching_to_metastable: 1.0 / 17.0,
                metastable_dwell_fraction: None,
                repump_time: Some(20e-9),
            },
            motion: MotionParams {
                mean_phonon_number: 10.0,
                debye_waller_visibility: 0.5,
            },
            detectors: DetectorParams {
                efficiency: 0.85,
                dark_rate: 10.0,
                timing_jitter_sigma: 1.6e-9 / FWHM_PER_SIGMA,
                dead_time: 25e-9,
                bin_width: 2e-9,
                correlation_window: 600e-9,
                signal_rate: 761.0,
            },
            geometry: GeometryMapping {
                fringe_period: 1.94e-3,
                fringe_offset: 0.0,
                slit_width: 1e-3,
                slit_position: 0.0,
                polar_angle_reference: std::f64::consts::FRAC_PI_2,
            },
            model: ModelParams {
                temporal: TemporalModel::LifetimeEnvelope,
                mix_weighting: MixWeighting::Episode,
                slit: SlitModel::Collinear,
                zero_bins: 0,
            },
            simulation: SimulationParams {
                collection_weight: 1e-3,
                coherence_time: 1e-6,
                chunk_duration: 1e-3,
                burn_in: 2e-6,
            },
            uncertainty: Uncertainties {
                saturation: 0.08,
                visibility: 0.05,
                fringe_period: 0.04e-3,
            },
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::config("<file>", e.to_string()))?;
        let cfg = raw.resolve()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Render as TOML that [`ExperimentConfig::from_toml_str`] reads back exactly.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(&RawConfig::from(self)).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON serialization, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex_digest(&json)
    }

    pub fn validate(&self) -> Result<()> {
        let ions = &self.ions;
        check(ions.ion_mass > 0.0, "ions.mass", "must be positive")?;
        check(ions.ion_charge != 0.0, "ions.charge", "must be nonzero")?;
        check(
            ions.axial_trap_frequency > 0.0,
            "ions.axial_frequency",
            "must be positive",
        )?;
        if let Some(d) = ions.separation {
            check(d > 0.0, "ions.separation", "must be positive")?;
        }
        check(
            is_unit(&ions.crystal_axis),
            "ions.crystal_axis",
            "must be a unit vector",
        )?;
        let laser = &self.laser;
        check(laser.wavelength > 0.0, "laser.wavelength", "must be positive")?;
        check(
            is_unit(&laser.propagation_direction),
            "laser.direction",
            "must be a unit vector",
        )?;
        check(
            laser.saturation.is_some() || laser.rabi_frequency.is_some(),
            "laser.saturation",
            "one of saturation or rabi_frequency is required",
        )?;
        if let Some(s) = laser.saturation {
            check(s >= 0.0, "laser.saturation", "must be >= 0")?;
        }
        let atom = &self.atom;
        check(
            atom.excited_lifetime > 0.0,
            "atom.excited_lifetime",
            "must be positive",
        )?;
        check(
            (0.0..1.0).contains(&atom.branching_to_metastable),
            "atom.branching_to_metastable",
            "must lie in [0, 1)",
        )?;
        if let Some(p) = atom.metastable_dwell_fraction {
            check(
                (0.0..1.0).contains(&p),
                "atom.metastable_dwell_fraction",
                "must lie in [0, 1)",
            )?;
        }
        if let Some(t) = atom.repump_time {
            check(t > 0.0, "atom.repump_time", "must be positive")?;
        }
        check(
            (0.0..=1.0).contains(&self.motion.debye_waller_visibility),
            "motion.debye_waller_visibility",
            "must lie in [0, 1]",
        )?;
        let det = &self.detectors;
        check(
            (0.0..=1.0).contains(&det.efficiency),
            "detectors.efficiency",
            "must lie in [0, 1]",
        )?;
        check(det.dark_rate >= 0.0, "detectors.dark_rate", "must be >= 0")?;
        check(
            det.timing_jitter_sigma >= 0.0,
            "detectors.timing_jitter",
            "must be >= 0",
        )?;
        check(det.dead_time >= 0.0, "detectors.dead_time", "must be >= 0")?;
        check(det.bin_width > 0.0, "detectors.bin_width", "must be positive")?;
        check(
            det.correlation_window >= det.bin_width,
            "detectors.correlation_window",
            "must be at least one bin",
        )?;
        check(det.signal_rate >= 0.0, "detectors.signal_rate", "must be >= 0")?;
        let geo = &self.geometry;
        check(
            geo.fringe_period > 0.0,
            "geometry.fringe_period",
            "must be positive",
        )?;
        check(geo.slit_width >= 0.0, "geometry.slit_width", "must be >= 0")?;
        let sim = &self.simulation;
        check(
            (0.0..=1.0).contains(&sim.collection_weight),
            "simulation.collection_weight",
            "must lie in [0, 1]",
        )?;
        check(
            sim.coherence_time > 0.0,
            "simulation.coherence_time",
            "must be positive",
        )?;
        check(
            sim.chunk_duration > 0.0,
            "simulation.chunk_duration",
            "must be positive",
        )?;
        check(sim.burn_in >= 0.0, "simulation.burn_in", "must be >= 0")?;
        Ok(())
    }

    /// Slit width expressed as a phase interval, 2π·w/L.
    pub fn slit_width_phase(&self) -> f64 {
        std::f64::consts::TAU * self.geometry.slit_width / self.geometry.fringe_period
    }
}

fn check(cond: bool, field: &str, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::config(field, reason))
    }
}

fn is_unit(v: &Vec3) -> bool {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (n - 1.0).abs() < 1e-9
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------------------
// File representation

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    ions: RawIons,
    laser: RawLaser,
    atom: RawAtom,
    motion: RawMotion,
    detectors: RawDetectors,
    geometry: RawGeometry,
    #[serde(default)]
    model: Option<RawModel>,
    #[serde(default)]
    simulation: Option<RawSimulation>,
    #[serde(default)]
    uncertainty: Option<RawUncertainty>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIons {
    mass: RawQuantity,
    charge: RawQuantity,
    axial_frequency: RawQuantity,
    #[serde(default)]
    radial_frequencies: Option<[RawQuantity; 2]>,
    #[serde(default)]
    separation: Option<RawQuantity>,
    #[serde(default)]
    crystal_axis: Option<Vec3>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLaser {
    wavelength: RawQuantity,
    direction: Vec3,
    detuning: RawQuantity,
    #[serde(default)]
    saturation: Option<f64>,
    #[serde(default)]
    rabi_frequency: Option<RawQuantity>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtom {
    excited_lifetime: RawQuantity,
    #[serde(default)]
    branching_to_metastable: Option<f64>,
    #[serde(default)]
    metastable_dwell_fraction: Option<f64>,
    #[serde(default)]
    repump_time: Option<RawQuantity>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMotion {
    #[serde(default)]
    mean_phonon_number: Option<f64>,
    debye_waller_visibility: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetectors {
    efficiency: f64,
    dark_rate: RawQuantity,
    #[serde(default)]
    timing_jitter_sigma: Option<RawQuantity>,
    #[serde(default)]
    timing_jitter_fwhm: Option<RawQuantity>,
    #[serde(default)]
    dead_time: Option<RawQuantity>,
    #[serde(default)]
    bin_width: Option<RawQuantity>,
    #[serde(default)]
    correlation_window: Option<RawQuantity>,
    #[serde(default)]
    signal_rate: Option<RawQuantity>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    fringe_period: RawQuantity,
    #[serde(default)]
    fringe_offset: Option<RawQuantity>,
    slit_width: RawQuantity,
    #[serde(default)]
    slit_position: Option<RawQuantity>,
    #[serde(default)]
    polar_angle_reference: Option<RawQuantity>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default)]
    temporal: Option<TemporalModel>,
    #[serde(default)]
    mix_weighting: Option<MixWeighting>,
    #[serde(default)]
    slit: Option<SlitModel>,
    #[serde(default)]
    zero_bins: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    #[serde(default)]
    collection_weight: Option<f64>,
    #[serde(default)]
    coherence_time: Option<RawQuantity>,
    #[serde(default)]
    chunk_duration: Option<RawQuantity>,
    #[serde(default)]
    burn_in: Option<RawQuantity>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUncertainty {
    #[serde(default)]
    saturation: Option<f64>,
    #[serde(default)]
    visibility: Option<f64>,
    #[serde(default)]
    fringe_period: Option<RawQuantity>,
}

fn q(field: &str, raw: &RawQuantity, dim: Dimension) -> Result<f64> {
    raw.to_si(dim).map_err(|e| Error::config(field, e))
}

fn opt_q(field: &str, raw: &Option<RawQuantity>, dim: Dimension) -> Result<Option<f64>> {
    raw.as_ref().map(|r| q(field, r, dim)).transpose()
}

fn normalized(field: &str, v: Vec3) -> Result<Vec3> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::config(field, "direction must be a nonzero vector"));
    }
    Ok([v[0] / n, v[1] / n, v[2] / n])
}

impl RawConfig {
    fn resolve(self) -> Result<ExperimentConfig> {
        use Dimension::*;
        let d = ExperimentConfig::reference();
        let ions = IonCrystalParams {
            ion_mass: q("ions.mass", &self.ions.mass, Mass)?,
            ion_charge: q("ions.charge", &self.ions.charge, Charge)?,
            axial_trap_frequency: q(
                "ions.axial_frequency",
                &self.ions.axial_frequency,
                AngularFrequency,
            )?,
            radial_trap_frequencies: match &self.ions.radial_frequencies {
                Some([a, b]) => [
                    q("ions.radial_frequencies", a, AngularFrequency)?,
                    q("ions.radial_frequencies", b, AngularFrequency)?,
                ],
                None => d.ions.radial_trap_frequencies,
            },
            separation: opt_q("ions.separation", &self.ions.separation, Length)?,
            crystal_axis: normalized(
                "ions.crystal_axis",
                self.ions.crystal_axis.unwrap_or(d.ions.crystal_axis),
            )?,
        };
        let laser = LaserParams {
            wavelength: q("laser.wavelength", &self.laser.wavelength, Length)?,
            propagation_direction: normalized("laser.direction", self.laser.direction)?,
            detuning: q("laser.detuning", &self.laser.detuning, AngularFrequency)?,
            saturation: self.laser.saturation,
            rabi_frequency: opt_q(
                "laser.rabi_frequency",
                &self.laser.rabi_frequency,
                AngularFrequency,
            )?,
        };
        let atom = AtomParams {
            excited_lifetime: q("atom.excited_lifetime", &self.atom.excited_lifetime, Time)?,
            branching_to_metastable: self.atom.branching_to_metastable.unwrap_or(0.0),
            metastable_dwell_fraction: self.atom.metastable_dwell_fraction,
            repump_time: opt_q("atom.repump_time", &self.atom.repump_time, Time)?,
        };
        let motion = MotionParams {
            mean_phonon_number: self.motion.mean_phonon_number.unwrap_or(0.0),
            debye_waller_visibility: self.motion.debye_waller_visibility,
        };
        let rd = &self.detectors;
        let sigma = match (&rd.timing_jitter_sigma, &rd.timing_jitter_fwhm) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "detectors.timing_jitter_sigma",
                    "give either timing_jitter_sigma or timing_jitter_fwhm, not both",
                ))
            }
            (Some(s), None) => q("detectors.timing_jitter_sigma", s, Time)?,
            (None, Some(f)) => q("detectors.timing_jitter_fwhm", f, Time)? / FWHM_PER_SIGMA,
            (None, None) => 0.0,
        };
        let detectors = DetectorParams {
            efficiency: rd.efficiency,
            dark_rate: q("detectors.dark_rate", &rd.dark_rate, Rate)?,
            timing_jitter_sigma: sigma,
            dead_time: opt_q("detectors.dead_time", &rd.dead_time, Time)?.unwrap_or(0.0),
            bin_width: opt_q("detectors.bin_width", &rd.bin_width, Time)?
                .unwrap_or(d.detectors.bin_width),
            correlation_window: opt_q("detectors.correlation_window", &rd.correlation_window, Time)?
                .unwrap_or(d.detectors.correlation_window),
            signal_rate: opt_q("detectors.signal_rate", &rd.signal_rate, Rate)?
                .unwrap_or(d.detectors.signal_rate),
        };
        let rg = &self.geometry;
        let geometry = GeometryMapping {
            fringe_period: q("geometry.fringe_period", &rg.fringe_period, Length)?,
            fringe_offset: opt_q("geometry.fringe_offset", &rg.fringe_offset, Length)?
                .unwrap_or(0.0),
            slit_width: q("geometry.slit_width", &rg.slit_width, Length)?,
            slit_position: opt_q("geometry.slit_position", &rg.slit_position, Length)?
                .unwrap_or(0.0),
            polar_angle_reference: opt_q(
                "geometry.polar_angle_reference",
                &rg.polar_angle_reference,
                Angle,
            )?
            .unwrap_or(d.geometry.polar_angle_reference),
        };
        let model = match self.model {
            Some(m) => ModelParams {
                temporal: m.temporal.unwrap_or(d.model.temporal),
                mix_weighting: m.mix_weighting.unwrap_or(d.model.mix_weighting),
                slit: m.slit.unwrap_or(d.model.slit),
                zero_bins: m.zero_bins.unwrap_or(d.model.zero_bins),
            },
            None => d.model.clone(),
        };
        let simulation = match self.simulation {
            Some(s) => SimulationParams {
                collection_weight: s
                    .collection_weight
                    .unwrap_or(d.simulation.collection_weight),
                coherence_time: opt_q("simulation.coherence_time", &s.coherence_time, Time)?
                    .unwrap_or(d.simulation.coherence_time),
                chunk_duration: opt_q("simulation.chunk_duration", &s.chunk_duration, Time)?
                    .unwrap_or(d.simulation.chunk_duration),
                burn_in: opt_q("simulation.burn_in", &s.burn_in, Time)?
                    .unwrap_or(d.simulation.burn_in),
            },
            None => d.simulation.clone(),
        };
        let uncertainty = match self.uncertainty {
            Some(u) => Uncertainties {
                saturation: u.saturation.unwrap_or(0.0),
                visibility: u.visibility.unwrap_or(0.0),
                fringe_period: opt_q("uncertainty.fringe_period", &u.fringe_period, Length)?
                    .unwrap_or(0.0),
            },
            None => Uncertainties {
                saturation: 0.0,
                visibility: 0.0,
                fringe_period: 0.0,
            },
        };
        Ok(ExperimentConfig {
            ions,
            laser,
            atom,
            motion,
            detectors,
            geometry,
            model,
            simulation,
            uncertainty,
        })
    }
}

impl From<&ExperimentConfig> for RawConfig {
    fn from(c: &ExperimentConfig) -> Self {
        let n = |v: f64| RawQuantity::Number(v);
        RawConfig {
            ions: RawIons {
                mass: n(c.ions.ion_mass),
                charge: n(c.ions.ion_charge),
                axial_frequency: RawQuantity::Text(format!(
                    "{:e} rad/s",
                    c.ions.axial_trap_frequency
                )),
                radial_frequencies: Some([
                    RawQuantity::Text(format!("{:e} rad/s", c.ions.radial_trap_frequencies[0])),
                    RawQuantity::Text(format!("{:e} rad/s", c.ions.radial_trap_frequencies[1])),
                ]),
                separation: c.ions.separation.map(n),
                crystal_axis: Some(c.ions.crystal_axis),
            },
            laser: RawLaser {
                wavelength: n(c.laser.wavelength),
                direction: c.laser.propagation_direction,
                detuning: RawQuantity::Text(format!("{:e} rad/s", c.laser.detuning)),
                saturation: c.laser.saturation,
                rabi_frequency: c
                    .laser
                    .rabi_frequency
                    .map(|w| RawQuantity::Text(format!("{w:e} rad/s"))),
            },
            atom: RawAtom {
                excited_lifetime: n(c.atom.excited_lifetime),
                branching_to_metastable: Some(c.atom.branching_to_metastable),
                metastable_dwell_fraction: c.atom.metastable_dwell_fraction,
                repump_time: c.atom.repump_time.map(n),
            },
            motion: RawMotion {
                mean_phonon_number: Some(c.motion.mean_phonon_number),
                debye_waller_visibility: c.motion.debye_waller_visibility,
            },
            detectors: RawDetectors {
                efficiency: c.detectors.efficiency,
                dark_rate: n(c.detectors.dark_rate),
                timing_jitter_sigma: Some(n(c.detectors.timing_jitter_sigma)),
                timing_jitter_fwhm: None,
                dead_time: Some(n(c.detectors.dead_time)),
                bin_width: Some(n(c.detectors.bin_width)),
                correlation_window: Some(n(c.detectors.correlation_window)),
                signal_rate: Some(n(c.detectors.signal_rate)),
            },
            geometry: RawGeometry {
                fringe_period: n(c.geometry.fringe_period),
                fringe_offset: Some(n(c.geometry.fringe_offset)),
                slit_width: n(c.geometry.slit_width),
                slit_position: Some(n(c.geometry.slit_position)),
                polar_angle_reference: Some(n(c.geometry.polar_angle_reference)),
            },
            model: Some(RawModel {
                temporal: Some(c.model.temporal),
                mix_weighting: Some(c.model.mix_weighting),
                slit: Some(c.model.slit),
                zero_bins: Some(c.model.zero_bins),
            }),
            simulation: Some(RawSimulation {
                collection_weight: Some(c.simulation.collection_weight),
                coherence_time: Some(n(c.simulation.coherence_time)),
                chunk_duration: Some(n(c.simulation.chunk_duration)),
                burn_in: Some(n(c.simulation.burn_in)),
            }),
            uncertainty: Some(RawUncertainty {
                saturation: Some(c.uncertainty.saturation),
                visibility: Some(c.uncertainty.visibility),
                fringe_period: Some(n(c.uncertainty.fringe_period)),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE_TOML: &str = include_str!("../../../configs/reference.toml");

    #[test]
    fn reference_file_matches_builtin() {
        let cfg = ExperimentConfig::from_toml_str(REFERENCE_TOML).unwrap();
        let builtin = ExperimentConfig::reference();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs().max(1e-30);
        assert!(close(cfg.ions.ion_mass, builtin.ions.ion_mass));
        assert!(close(cfg.laser.detuning, builtin.laser.detuning));
        assert!(close(
            cfg.detectors.timing_jitter_sigma,
            builtin.detectors.timing_jitter_sigma
        ));
        assert!(close(cfg.geometry.fringe_period, 1.94e-3));
        for i in 0..3 {
            assert!(
                (cfg.laser.propagation_direction[i] - builtin.laser.propagation_direction[i])
                    .abs()
                    < 1e-4
            );
        }
        assert_eq!(cfg.model, builtin.model);
    }

    #[test]
    fn toml_round_trip_is_exact() {
        let cfg = ExperimentConfig::reference();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn field_level_diagnostics() {
        let bad = REFERENCE_TOML.replace("efficiency = 0.85", "efficiency = 1.5");
        match ExperimentConfig::from_toml_str(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "detectors.efficiency"),
            other => panic!("expected config error, got {other:?}"),
        }
        let bad = REFERENCE_TOML.replace("\"397 nm\"", "\"397 ns\"");
        match ExperimentConfig::from_toml_str(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "laser.wavelength"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn missing_drive_is_rejected() {
        let bad = REFERENCE_TOML.replace("saturation = 0.46", "");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }
}
