//! Experimental contrast budget: the ideal two-ion g²(0) degraded by motion,
//! finite slit width, shelving episodes, timing jitter and dark counts.

mod quadrature;

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::{AtomParams, ExperimentConfig, LaserParams, MixWeighting, SlitModel, TemporalModel};
use crate::engine::{build_two_level_system, sinc, CoincidenceHarmonics, Engine, PhaseSpread};
use crate::error::{Error, Result};
use crate::geometry::slit_to_phase;

pub use quadrature::{gauss_hermite, gauss_legendre};

/// Weak-coupling g²(0) with a reduced interference visibility:
/// (1+s)² / (1+s+v cos δ)².
pub fn g2_visibility(saturation: f64, delta: f64, visibility: f64) -> Result<f64> {
    if !(saturation >= 0.0) {
        return Err(Error::domain("saturation", "must be >= 0"));
    }
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::domain("visibility", "must lie in [0, 1]"));
    }
    let den = 1.0 + saturation + visibility * delta.cos();
    if den.abs() < 1e-12 {
        return Err(Error::Divergent(format!(
            "g2(0) diverges at s = {saturation}, v = {visibility}, delta = {delta}"
        )));
    }
    Ok((1.0 + saturation).powi(2) / (den * den))
}

/// Uncorrelated background added to both detectors.
pub fn dark_count_mix(g: f64, signal_rate: f64, dark_rate: f64) -> Result<f64> {
    if !(signal_rate > 0.0) {
        return Err(Error::domain("signal_rate", "must be positive"));
    }
    if !(dark_rate >= 0.0) {
        return Err(Error::domain("dark_rate", "must be >= 0"));
    }
    let total = signal_rate + dark_rate;
    Ok((g * signal_rate * signal_rate + 2.0 * signal_rate * dark_rate + dark_rate * dark_rate) / (total * total))
}

/// Mix of two-ion and one-ion emission, `fraction` being the share of
/// bright time with one ion shelved.
pub fn branching_mix(g_two: f64, g_one: f64, fraction: f64, weighting: MixWeighting) -> Result<f64> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::domain("fraction", "must lie in [0, 1]"));
    }
    let f = fraction;
    Ok(match weighting {
        MixWeighting::Rate => (4.0 * (1.0 - f) * g_two + f * g_one) / ((2.0 - f) * (2.0 - f)),
        MixWeighting::Episode => (1.0 - f) * g_two + f * g_one,
    })
}

/// Probability that a given ion is shelved at a random time.
pub fn shelved_probability(config: &ExperimentConfig) -> f64 {
    let atom = &config.atom;
    if let Some(p) = atom.metastable_dwell_fraction {
        return p;
    }
    let Some(t) = atom.repump_time else { return 0.0 };
    let s = config.laser.saturation.unwrap_or(0.0);
    let rho_ee = s / 2.0 / (1.0 + s);
    let x = atom.branching_to_metastable * rho_ee * t / atom.excited_lifetime;
    x / (1.0 + x)
}

/// Share of bright time during which exactly one ion emits.
pub fn one_ion_fraction(config: &ExperimentConfig) -> f64 {
    let q = shelved_probability(config);
    2.0 * q / (1.0 + q)
}

/// Gaussian smearing of a delay histogram. `curve` sits on a symmetric grid
/// of odd length with spacing `step`; each detector contributes `sigma`, so
/// the kernel width is σ√2. Values beyond the grid are taken as the edge value.
pub fn jitter_average(curve: &[f64], step: f64, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::domain("timing_jitter_sigma", "must be >= 0"));
    }
    if !(step > 0.0) {
        return Err(Error::domain("step", "must be positive"));
    }
    if curve.is_empty() || curve.len() % 2 == 0 {
        return Err(Error::domain("curve", "needs an odd number of points centred on zero"));
    }
    if sigma == 0.0 {
        return Ok(curve.to_vec());
    }
    let width = sigma * 2f64.sqrt();
    let limit = width / 4.0;
    if step > limit * (1.0 + 1e-12) {
        return Err(Error::Undersampled { step, limit });
    }
    let reach = (6.0 * width / step).ceil() as i64;
    let kernel: Vec<f64> = (-reach..=reach)
        .map(|j| {
            let t = j as f64 * step / width;
            (-0.5 * t * t).exp()
        })
        .collect();
    let norm: f64 = kernel.iter().sum();
    let n = curve.len() as i64;
    Ok((0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let src = (i + k as i64 - reach).clamp(0, n - 1);
                    w * curve[src as usize]
                })
                .sum::<f64>()
                / norm
        })
        .collect())
}

/// Mean of a symmetric-grid curve over |τ| ≤ `half_width` (trapezoid rule).
pub fn window_mean(curve: &[f64], step: f64, half_width: f64) -> f64 {
    let c = curve.len() / 2;
    let m = ((half_width / step).round() as usize).min(c);
    if m == 0 {
        return curve[c];
    }
    let mut acc = 0.5 * (curve[c - m] + curve[c + m]);
    for v in &curve[c - m + 1..c + m] {
        acc += v;
    }
    acc / (2 * m) as f64
}

/// Result of the quadrature phase average.
#[derive(Debug, Clone, Serialize)]
pub struct SlitAverage {
    pub values: Vec<f64>,
    /// Largest change between the last two refinements.
    pub error: f64,
    pub nodes: usize,
}

/// g²(τ) averaged over slit and motional phase by direct quadrature
/// (Gauss–Hermite in the motional phase, Gauss–Legendre across the slit).
pub fn slit_average(
    engine: &Engine,
    delta: f64,
    spread: &PhaseSpread,
    taus: &[f64],
    tolerance: f64,
) -> Result<SlitAverage> {
    let v = spread.motion_visibility;
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::domain("visibility", "must lie in (0, 1]"));
    }
    let sigma = (-2.0 * v.ln()).sqrt();
    let half = spread.slit_width_phase / 2.0;
    let mut previous: Option<Vec<f64>> = None;
    let mut n = 4;
    while n <= 64 {
        let values = quadrature_pass(engine, delta, sigma, half, spread.slit, taus, n)?;
        if let Some(prev) = &previous {
            let err = prev
                .iter()
                .zip(&values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if err < tolerance {
                return Ok(SlitAverage {
                    values,
                    error: err,
                    nodes: n,
                });
            }
        }
        previous = Some(values);
        n *= 2;
    }
    Err(Error::Convergence {
        what: "slit average",
        detail: format!("no agreement to {tolerance:e} with 64 nodes per axis"),
    })
}

fn quadrature_pass(
    engine: &Engine,
    delta: f64,
    sigma: f64,
    half: f64,
    slit: SlitModel,
    taus: &[f64],
    n: usize,
) -> Result<Vec<f64>> {
    let motion = if sigma > 0.0 { gauss_hermite(n) } else { vec![(0.0, 1.0)] };
    let across = if half > 0.0 { gauss_legendre(n) } else { vec![(0.0, 1.0)] };
    let mut num = vec![0.0; taus.len()];
    let mut singles = 0.0;
    for &(z, wz) in &motion {
        let base = delta + sigma * z;
        for &(u1, w1) in &across {
            let p1 = base + half * u1;
            singles += wz * w1 * engine.intensity(&engine.detector(p1));
            let partners: &[(f64, f64)] = match slit {
                SlitModel::Collinear => &[(u1, 1.0)],
                SlitModel::TwoPoint => &across,
            };
            for &(u2, w2) in partners {
                let d1 = engine.detector(p1);
                let d2 = engine.detector(base + half * u2);
                let g = engine.coincidence_curve(&d1, &d2, taus)?;
                let w = wz * w1 * w2;
                for (acc, x) in num.iter_mut().zip(g) {
                    *acc += w * x;
                }
            }
        }
    }
    if singles < 1e-12 {
        return Err(Error::DarkDirection { rate: singles });
    }
    Ok(num.into_iter().map(|x| x / (singles * singles)).collect())
}

/// Inputs of the contrast budget in SI units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContrastParams {
    pub saturation: f64,
    pub motion_visibility: f64,
    pub slit_width_phase: f64,
    pub slit: SlitModel,
    pub temporal: TemporalModel,
    pub mix_weighting: MixWeighting,
    pub one_ion_fraction: f64,
    /// per detector, s
    pub jitter_sigma: f64,
    pub dark_rate: f64,
    pub signal_rate: f64,
    pub lifetime: f64,
    pub bin_width: f64,
    pub zero_bins: usize,
}

impl ContrastParams {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        let saturation = config.laser.saturation.ok_or_else(|| {
            Error::config("laser.saturation", "contrast model needs the saturation parameter")
        })?;
        Ok(Self {
            saturation,
            motion_visibility: config.motion.debye_waller_visibility,
            slit_width_phase: config.slit_width_phase(),
            slit: config.model.slit,
            temporal: config.model.temporal,
            mix_weighting: config.model.mix_weighting,
            one_ion_fraction: one_ion_fraction(config),
            jitter_sigma: config.detectors.timing_jitter_sigma,
            dark_rate: config.detectors.dark_rate,
            signal_rate: config.detectors.signal_rate,
            lifetime: config.atom.excited_lifetime,
            bin_width: config.detectors.bin_width,
            zero_bins: config.model.zero_bins,
        })
    }

    pub fn spread(&self) -> PhaseSpread {
        PhaseSpread {
            motion_visibility: self.motion_visibility,
            slit_width_phase: self.slit_width_phase,
            slit: self.slit,
        }
    }

    fn zero_half_width(&self) -> f64 {
        self.zero_bins as f64 * self.bin_width
    }
}

/// Zero-delay value after each layer of the budget.
#[derive(Debug, Clone, Serialize)]
pub struct ContrastBudget {
    pub delta: f64,
    /// Point detector, no motion.
    pub ideal: f64,
    /// After motional and slit phase averaging.
    pub phase_averaged: f64,
    /// After mixing in one-ion episodes.
    pub branching: f64,
    /// After timing jitter and zero-bin averaging.
    pub jitter: f64,
    /// After dark counts; the predicted measured value.
    pub measured: f64,
}

/// Precomputed correlation harmonics for one saturation value.
#[derive(Debug, Clone)]
pub struct ContrastModel {
    params: ContrastParams,
    step: f64,
    /// τ ≥ 0 grid, uniform
    taus: Vec<f64>,
    two_ion: CoincidenceHarmonics,
    one_ion: Vec<f64>,
}

impl ContrastModel {
    pub fn new(params: ContrastParams, laser: &LaserParams, atom: &AtomParams) -> Result<Self> {
        let mut laser = laser.clone();
        laser.saturation = Some(params.saturation);
        laser.rabi_frequency = None;
        let mut atom = atom.clone();
        atom.excited_lifetime = params.lifetime;

        let width = params.jitter_sigma * 2f64.sqrt();
        let z = params.zero_half_width();
        let mut target = params.lifetime / 20.0;
        if z > 0.0 {
            target = target.min(z / 4.0);
        }
        if width > 0.0 {
            target = target.min(width / 5.0);
        }
        // the zero window must fall on grid points
        let step = if z > 0.0 { z / (z / target).ceil() } else { target };
        let span = z + 8.0 * width + 15.0 * params.lifetime;
        let n = (span / step).ceil() as usize;
        let taus: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();

        let engine_taus: &[f64] = match params.temporal {
            TemporalModel::LifetimeEnvelope => &[0.0],
            TemporalModel::Engine => &taus,
        };
        let two = Engine::new(build_two_level_system(&laser, &atom, 2)?)?;
        let two_ion = two.coincidence_harmonics(0.0, 0.0, engine_taus)?;
        let one_ion = match params.temporal {
            TemporalModel::LifetimeEnvelope => taus
                .iter()
                .map(|t| 1.0 - (-t / params.lifetime).exp())
                .collect(),
            TemporalModel::Engine => {
                let one = Engine::new(build_two_level_system(&laser, &atom, 1)?)?;
                let d = one.detector(0.0);
                one.g2_tau(&d, &d, &taus)?
            }
        };
        Ok(Self {
            params,
            step,
            taus,
            two_ion,
            one_ion,
        })
    }

    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        Self::new(ContrastParams::from_config(config)?, &config.laser, &config.atom)
    }

    pub fn params(&self) -> &ContrastParams {
        &self.params
    }

    /// Delay grid (τ ≥ 0) used for the temporal layers.
    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    /// Two-ion g²(τ ≥ 0) after phase averaging, with an explicit motional visibility.
    fn two_ion_curve(&self, delta: f64, visibility: f64) -> Result<Vec<f64>> {
        let mut spread = self.params.spread();
        spread.motion_visibility = visibility;
        let avg = self.two_ion.average_at(delta, &spread)?;
        Ok(match self.params.temporal {
            TemporalModel::Engine => avg,
            TemporalModel::LifetimeEnvelope => {
                let g0 = avg[0];
                self.taus
                    .iter()
                    .map(|t| 1.0 + (g0 - 1.0) * (-t / self.params.lifetime).exp())
                    .collect()
            }
        })
    }

    /// Full symmetric measured-curve layers at nominal phase δ.
    fn layers(&self, delta: f64, visibility: f64) -> Result<(ContrastBudget, Vec<f64>)> {
        let p = &self.params;
        let averaged = self.two_ion_curve(delta, visibility)?;
        let mixed: Vec<f64> = averaged
            .iter()
            .zip(&self.one_ion)
            .map(|(&a, &b)| branching_mix(a, b, p.one_ion_fraction, p.mix_weighting))
            .collect::<Result<_>>()?;
        let full = mirror(&mixed);
        let jittered = jitter_average(&full, self.step, p.jitter_sigma)?;
        let measured: Vec<f64> = jittered
            .iter()
            .map(|&g| dark_count_mix(g, p.signal_rate, p.dark_rate))
            .collect::<Result<_>>()?;
        let z = p.zero_half_width();
        let ideal_spread = PhaseSpread::none();
        let budget = ContrastBudget {
            delta,
            ideal: self.two_ion.average_at(delta, &ideal_spread)?[0],
            phase_averaged: averaged[0],
            branching: mixed[0],
            jitter: window_mean(&jittered, self.step, z),
            measured: window_mean(&measured, self.step, z),
        };
        Ok((budget, measured))
    }

    pub fn budget(&self, delta: f64) -> Result<ContrastBudget> {
        Ok(self.layers(delta, self.params.motion_visibility)?.0)
    }

    /// Predicted zero-bin g² at nominal phase δ.
    pub fn g2_zero(&self, delta: f64) -> Result<f64> {
        self.g2_zero_with_visibility(delta, self.params.motion_visibility)
    }

    pub fn g2_zero_with_visibility(&self, delta: f64, visibility: f64) -> Result<f64> {
        Ok(self.layers(delta, visibility)?.0.measured)
    }

    /// Predicted measured g²(τ) on the symmetric grid (τ, g).
    pub fn curve(&self, delta: f64) -> Result<Vec<(f64, f64)>> {
        let (_, measured) = self.layers(delta, self.params.motion_visibility)?;
        let n = self.taus.len() as i64 - 1;
        Ok((-n..=n)
            .map(|i| i as f64 * self.step)
            .zip(measured)
            .collect())
    }
}

fn mirror(half: &[f64]) -> Vec<f64> {
    half.iter().skip(1).rev().chain(half.iter()).copied().collect()
}

/// One row of a prediction table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PredictionPoint {
    pub slit_mm: f64,
    pub delta_rad: f64,
    pub g2: f64,
    pub band_low: f64,
    pub band_high: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionCurve {
    pub config_hash: String,
    pub points: Vec<PredictionPoint>,
    /// g²(0) at δ = π and δ = 0, independent of the scan grid
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fringe_extremes: Option<(f64, f64)>,
}

impl PredictionCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slit_mm,delta_rad,g2,band_low,band_high\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                p.slit_mm, p.delta_rad, p.g2, p.band_low, p.band_high
            );
        }
        out
    }

    pub fn max(&self) -> Option<&PredictionPoint> {
        self.points.iter().max_by(|a, b| a.g2.total_cmp(&b.g2))
    }

    pub fn min(&self) -> Option<&PredictionPoint> {
        self.points.iter().min_by(|a, b| a.g2.total_cmp(&b.g2))
    }
}

/// Measured-g²(0) prediction across slit positions (metres), with a band
/// from linear propagation of the saturation, visibility and fringe-period
/// uncertainties.
pub fn compose_prediction(config: &ExperimentConfig, slit_positions: &[f64]) -> Result<PredictionCurve> {
    let params = ContrastParams::from_config(config)?;
    let model = ContrastModel::new(params.clone(), &config.laser, &config.atom)?;
    let unc = &config.uncertainty;

    let ds = unc.saturation;
    let s_models = if ds > 0.0 {
        let mut lo = params.clone();
        lo.saturation = (params.saturation - ds).max(0.0);
        let mut hi = params.clone();
        hi.saturation = params.saturation + ds;
        Some((
            ContrastModel::new(lo.clone(), &config.laser, &config.atom)?,
            ContrastModel::new(hi.clone(), &config.laser, &config.atom)?,
            hi.saturation - lo.saturation,
        ))
    } else {
        None
    };

    let v = params.motion_visibility;
    let dv = unc.visibility;
    let (v_lo, v_hi) = ((v - dv).max(0.0), (v + dv).min(1.0));
    let period = config.geometry.fringe_period;

    let mut points = Vec::with_capacity(slit_positions.len());
    for &x in slit_positions {
        let delta = slit_to_phase(&config.geometry, x);
        let g = model.g2_zero(delta)?;
        let mut var = 0.0;
        if let Some((lo, hi, span)) = &s_models {
            let d = (hi.g2_zero(delta)? - lo.g2_zero(delta)?) / span;
            var += (d * ds).powi(2);
        }
        if dv > 0.0 && v_hi > v_lo {
            let d = (model.g2_zero_with_visibility(delta, v_hi)? - model.g2_zero_with_visibility(delta, v_lo)?)
                / (v_hi - v_lo);
            var += (d * dv).powi(2);
        }
        if unc.fringe_period > 0.0 {
            // δ ∝ 1/L at fixed slit position
            let h = 1e-4;
            let dg = (model.g2_zero(delta + h)? - model.g2_zero(delta - h)?) / (2.0 * h);
            let ddelta = -delta / period * unc.fringe_period;
            var += (dg * ddelta).powi(2);
        }
        let sd = var.sqrt();
        points.push(PredictionPoint {
            slit_mm: x * 1e3,
            delta_rad: delta,
            g2: g,
            band_low: g - sd,
            band_high: g + sd,
        });
    }
    Ok(PredictionCurve {
        config_hash: config.hash(),
        points,
        fringe_extremes: Some(extremes(&model)?),
    })
}

/// Evenly spaced slit positions covering `fringes` periods centred on the
/// fringe offset.
pub fn slit_grid(config: &ExperimentConfig, fringes: f64, count: usize) -> Vec<f64> {
    let g = &config.geometry;
    let span = fringes * g.fringe_period;
    if count < 2 {
        return vec![g.fringe_offset];
    }
    (0..count)
        .map(|i| g.fringe_offset - span / 2.0 + span * i as f64 / (count - 1) as f64)
        .collect()
}

/// Effective fringe visibility of the collinear model, v·sinc(w/2).
pub fn effective_visibility(params: &ContrastParams) -> f64 {
    params.motion_visibility * sinc(params.slit_width_phase / 2.0)
}

/// Extremes of the predicted measured g²(0) over the fringe (δ = π and 0).
pub fn extremes(model: &ContrastModel) -> Result<(f64, f64)> {
    Ok((model.g2_zero(PI)?, model.g2_zero(0.0)?))
}
