//! Slit-position campaigns: trajectories through detectors to tag files.

use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Poisson};

use super::detector::detect;
use super::rng::{stream_rng, Domain};
use super::tags::TimeTagStream;
use super::trajectory::{run_trajectory, PhaseNoise, TrajectoryRunSpec};
use crate::config::ExperimentConfig;
use crate::contrast::ContrastParams;
use crate::engine::{build_from_config, ChannelKind, Engine};
use crate::error::{Error, Result};
use crate::geometry::{phase_at_slit, resolved_separation, separation_at_axial_frequency, wrap_phase, DetectionDirection};

/// Streams recorded at one slit position.
#[derive(Debug, Clone)]
pub struct SimulatedPosition {
    /// m
    pub slit_position: f64,
    /// wrapped to (−π, π]
    pub delta: f64,
    pub streams: [TimeTagStream; 2],
    /// photons scattered into all directions after burn-in
    pub emitted: u64,
    pub files: Vec<PathBuf>,
}

/// Ion separation for the run: configured, or retuned to `axial` (rad/s).
pub fn run_separation(config: &ExperimentConfig, axial: Option<f64>) -> Result<f64> {
    match axial {
        Some(w) => separation_at_axial_frequency(config, w),
        None => resolved_separation(&config.ions),
    }
}

fn phase_noise(config: &ExperimentConfig) -> Result<PhaseNoise> {
    PhaseNoise::from_visibility(
        config.motion.debye_waller_visibility,
        config.slit_width_phase(),
        config.model.slit,
        config.simulation.coherence_time,
    )
}

/// Simulate both detectors behind the slit at `slit_position` (m).
pub fn simulate_position(
    config: &ExperimentConfig,
    slit_position: f64,
    duration: f64,
    seed: u64,
    run_index: u64,
    separation: f64,
) -> Result<SimulatedPosition> {
    let system = build_from_config(config, 2)?;
    let phase = phase_at_slit(config, slit_position, separation)?;
    let sim = &config.simulation;
    let spec = TrajectoryRunSpec {
        seed,
        duration,
        direction: DetectionDirection::new(phase, 1.0)?,
        collection_weight: sim.collection_weight,
        noise: phase_noise(config)?,
        chunk_duration: sim.chunk_duration,
        burn_in: sim.burn_in,
        run_index,
    };
    let record = run_trajectory(&system, &spec)?;
    let [a, b] = detect(&record.events, record.duration_ps, &config.detectors, seed, run_index)?;
    let delta = wrap_phase(phase);
    let hash = config.hash();
    let make = |ch: u8, tags: Vec<u64>| -> Result<TimeTagStream> {
        Ok(TimeTagStream::new(ch, tags, record.duration_ps, hash.clone(), seed)?.with_position(slit_position, delta))
    };
    Ok(SimulatedPosition {
        slit_position,
        delta,
        streams: [make(0, a)?, make(1, b)?],
        emitted: record.emitted,
        files: Vec::new(),
    })
}

/// Simulate every position (run index = position index) and, with an output
/// directory, write `pos<i>_a.ihbt` / `pos<i>_b.ihbt` with sidecars.
pub fn run_campaign(
    config: &ExperimentConfig,
    positions: &[f64],
    duration: f64,
    seed: u64,
    axial: Option<f64>,
    out_dir: Option<&Path>,
) -> Result<Vec<SimulatedPosition>> {
    if positions.is_empty() {
        return Err(Error::domain("positions", "at least one slit position is required"));
    }
    if !(duration > 0.0) {
        return Err(Error::domain("duration", "must be positive"));
    }
    let separation = run_separation(config, axial)?;
    let mut out = Vec::with_capacity(positions.len());
    for (i, &x) in positions.iter().enumerate() {
        let mut pos = simulate_position(config, x, duration, seed, i as u64, separation)?;
        if let Some(dir) = out_dir {
            for (stream, tag) in pos.streams.iter().zip(["a", "b"]) {
                let (data, side) = stream.write(&dir.join(format!("pos{i:02}_{tag}.ihbt")))?;
                pos.files.push(data);
                pos.files.push(side);
            }
        }
        log::info!(
            "position {:.3} mm: δ = {:.3}, {} / {} tags",
            x * 1e3,
            pos.delta,
            pos.streams[0].len(),
            pos.streams[1].len()
        );
        out.push(pos);
    }
    Ok(out)
}

/// Detected signal rate per detector averaged over the fringe, Hz.
pub fn mean_signal_rate(config: &ExperimentConfig) -> Result<f64> {
    let engine = Engine::new(build_from_config(config, 2)?)?;
    let emission = engine
        .system()
        .channels()
        .iter()
        .find(|c| matches!(c.kind, ChannelKind::Emission { .. }))
        .map(|c| c.rate)
        .ok_or_else(|| Error::domain("system", "no emission channel"))?;
    let flux: f64 = (0..3)
        .map(|j| engine.intensity(&engine.detector(std::f64::consts::TAU * j as f64 / 3.0)))
        .sum::<f64>()
        / 3.0;
    Ok(config.simulation.collection_weight * emission * flux * config.detectors.efficiency / 2.0)
}

/// Copy of `config` for short simulations: collection weight raised to
/// `weight`, dead time removed, and the dark rate scaled with the signal
/// rate so the background fraction (and hence every predicted g²) is kept.
pub fn accelerated(config: &ExperimentConfig, weight: f64) -> Result<ExperimentConfig> {
    let mut out = config.clone();
    out.simulation.collection_weight = weight;
    out.detectors.dead_time = 0.0;
    let rate = mean_signal_rate(&out)?;
    out.detectors.dark_rate = config.detectors.dark_rate * rate / config.detectors.signal_rate;
    out.detectors.signal_rate = rate;
    Ok(out)
}

/// Poisson photon counts of a first-order (G1) slit scan. The phase-averaged
/// single-photon intensity is scaled so that its fringe mean is the summed
/// signal rate of both detectors; both dark rates are added on top.
pub fn simulate_fringe(
    config: &ExperimentConfig,
    positions: &[f64],
    integration_time: f64,
    seed: u64,
) -> Result<Vec<u64>> {
    if !(integration_time > 0.0) {
        return Err(Error::domain("integration_time", "must be positive"));
    }
    let engine = Engine::new(build_from_config(config, 2)?)?;
    let spread = ContrastParams::from_config(config)?.spread();
    let separation = resolved_separation(&config.ions)?;
    // fringe mean: the k = 0 harmonic is the plain average over δ
    let mean: f64 = (0..3)
        .map(|j| engine.intensity(&engine.detector(std::f64::consts::TAU * j as f64 / 3.0)))
        .sum::<f64>()
        / 3.0;
    if !(mean > 0.0) {
        return Err(Error::DarkDirection { rate: mean });
    }
    let det = &config.detectors;
    positions
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let delta = phase_at_slit(config, x, separation)?;
            let rate = 2.0 * det.signal_rate * engine.averaged_intensity(delta, &spread) / mean + 2.0 * det.dark_rate;
            let lambda = rate.max(0.0) * integration_time;
            if lambda == 0.0 {
                return Ok(0);
            }
            let mut rng = stream_rng(seed, Domain::Fringe, i as u64);
            let n = Poisson::new(lambda).map_err(|e| Error::domain("fringe rate", e.to_string()))?;
            Ok(n.sample(&mut rng) as u64)
        })
        .collect()
}
