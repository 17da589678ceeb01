//! Beam splitter and two imperfect single-photon detectors.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::rng::{stream_rng, Domain};
use crate::config::DetectorParams;
use crate::error::{Error, Result};

const PS: f64 = 1e-12;

/// Route, thin, jitter, dead-time-prune and add dark counts. Returns the
/// sorted, strictly increasing tags of channels A and B.
pub fn detect(
    events: &[u64],
    duration_ps: u64,
    detector: &DetectorParams,
    seed: u64,
    run_index: u64,
) -> Result<[Vec<u64>; 2]> {
    if !(0.0..=1.0).contains(&detector.efficiency) {
        return Err(Error::config("detectors.efficiency", "must lie in [0, 1]"));
    }
    let jitter_ps = detector.timing_jitter_sigma / PS;
    let normal = Normal::new(0.0, jitter_ps.max(0.0))
        .map_err(|e| Error::config("detectors.timing_jitter_sigma", e.to_string()))?;
    let mut rng = stream_rng(seed, Domain::Detector, 3 * run_index);
    let mut channels: [Vec<u64>; 2] = [Vec::new(), Vec::new()];
    for &t in events {
        let ch = usize::from(rng.random::<f64>() >= 0.5);
        let keep = rng.random::<f64>() < detector.efficiency;
        let shift = if jitter_ps > 0.0 { normal.sample(&mut rng) } else { 0.0 };
        if !keep {
            continue;
        }
        let jittered = t as f64 + shift.round();
        if jittered < 0.0 || jittered >= duration_ps as f64 {
            continue;
        }
        channels[ch].push(jittered as u64);
    }
    let dead_ps = (detector.dead_time / PS).round() as u64;
    let mean_dark = detector.dark_rate * duration_ps as f64 * PS;
    for (k, tags) in channels.iter_mut().enumerate() {
        tags.sort_unstable();
        if dead_ps > 0 {
            let mut last: Option<u64> = None;
            tags.retain(|&t| match last {
                Some(l) if t - l < dead_ps => false,
                _ => {
                    last = Some(t);
                    true
                }
            });
        }
        if mean_dark > 0.0 {
            let mut dark_rng = stream_rng(seed, Domain::Detector, 3 * run_index + 1 + k as u64);
            let n = Poisson::new(mean_dark)
                .map_err(|e| Error::config("detectors.dark_rate", e.to_string()))?
                .sample(&mut dark_rng) as u64;
            for _ in 0..n {
                tags.push(dark_rng.random_range(0..duration_ps));
            }
            tags.sort_unstable();
        }
        tags.dedup();
    }
    Ok(channels)
}
