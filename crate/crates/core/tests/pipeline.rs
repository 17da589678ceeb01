//! Simulation to tag files to correlator, checked against the model.

use std::f64::consts::PI;

use ihbt::contrast::dark_count_mix;
use ihbt::correlator::{correlate, g2_zero_estimate, normalize};
use ihbt::engine::{build_two_level_system, Engine};
use ihbt::geometry::DetectionDirection;
use ihbt::stream::{accelerated, detect, run_campaign, run_trajectory, PhaseNoise, TimeTagStream, TrajectoryRunSpec};
use ihbt::ExperimentConfig;

#[test]
fn campaign_files_give_bunching_and_antibunching() {
    let cfg = accelerated(&ExperimentConfig::reference(), 0.25).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let positions = [-0.97e-3, 0.0];
    let run = run_campaign(&cfg, &positions, 0.03, 8, None, Some(dir.path())).unwrap();
    let mut values = Vec::new();
    for (i, pos) in run.iter().enumerate() {
        let a = TimeTagStream::read(&dir.path().join(format!("pos{i:02}_a.ihbt"))).unwrap();
        let b = TimeTagStream::read(&dir.path().join(format!("pos{i:02}_b.ihbt"))).unwrap();
        assert_eq!(&a, &pos.streams[0]);
        assert_eq!(a.metadata().slit_position, Some(positions[i]));
        let h = correlate(&a, &b, cfg.detectors.bin_width, cfg.detectors.correlation_window).unwrap();
        values.push(g2_zero_estimate(&normalize(&h).unwrap(), 1).unwrap());
    }
    let (bunched, antibunched) = (values[0], values[1]);
    assert!((run[0].delta.abs() - PI).abs() < 0.05, "{}", run[0].delta);
    assert!((1.2..=1.6).contains(&bunched.value), "{bunched:?}");
    assert!((0.55..=0.81).contains(&antibunched.value), "{antibunched:?}");
    assert!(bunched.value - 1.0 > 5.0 * bunched.error);
    assert!(1.0 - antibunched.value > 5.0 * antibunched.error);
}

#[test]
fn background_fills_a_single_ion_dip_to_three_quarters() {
    let cfg = ExperimentConfig::reference();
    let one = build_two_level_system(&cfg.laser, &cfg.atom, 1).unwrap();
    let engine = Engine::new(one.clone()).unwrap();
    let weight = 0.5;
    let signal = weight * engine.intensity(&engine.detector(0.0)) / cfg.atom.excited_lifetime / 2.0;
    let spec = TrajectoryRunSpec {
        seed: 4,
        duration: 0.1,
        direction: DetectionDirection::new(0.0, 1.0).unwrap(),
        collection_weight: weight,
        noise: PhaseNoise::none(),
        chunk_duration: cfg.simulation.chunk_duration,
        burn_in: cfg.simulation.burn_in,
        run_index: 0,
    };
    let record = run_trajectory(&one, &spec).unwrap();
    let mut detectors = cfg.detectors.clone();
    detectors.efficiency = 1.0;
    detectors.timing_jitter_sigma = 0.0;
    detectors.dead_time = 0.0;
    detectors.dark_rate = signal;
    let [a, b] = detect(&record.events, record.duration_ps, &detectors, 4, 0).unwrap();
    let a = TimeTagStream::from_tags(0, a, record.duration_ps).unwrap();
    let b = TimeTagStream::from_tags(1, b, record.duration_ps).unwrap();
    let est = g2_zero_estimate(&normalize(&correlate(&a, &b, 20e-12, 2e-9).unwrap()).unwrap(), 1).unwrap();
    let want = dark_count_mix(0.0, signal, signal).unwrap();
    assert!((want - 0.75).abs() < 1e-12);
    assert!((est.value - want).abs() < 3.0 * est.error, "{est:?}");
}
