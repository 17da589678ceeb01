//! End-to-end acceptance suite. Runs every criterion, prints one line per
//! criterion and exits non-zero if any of them fails.
//!
//! `cargo test -p ihbt-core --test acceptance -- --nocapture` is not needed:
//! this target has its own `main`.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use ihbt::config::DetectorParams;
use ihbt::contrast::{compose_prediction, dark_count_mix, g2_visibility, jitter_average};
use ihbt::correlator::{
    correlate, correlate_brute_force, correlate_sharded, g2_zero_estimate, normalize, CorrelationHistogram, Estimate,
};
use ihbt::engine::{build_two_level_system, g2_zero_analytic, C64, CVector, Engine};
use ihbt::geometry::{ion_separation, DetectionDirection};
use ihbt::stream::{accelerated, detect, run_campaign, run_trajectory, PhaseNoise, TimeTagStream, TrajectoryRunSpec};
use ihbt::ExperimentConfig;

type Outcome = Result<String, String>;

const SEED: u64 = 20_240_517;
/// Collection weight of the accelerated campaigns.
const WEIGHT: f64 = 0.25;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn two_ion_engine(s: f64) -> Result<Engine, String> {
    let cfg = ExperimentConfig::reference();
    let mut laser = cfg.laser.clone();
    laser.saturation = Some(s);
    laser.rabi_frequency = None;
    Engine::new(build_two_level_system(&laser, &cfg.atom, 2).map_err(err)?).map_err(err)
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in [0.05, 0.2, 0.46, 1.0, 3.0] {
        let e = two_ion_engine(s)?;
        for j in 0..17 {
            let delta = PI * j as f64 / 16.0;
            let d = e.detector(delta);
            let got = e.g2_zero(&d, &d).map_err(err)?;
            let want = g2_zero_analytic(s, delta).map_err(err)?;
            worst = worst.max((got - want).abs());
        }
    }
    check(worst < 1e-6, format!("max |engine - closed form| = {worst:.2e} over 5 x 17"))
}

fn criterion_2() -> Outcome {
    let hi = g2_visibility(0.46, PI, 0.5).map_err(err)?;
    let lo = g2_visibility(0.46, 0.0, 0.5).map_err(err)?;
    check(
        (hi - 2.31).abs() <= 0.01 && (lo - 0.555).abs() <= 0.01,
        format!("delta = pi: {hi:.4}, delta = 0: {lo:.4}"),
    )
}

fn criterion_3() -> Outcome {
    let cfg = ExperimentConfig::reference();
    let xs: Vec<f64> = (0..=60).map(|i| (-1.5 + 0.05 * i as f64) * 1e-3).collect();
    let curve = compose_prediction(&cfg, &xs).map_err(err)?;
    let max = curve.max().map(|p| p.g2).unwrap_or(f64::NAN);
    let min = curve.min().map(|p| p.g2).unwrap_or(f64::NAN);
    check(
        (1.29..=1.53).contains(&max) && (0.66..=0.70).contains(&min),
        format!("scan max {max:.4}, min {min:.4}"),
    )
}

/// Zero-delay estimate of one simulated position, plus its detected photon count.
fn position_estimate(cfg: &ExperimentConfig, x: f64, duration: f64, axial: Option<f64>) -> Result<(Estimate, usize), String> {
    let run = run_campaign(cfg, &[x], duration, SEED, axial, None).map_err(err)?;
    let [a, b] = &run[0].streams;
    let h = correlate(a, b, cfg.detectors.bin_width, cfg.detectors.correlation_window).map_err(err)?;
    let est = g2_zero_estimate(&normalize(&h).map_err(err)?, 1).map_err(err)?;
    Ok((est, a.len() + b.len()))
}

/// Slit positions with measured values and errors.
const MEASURED: [(f64, f64, f64); 3] = [(-0.97e-3, 1.46, 0.08), (0.45e-3, 0.89, 0.07), (0.0, 0.60, 0.05)];

fn criterion_4(bunched: &mut Option<Estimate>) -> Outcome {
    let cfg = accelerated(&ExperimentConfig::reference(), WEIGHT).map_err(err)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (x, want, sigma) in MEASURED {
        let (est, photons) = position_estimate(&cfg, x, 0.2, None)?;
        if x < 0.0 {
            *bunched = Some(est);
        }
        let combined = (sigma * sigma + est.error * est.error).sqrt();
        let z = (est.value - want) / combined;
        ok &= z.abs() <= 3.0 && photons >= 1_000_000;
        parts.push(format!(
            "{:+.2} mm: {:.3}({:.3}) vs {want:.2}({sigma:.2}), {z:+.1} sigma, {photons} photons",
            x * 1e3,
            est.value,
            est.error
        ));
    }
    check(ok, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let e = two_ion_engine(0.46)?;
    let sys = e.system();
    let (ge, eg) = (sys.basis_index(&[0, 1]), sys.basis_index(&[1, 0]));
    let r = 1.0 / 2f64.sqrt();
    let mut worst: f64 = 0.0;
    for (delta, sign) in [(PI, -1.0), (0.0, 1.0)] {
        let h = e.heralded_state(&e.detector(delta)).map_err(err)?;
        let m = h.matrix();
        let block = m[(ge, ge)] + m[(eg, eg)];
        let mut target = CVector::zeros(sys.dim());
        target[eg] = C64::new(r, 0.0);
        target[ge] = C64::new(sign * r, 0.0);
        let overlap = (target.adjoint() * m * &target)[(0, 0)] / block;
        worst = worst.max((overlap.re - 1.0).abs()).max(overlap.im.abs());
    }
    check(worst < 1e-12, format!("max |overlap - 1| = {worst:.1e} (|a> at pi, |s> at 0)"))
}

fn ideal_detectors(cfg: &ExperimentConfig) -> DetectorParams {
    DetectorParams {
        efficiency: 1.0,
        dark_rate: 0.0,
        timing_jitter_sigma: 0.0,
        dead_time: 0.0,
        ..cfg.detectors.clone()
    }
}

fn criterion_6() -> Outcome {
    let cfg = ExperimentConfig::reference();
    let s = 0.46;
    let engine = two_ion_engine(s)?;
    let system = engine.system().clone();
    let gamma = 1.0 / cfg.atom.excited_lifetime;
    let detectors = ideal_detectors(&cfg);
    let duration = 0.1;
    let weight = 0.5;
    let bin = 20e-12;
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, delta) in [0.0, PI / 2.0, PI].into_iter().enumerate() {
        let spec = TrajectoryRunSpec {
            seed: SEED,
            duration,
            direction: DetectionDirection::new(delta, 1.0).map_err(err)?,
            collection_weight: weight,
            noise: PhaseNoise::none(),
            chunk_duration: cfg.simulation.chunk_duration,
            burn_in: cfg.simulation.burn_in,
            run_index: i as u64,
        };
        let record = run_trajectory(&system, &spec).map_err(err)?;
        let [a, b] = detect(&record.events, record.duration_ps, &detectors, SEED, i as u64).map_err(err)?;
        let a = TimeTagStream::from_tags(0, a, record.duration_ps).map_err(err)?;
        let b = TimeTagStream::from_tags(1, b, record.duration_ps).map_err(err)?;
        let h = correlate(&a, &b, bin, 2e-9).map_err(err)?;
        let est = g2_zero_estimate(&normalize(&h).map_err(err)?, 1).map_err(err)?;
        let want = g2_zero_analytic(s, delta).map_err(err)?;
        let z = (est.value - want) / est.error;

        // singles: Poisson variance corrected by the integrated bunching
        let d = engine.detector(delta);
        let rate = weight * gamma * engine.intensity(&d);
        let taus: Vec<f64> = (0..=1500).map(|k| k as f64 * 0.1e-9).collect();
        let g = engine.g2_tau(&d, &d, &taus).map_err(err)?;
        let excess: f64 = 2.0 * g.windows(2).map(|w| 0.5 * (w[0] + w[1]) - 1.0).sum::<f64>() * 0.1e-9;
        let expected = rate * duration;
        let fano = (1.0 + rate * excess).max(0.0);
        let singles = (a.len() + b.len()) as f64;
        let zs = (singles - expected) / (expected * fano).sqrt();

        ok &= z.abs() <= 3.0 && zs.abs() <= 3.0;
        parts.push(format!(
            "delta {delta:.3}: g2 {:.3}({:.3}) vs {want:.3} ({z:+.1} sigma), singles {singles:.0} vs {expected:.0} ({zs:+.1} sigma)",
            est.value, est.error
        ));
    }
    check(ok, parts.join("; "))
}

fn random_tags(rng: &mut ChaCha8Rng, n: usize, span: u64) -> Vec<u64> {
    use rand::Rng;
    let mut v: Vec<u64> = (0..n).map(|_| rng.random_range(0..span)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn criterion_7() -> Outcome {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (bin, window) = (2e-9, 600e-9);
    let mut mismatches = 0;
    let mut largest = 0;
    for _ in 0..100 {
        let (na, nb) = (rng.random_range(1..=10_000), rng.random_range(1..=10_000));
        let span = rng.random_range(1_000_000..50_000_000_000u64);
        let a = TimeTagStream::from_tags(0, random_tags(&mut rng, na, span), span).map_err(err)?;
        let b = TimeTagStream::from_tags(1, random_tags(&mut rng, nb, span), span).map_err(err)?;
        largest = largest.max(a.len().max(b.len()));
        let fast = correlate(&a, &b, bin, window).map_err(err)?;
        if fast != correlate_brute_force(&a, &b, bin, window).map_err(err)? {
            mismatches += 1;
        }
    }

    // sharding over a long run
    let span = 2_000_000_000_000u64;
    let a = TimeTagStream::from_tags(0, random_tags(&mut rng, 200_000, span), span).map_err(err)?;
    let b = TimeTagStream::from_tags(1, random_tags(&mut rng, 200_000, span), span).map_err(err)?;
    let whole = correlate(&a, &b, bin, window).map_err(err)?;
    let mut shard_failures = 0;
    for shards in [1, 2, 3, 7, 16, 64] {
        if correlate_sharded(&a, &b, bin, window, shards).map_err(err)? != whole {
            shard_failures += 1;
        }
    }

    // swap symmetry: with even tags on one side and odd on the other no delay
    // falls on a bin edge, so swapping channels mirrors the histogram exactly
    let mut swap_failures = 0;
    for _ in 0..20 {
        let span = 4_000_000_000u64;
        let even: Vec<u64> = random_tags(&mut rng, 5_000, span / 2).into_iter().map(|t| 2 * t).collect();
        let odd: Vec<u64> = random_tags(&mut rng, 5_000, span / 2).into_iter().map(|t| 2 * t + 1).collect();
        let a = TimeTagStream::from_tags(0, even, span).map_err(err)?;
        let b = TimeTagStream::from_tags(1, odd, span).map_err(err)?;
        let ab: CorrelationHistogram = correlate(&a, &b, bin, window).map_err(err)?;
        let ba = correlate(&b, &a, bin, window).map_err(err)?;
        if ab.reversed() != ba {
            swap_failures += 1;
        }
    }
    check(
        mismatches == 0 && shard_failures == 0 && swap_failures == 0,
        format!(
            "oracle mismatches {mismatches}/100 (up to {largest} tags), shard failures {shard_failures}/6, swap failures {swap_failures}/20"
        ),
    )
}

fn poisson_stream(seed: u64, channel: u8, rate: f64, duration: f64) -> Result<TimeTagStream, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exp = Exp::new(rate).map_err(err)?;
    let end = (duration * 1e12) as u64;
    let mut t = 0.0;
    let mut tags = Vec::new();
    loop {
        t += exp.sample(&mut rng);
        let ps = (t * 1e12) as u64;
        if ps >= end {
            break;
        }
        if tags.last().map_or(true, |&l| ps > l) {
            tags.push(ps);
        }
    }
    TimeTagStream::from_tags(channel, tags, end).map_err(err)
}

/// (max |g2 - 1| / err, empirical scatter, mean reported error) of two independent streams.
fn flat_statistics(duration: f64, seed: u64) -> Result<(f64, f64, f64), String> {
    let rate = 2e4;
    let a = poisson_stream(seed, 0, rate, duration)?;
    let b = poisson_stream(seed + 1, 1, rate, duration)?;
    let curve = normalize(&correlate(&a, &b, 2e-9, 600e-9).map_err(err)?).map_err(err)?;
    let n = curve.bins.len() as f64;
    let worst = curve
        .bins
        .iter()
        .map(|b| (b.g2 - 1.0).abs() / b.g2_err)
        .fold(0.0, f64::max);
    let mean = curve.bins.iter().map(|b| b.g2).sum::<f64>() / n;
    let scatter = (curve.bins.iter().map(|b| (b.g2 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let reported = curve.bins.iter().map(|b| b.g2_err).sum::<f64>() / n;
    Ok((worst, scatter, reported))
}

fn criterion_8() -> Outcome {
    let (w1, s1, e1) = flat_statistics(25.0, SEED)?;
    let (w2, s2, e2) = flat_statistics(50.0, SEED + 10)?;
    let (w4, s4, e4) = flat_statistics(100.0, SEED + 20)?;
    let fixed = w1 <= 4.0 && w2 <= 4.0 && w4 <= 4.0;
    // doubling the duration shrinks the error by 1/sqrt(2); four times halves it
    let r2 = s2 / s1 * 2f64.sqrt();
    let r4 = s4 / s1 * 2.0;
    let q2 = e2 / e1 * 2f64.sqrt();
    let q4 = e4 / e1 * 2.0;
    let scaling = [r2, r4, q2, q4].iter().all(|r| (r - 1.0).abs() <= 0.15);
    check(
        fixed && scaling,
        format!(
            "worst bin {:.2} sigma; scatter x2 {r2:.3}, x4 {r4:.3} of sqrt scaling; reported error x2 {q2:.3}, x4 {q4:.3}",
            w1.max(w2).max(w4)
        ),
    )
}

fn criterion_9(bunched: Option<Estimate>) -> Outcome {
    let base = ExperimentConfig::reference();
    let mut ions = base.ions.clone();
    ions.separation = None;
    ions.axial_trap_frequency = TAU * 760e3;
    let d760 = ion_separation(&ions).map_err(err)?;
    ions.axial_trap_frequency = TAU * 718e3;
    let d718 = ion_separation(&ions).map_err(err)?;
    let geometry = (d760 / 6.70e-6 - 1.0).abs() <= 0.01 && (d718 / 6.97e-6 - 1.0).abs() <= 0.01;

    let cfg = accelerated(&base, WEIGHT).map_err(err)?;
    let x = -0.97e-3;
    let before = match bunched {
        Some(e) => e,
        None => position_estimate(&cfg, x, 0.2, None)?.0,
    };
    let (after, _) = position_estimate(&cfg, x, 0.05, Some(TAU * 718e3))?;
    let flip = before.value - 1.0 > 3.0 * before.error && 1.0 - after.value > 3.0 * after.error;
    check(
        geometry && flip,
        format!(
            "d = {:.3} um at 760 kHz, {:.3} um at 718 kHz; at -0.97 mm g2(0) {:.3}({:.3}) -> {:.3}({:.3})",
            d760 * 1e6,
            d718 * 1e6,
            before.value,
            before.error,
            after.value,
            after.error
        ),
    )
}

fn criterion_10() -> Outcome {
    let cfg = ExperimentConfig::reference();
    let sigma = cfg.detectors.timing_jitter_sigma;
    let life = cfg.atom.excited_lifetime;
    let step = 0.1e-9;
    let n = 3200usize;
    let taus: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    let at = n + 3000; // 300 ns on the mirrored grid
    let mirror = |half: &[f64]| -> Vec<f64> { half.iter().skip(1).rev().chain(half).copied().collect() };

    let mut worst: f64 = 0.0;
    let e = two_ion_engine(0.46)?;
    for delta in [0.0, PI / 2.0, PI] {
        // closed-form zero-delay value relaxing with the lifetime
        let g0 = g2_zero_analytic(0.46, delta).map_err(err)?;
        let envelope: Vec<f64> = taus.iter().map(|t| 1.0 + (g0 - 1.0) * (-t / life).exp()).collect();
        let smeared = jitter_average(&mirror(&envelope), step, sigma).map_err(err)?;
        worst = worst.max((smeared[at] - 1.0).abs());
        // full engine curve
        let d = e.detector(delta);
        let g = e.g2_tau(&d, &d, &taus).map_err(err)?;
        let smeared = jitter_average(&mirror(&g), step, sigma).map_err(err)?;
        worst = worst.max((smeared[at] - 1.0).abs());
    }

    let one = Engine::new(build_two_level_system(&cfg.laser, &cfg.atom, 1).map_err(err)?).map_err(err)?;
    let d = one.detector(0.0);
    let single = one.g2_zero(&d, &d).map_err(err)?;
    let with_dark = dark_count_mix(single, cfg.detectors.signal_rate, 10.0).map_err(err)?;
    check(
        worst < 0.02 && single == 0.0 && with_dark > 0.0,
        format!("max |g2(300 ns) - 1| = {worst:.1e}; single ion g2(0) = {single}, with 10 Hz darks {with_dark:.4}"),
    )
}

fn main() {
    let _ = env_logger::builder().is_test(true).try_init();
    let mut bunched = None;
    let mut failures = 0;
    let mut run = |n: usize, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS ({secs:.1} s) {detail}"),
            Err(detail) => {
                failures += 1;
                println!("criterion {n}: FAIL ({secs:.1} s) {detail}");
            }
        }
    };
    run(1, &mut criterion_1);
    run(2, &mut criterion_2);
    run(3, &mut criterion_3);
    run(4, &mut || criterion_4(&mut bunched));
    run(5, &mut criterion_5);
    run(6, &mut criterion_6);
    run(7, &mut criterion_7);
    run(8, &mut criterion_8);
    run(9, &mut || criterion_9(bunched));
    run(10, &mut criterion_10);
    if failures > 0 {
        println!("{failures} of 10 acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 10 acceptance criteria passed");
}
