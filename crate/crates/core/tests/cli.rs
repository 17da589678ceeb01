//! Command-line behaviour through `main_with_args`.

use std::fs;
use std::path::{Path, PathBuf};

use ihbt::cli::main_with_args;
use ihbt::contrast::PredictionCurve;
use ihbt::manifest::RunManifest;
use ihbt::stream::TimeTagStream;

fn ihbt(out: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["ihbt".to_string(), "--out".into(), out.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    main_with_args(argv)
}

/// (slit_mm, g2_zero, g2_err) rows of a scan summary.
fn summary(dir: &Path) -> Vec<(f64, f64, f64)> {
    let text = fs::read_to_string(dir.join("scan_summary.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("slit_mm,delta_rad,g2_zero,g2_err"));
    lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0], f[2], f[3])
        })
        .collect()
}

fn histogram_counts(path: &Path) -> Vec<u64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "tau_ns,counts,g2,g2_err");
    lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

#[test]
fn predict_writes_curves_within_measured_ranges() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ihbt(dir.path(), &["predict"]), 0);
    let curve: PredictionCurve = serde_json::from_slice(&fs::read(dir.path().join("prediction.json")).unwrap()).unwrap();
    let max = curve.max().unwrap().g2;
    let min = curve.min().unwrap().g2;
    assert!((1.29..=1.53).contains(&max) && (0.66..=0.70).contains(&min), "{max} {min}");
    let csv = fs::read_to_string(dir.path().join("prediction.csv")).unwrap();
    assert!(csv.starts_with("slit_mm,delta_rad,g2,band_low,band_high"));
    assert_eq!(csv.lines().count(), 62);
    let manifest: RunManifest = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert!(manifest.outputs.iter().any(|o| o.path.ends_with("prediction.csv") && o.sha256.len() == 64));
}

#[test]
fn ideal_prediction_reaches_closed_form_extremes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ihbt(dir.path(), &["predict", "--ideal"]), 0);
    let curve: PredictionCurve = serde_json::from_slice(&fs::read(dir.path().join("prediction.json")).unwrap()).unwrap();
    let (hi, lo) = curve.fringe_extremes.unwrap();
    assert!((hi - 10.07).abs() < 0.01 && (lo - 0.352).abs() < 0.001, "{hi} {lo}");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(ihbt(out, &["predict", "--range", "1:0:0.1"]), 2);
    assert_eq!(ihbt(out, &["scan", "--positions", "0", "--duration", "0"]), 2);
    assert_eq!(ihbt(out, &["fringe", "--positions", "0,0.2,0.4"]), 2);
    assert_eq!(ihbt(out, &["nonsense"]), 2);
    assert_eq!(ihbt(out, &["--threads", "0", "predict"]), 2);
    assert_eq!(ihbt(out, &["--help"]), 0);
}

#[test]
fn config_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[ions]\nmass = \"banana\"\n").unwrap();
    let bad = bad.display().to_string();
    assert_eq!(ihbt(dir.path(), &["--config", &bad, "predict"]), 3);
    let missing = dir.path().join("missing.toml").display().to_string();
    assert_eq!(ihbt(dir.path(), &["--config", &missing, "predict"]), 3);
}

#[test]
fn corrupt_tag_file_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ihbt");
    fs::write(&a, b"XXXX0000000000000000").unwrap();
    let p = a.display().to_string();
    assert_eq!(ihbt(dir.path(), &["correlate", &p, &p]), 4);
}

#[test]
fn simulate_is_deterministic() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let args = ["--seed", "42", "simulate", "--position", "-0.97", "--duration", "0.002", "--accelerate", "0.25"];
    let digests: Vec<Vec<u8>> = dirs
        .iter()
        .map(|d| {
            assert_eq!(ihbt(d.path(), &args), 0);
            fs::read(d.path().join("pos00_a.ihbt")).unwrap()
        })
        .collect();
    assert!(!digests[0].is_empty());
    assert_eq!(digests[0], digests[1]);
    let other = tempfile::tempdir().unwrap();
    let mut changed = args;
    changed[1] = "43";
    assert_eq!(ihbt(other.path(), &changed), 0);
    assert_ne!(fs::read(other.path().join("pos00_a.ihbt")).unwrap(), digests[0]);
}

fn write_stream(dir: &Path, name: &str, channel: u8, tags: Vec<u64>, span: u64) -> PathBuf {
    let p = dir.join(name);
    TimeTagStream::from_tags(channel, tags, span).unwrap().write(&p).unwrap();
    p
}

#[test]
fn correlate_defaults_swap_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let span = 1_000_000_000u64;
    // even against odd tags: no delay sits on a bin edge
    let a: Vec<u64> = (0..4000u64).map(|i| (i * 249_997 + i * i * 13) % (span / 2) * 2).collect();
    let mut a = a;
    a.sort_unstable();
    a.dedup();
    let b: Vec<u64> = a.iter().map(|t| (t + 3_001) % span).filter(|t| t % 2 == 1).collect();
    let mut b = b;
    b.sort_unstable();
    let pa = write_stream(dir.path(), "a.ihbt", 0, a, span).display().to_string();
    let pb = write_stream(dir.path(), "b.ihbt", 1, b, span).display().to_string();

    let ab = dir.path().join("ab");
    let ba = dir.path().join("ba");
    assert_eq!(ihbt(&ab, &["correlate", &pa, &pb, "--oracle"]), 0);
    assert_eq!(ihbt(&ba, &["correlate", &pb, &pa]), 0);
    let forward = histogram_counts(&ab.join("histogram.csv"));
    let mut backward = histogram_counts(&ba.join("histogram.csv"));
    // 2 ns bins over ±600 ns
    assert_eq!(forward.len(), 600);
    assert!(forward.iter().sum::<u64>() > 0);
    backward.reverse();
    assert_eq!(forward, backward);
}

#[test]
fn scan_traces_the_fringe() {
    let dir = tempfile::tempdir().unwrap();
    let positions: Vec<String> = (0..8).map(|i| format!("{:.4}", -0.97 + 1.94 * i as f64 / 8.0)).collect();
    let list = positions.join(",");
    let args = ["scan", "--positions", &list, "--duration", "0.005", "--accelerate", "0.25"];
    assert_eq!(ihbt(dir.path(), &args), 0);
    let rows = summary(dir.path());
    assert_eq!(rows.len(), 8);
    // bunching behind the anti-symmetric direction, antibunching behind the symmetric one
    assert!(rows[0].1 - 1.0 > 3.0 * rows[0].2, "{:?}", rows[0]);
    assert!(1.0 - rows[4].1 > 3.0 * rows[4].2, "{:?}", rows[4]);
    let crossings = (0..8)
        .filter(|&i| (rows[i].1 - 1.0).signum() != (rows[(i + 1) % 8].1 - 1.0).signum())
        .count();
    assert_eq!(crossings, 2, "{rows:?}");
    assert!(dir.path().join("pos00_histogram.csv").exists());
}

#[test]
fn trap_frequency_change_flips_the_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["scan", "--positions", "-0.97", "--duration", "0.01", "--accelerate", "0.25"];
    assert_eq!(ihbt(&dir.path().join("760"), &base), 0);
    let mut tuned = base.to_vec();
    tuned.extend(["--axial-frequency", "718"]);
    assert_eq!(ihbt(&dir.path().join("718"), &tuned), 0);
    let before = summary(&dir.path().join("760"))[0];
    let after = summary(&dir.path().join("718"))[0];
    assert!(before.1 - 1.0 > 3.0 * before.2, "{before:?}");
    assert!(1.0 - after.1 > 3.0 * after.2, "{after:?}");
}

#[test]
fn four_times_the_duration_halves_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let errs: Vec<f64> = ["0.004", "0.016"]
        .iter()
        .map(|d| {
            let out = dir.path().join(d);
            let args = ["--seed", "3", "scan", "--positions", "0.45", "--duration", d, "--accelerate", "0.25"];
            assert_eq!(ihbt(&out, &args), 0);
            summary(&out)[0].2
        })
        .collect();
    let ratio = errs[1] / errs[0];
    assert!((ratio / 0.5 - 1.0).abs() < 0.15, "{ratio}");
}

#[test]
fn fringe_scan_recovers_the_period() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ihbt(dir.path(), &["fringe", "--range", "-2:2:0.1"]), 0);
    let scan: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("fringe.json")).unwrap()).unwrap();
    let period = scan["fitted_period"].as_f64().unwrap();
    assert!((period - 1.94e-3).abs() < 0.04e-3, "{period}");
}
