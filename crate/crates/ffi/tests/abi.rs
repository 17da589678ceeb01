use std::ffi::{CStr, CString};
use std::f64::consts::PI;
use std::ptr;

use ihbt_ffi::*;

fn last_error() -> String {
    let p = ihbt_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn analytic_values_and_errors() {
    let mut g = 0.0;
    unsafe {
        assert_eq!(ihbt_g2_zero_analytic(0.46, PI, &mut g), IhbtStatus::Ok);
        assert!((g - 10.0737).abs() < 1e-3);
        assert_eq!(ihbt_g2_visibility(0.46, 0.0, 0.5, &mut g), IhbtStatus::Ok);
        assert!((g - 0.55487).abs() < 1e-4);
        assert_eq!(ihbt_g2_zero_analytic(-1.0, 0.0, &mut g), IhbtStatus::Config);
        assert!(last_error().contains("saturation"));
        assert_eq!(ihbt_g2_zero_analytic(0.46, 0.0, ptr::null_mut()), IhbtStatus::NullPointer);
    }
}

#[test]
fn model_round_trip() {
    let cfg = ihbt_config_reference();
    let mut model = ptr::null_mut();
    let mut hash = [0 as std::ffi::c_char; 65];
    unsafe {
        assert_eq!(ihbt_config_hash(cfg, hash.as_mut_ptr(), hash.len()), IhbtStatus::Ok);
        assert_eq!(CStr::from_ptr(hash.as_ptr()).to_bytes().len(), 64);
        assert_eq!(ihbt_config_hash(cfg, hash.as_mut_ptr(), 10), IhbtStatus::Usage);

        assert_eq!(ihbt_model_new(cfg, &mut model), IhbtStatus::Ok);
        let (mut max, mut min) = (0.0, 0.0);
        assert_eq!(ihbt_model_g2_zero(model, PI, &mut max), IhbtStatus::Ok);
        assert_eq!(ihbt_model_g2_zero(model, 0.0, &mut min), IhbtStatus::Ok);
        assert!((1.29..=1.53).contains(&max) && (0.66..=0.70).contains(&min));

        let xs = [-0.97e-3, 0.0];
        let (mut g, mut lo, mut hi) = ([0.0; 2], [0.0; 2], [0.0; 2]);
        assert_eq!(
            ihbt_predict(cfg, xs.as_ptr(), 2, g.as_mut_ptr(), lo.as_mut_ptr(), hi.as_mut_ptr()),
            IhbtStatus::Ok
        );
        assert!(lo[0] <= g[0] && g[0] <= hi[0]);
        assert!((g[1] - min).abs() < 1e-12);
        ihbt_model_free(model);
        ihbt_config_free(cfg);
        ihbt_config_free(ptr::null_mut());
    }
}

#[test]
fn config_files() {
    let dir = tempfile_dir();
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "[laser]\nwavelength = -1\n").unwrap();
    let path = CString::new(bad.to_str().unwrap()).unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(ihbt_config_load(path.as_ptr(), &mut cfg), IhbtStatus::Config);
        let good = CString::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/reference.toml")).unwrap();
        assert_eq!(ihbt_config_load(good.as_ptr(), &mut cfg), IhbtStatus::Ok);
        ihbt_config_free(cfg);
    }
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("ihbt-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn correlation_through_the_abi() {
    let mut n = 0usize;
    unsafe {
        assert_eq!(ihbt_histogram_len(2e-9, 600e-9, &mut n), IhbtStatus::Ok);
        assert_eq!(n, 600);
        let a = [0u64];
        let b = [4000u64];
        let mut counts = vec![0u64; n];
        assert_eq!(
            ihbt_correlate(a.as_ptr(), 1, b.as_ptr(), 1, 2e-9, 600e-9, counts.as_mut_ptr(), n),
            IhbtStatus::Ok
        );
        assert_eq!(counts[302], 1);
        let unsorted = [5u64, 1];
        assert_eq!(
            ihbt_correlate(unsorted.as_ptr(), 2, b.as_ptr(), 1, 2e-9, 600e-9, counts.as_mut_ptr(), n),
            IhbtStatus::DataFormat
        );
        assert_eq!(
            ihbt_correlate(a.as_ptr(), 1, b.as_ptr(), 1, 2e-9, 600e-9, counts.as_mut_ptr(), 3),
            IhbtStatus::Usage
        );
    }
}

#[test]
fn header_lists_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ihbt.h")).unwrap();
    for name in [
        "ihbt_last_error",
        "ihbt_config_load",
        "ihbt_config_free",
        "ihbt_model_new",
        "ihbt_model_g2_zero",
        "ihbt_predict",
        "ihbt_correlate",
        "typedef struct IhbtConfig IhbtConfig",
        "IHBT_STATUS_NUMERICAL = 5",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
