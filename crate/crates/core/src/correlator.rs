//! Coincidence histograms from time tags, g² normalisation and fringe fitting.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::tags::{first_unsorted, TimeTagStream, PS};

/// Signed-delay coincidence counts. Bin k covers
/// [(k − half)·bin, (k − half + 1)·bin) in τ = t_b − t_a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub bin_width_ps: u64,
    pub half_bins: usize,
    pub counts: Vec<u64>,
    pub singles_a: u64,
    pub singles_b: u64,
    pub duration_ps: u64,
}

impl CorrelationHistogram {
    pub fn empty(bin: f64, window: f64) -> Result<Self> {
        let bin_width_ps = (bin * PS).round() as u64;
        if bin_width_ps == 0 {
            return Err(Error::domain("bin", "must be at least 1 ps"));
        }
        if !(window >= bin) {
            return Err(Error::domain("window", "must be at least one bin"));
        }
        let half_bins = (window * PS / bin_width_ps as f64 - 1e-9).ceil() as usize;
        Ok(Self {
            bin_width_ps,
            half_bins,
            counts: vec![0; 2 * half_bins],
            singles_a: 0,
            singles_b: 0,
            duration_ps: 0,
        })
    }

    /// s
    pub fn bin_width(&self) -> f64 {
        self.bin_width_ps as f64 / PS
    }

    /// s
    pub fn window(&self) -> f64 {
        (self.half_bins as u64 * self.bin_width_ps) as f64 / PS
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    fn reach_ps(&self) -> u64 {
        self.half_bins as u64 * self.bin_width_ps
    }

    /// Lower edge of bin k, ps.
    pub fn bin_start_ps(&self, k: usize) -> i64 {
        (k as i64 - self.half_bins as i64) * self.bin_width_ps as i64
    }

    /// Bin centre in ns.
    pub fn tau_ns(&self, k: usize) -> f64 {
        (self.bin_start_ps(k) as f64 + self.bin_width_ps as f64 / 2.0) * 1e-3
    }

    fn index(&self, delta: i64) -> Option<usize> {
        let k = delta.div_euclid(self.bin_width_ps as i64) + self.half_bins as i64;
        (0..self.counts.len() as i64).contains(&k).then_some(k as usize)
    }

    fn same_binning(&self, other: &Self) -> bool {
        self.bin_width_ps == other.bin_width_ps && self.half_bins == other.half_bins
    }

    /// Add another measurement with identical binning (counts, singles and
    /// durations all sum).
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if !self.same_binning(other) {
            return Err(Error::domain("histogram", "merge requires identical binning"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.singles_a += other.singles_a;
        self.singles_b += other.singles_b;
        self.duration_ps += other.duration_ps;
        Ok(())
    }

    /// Mirror the bins (τ → −τ) and swap the singles. Equals the histogram of
    /// the swapped channels whenever no delay falls on a bin edge.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        out.counts.reverse();
        std::mem::swap(&mut out.singles_a, &mut out.singles_b);
        out
    }
}

fn check_sorted(name: &'static str, tags: &[u64]) -> Result<()> {
    match first_unsorted(tags) {
        Some(index) => Err(Error::Unsorted { stream: name, index }),
        None => Ok(()),
    }
}

/// Multi-start multi-stop counting of every pair inside the window.
fn accumulate(h: &mut CorrelationHistogram, a: &[u64], b: &[u64], skip_self: bool) {
    let reach = h.reach_ps();
    let mut lo = 0usize;
    for (i, &ta) in a.iter().enumerate() {
        while lo < b.len() && b[lo] + reach < ta {
            lo += 1;
        }
        let mut j = lo;
        while j < b.len() && b[j] < ta + reach {
            if !(skip_self && i == j) {
                let delta = b[j] as i64 - ta as i64;
                if let Some(k) = h.index(delta) {
                    h.counts[k] += 1;
                }
            }
            j += 1;
        }
    }
}

fn finish(mut h: CorrelationHistogram, a: &TimeTagStream, b: &TimeTagStream) -> CorrelationHistogram {
    h.singles_a = a.len() as u64;
    h.singles_b = b.len() as u64;
    h.duration_ps = a.duration_ps().max(b.duration_ps());
    h
}

/// Coincidence histogram of τ = t_b − t_a in one pass over both streams.
pub fn correlate(a: &TimeTagStream, b: &TimeTagStream, bin: f64, window: f64) -> Result<CorrelationHistogram> {
    let mut h = CorrelationHistogram::empty(bin, window)?;
    correlate_tags(&mut h, a.timestamps(), b.timestamps())?;
    Ok(finish(h, a, b))
}

/// Raw-slice form of [`correlate`]; adds into `h`.
pub fn correlate_tags(h: &mut CorrelationHistogram, a: &[u64], b: &[u64]) -> Result<()> {
    check_sorted("a", a)?;
    check_sorted("b", b)?;
    accumulate(h, a, b, false);
    Ok(())
}

/// Autocorrelation of one stream, zero-delay self-pairs excluded.
pub fn correlate_auto(a: &TimeTagStream, bin: f64, window: f64) -> Result<CorrelationHistogram> {
    check_sorted("a", a.timestamps())?;
    let mut h = CorrelationHistogram::empty(bin, window)?;
    accumulate(&mut h, a.timestamps(), a.timestamps(), true);
    Ok(finish(h, a, a))
}

/// Start-stop variant: each start on `a` is paired only with the first stop
/// on `b` inside the window.
pub fn correlate_start_stop(a: &TimeTagStream, b: &TimeTagStream, bin: f64, window: f64) -> Result<CorrelationHistogram> {
    check_sorted("a", a.timestamps())?;
    check_sorted("b", b.timestamps())?;
    let mut h = CorrelationHistogram::empty(bin, window)?;
    let reach = h.reach_ps();
    let tb = b.timestamps();
    let mut lo = 0usize;
    for &ta in a.timestamps() {
        while lo < tb.len() && tb[lo] + reach < ta {
            lo += 1;
        }
        if lo < tb.len() && tb[lo] < ta + reach {
            if let Some(k) = h.index(tb[lo] as i64 - ta as i64) {
                h.counts[k] += 1;
            }
        }
    }
    Ok(finish(h, a, b))
}

/// O(n·m) reference implementation.
pub fn correlate_brute_force(a: &TimeTagStream, b: &TimeTagStream, bin: f64, window: f64) -> Result<CorrelationHistogram> {
    let mut h = CorrelationHistogram::empty(bin, window)?;
    for &ta in a.timestamps() {
        for &tb in b.timestamps() {
            if let Some(k) = h.index(tb as i64 - ta as i64) {
                h.counts[k] += 1;
            }
        }
    }
    Ok(finish(h, a, b))
}

/// [`correlate`] split into `shards` time segments of `a`, each paired with
/// the slice of `b` it can reach, run in parallel and merged.
pub fn correlate_sharded(
    a: &TimeTagStream,
    b: &TimeTagStream,
    bin: f64,
    window: f64,
    shards: usize,
) -> Result<CorrelationHistogram> {
    let (ta, tb) = (a.timestamps(), b.timestamps());
    check_sorted("a", ta)?;
    check_sorted("b", tb)?;
    let template = CorrelationHistogram::empty(bin, window)?;
    let reach = template.reach_ps();
    let span = a.duration_ps().max(b.duration_ps());
    let shards = shards.max(1) as u64;
    let parts: Vec<CorrelationHistogram> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let (start, end) = (span * s / shards, span * (s + 1) / shards);
            let seg_a = &ta[ta.partition_point(|&t| t < start)..ta.partition_point(|&t| t < end)];
            let b_lo = tb.partition_point(|&t| t + reach < start);
            let b_hi = tb.partition_point(|&t| t < end.saturating_add(reach));
            let mut h = template.clone();
            accumulate(&mut h, seg_a, &tb[b_lo..b_hi], false);
            h
        })
        .collect();
    let mut out = template;
    for p in &parts {
        for (c, x) in out.counts.iter_mut().zip(&p.counts) {
            *c += x;
        }
    }
    Ok(finish(out, a, b))
}

/// One row of a normalised histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Bin {
    pub tau_ns: f64,
    pub counts: u64,
    pub g2: f64,
    pub g2_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Curve {
    pub bin_width_ns: f64,
    pub bins: Vec<G2Bin>,
}

/// g²(τ_k) = N_k·T / (S_a·S_b·Δτ), error √N_k on the same scale.
pub fn normalize(h: &CorrelationHistogram) -> Result<G2Curve> {
    if h.singles_a == 0 || h.singles_b == 0 {
        return Err(Error::domain("singles", "both channels need at least one count"));
    }
    if h.duration_ps == 0 {
        return Err(Error::domain("duration", "must be positive"));
    }
    let scale = h.duration_ps as f64 / (h.singles_a as f64 * h.singles_b as f64 * h.bin_width_ps as f64);
    let bins = h
        .counts
        .iter()
        .enumerate()
        .map(|(k, &n)| G2Bin {
            tau_ns: h.tau_ns(k),
            counts: n,
            g2: n as f64 * scale,
            g2_err: (n as f64).sqrt() * scale,
        })
        .collect();
    Ok(G2Curve {
        bin_width_ns: h.bin_width_ps as f64 * 1e-3,
        bins,
    })
}

impl G2Curve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_ns,counts,g2,g2_err\n");
        for b in &self.bins {
            let _ = writeln!(out, "{},{},{},{}", b.tau_ns, b.counts, b.g2, b.g2_err);
        }
        out
    }

    /// Mean of g² and g² at −τ, for the non-negative half of the curve.
    pub fn symmetrized(&self) -> Vec<(f64, f64)> {
        let n = self.bins.len();
        (n / 2..n)
            .map(|k| (self.bins[k].tau_ns, 0.5 * (self.bins[k].g2 + self.bins[n - 1 - k].g2)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Mean g² over the `zero_bins` bins on each side of τ = 0, with the counting
/// error of the pooled coincidences.
pub fn g2_zero_estimate(curve: &G2Curve, zero_bins: usize) -> Result<Estimate> {
    let half = curve.bins.len() / 2;
    if zero_bins == 0 || zero_bins > half {
        return Err(Error::domain("zero_bins", format!("must lie in 1..={half}")));
    }
    let sel = &curve.bins[half - zero_bins..half + zero_bins];
    let m = sel.len() as f64;
    Ok(Estimate {
        value: sel.iter().map(|b| b.g2).sum::<f64>() / m,
        error: sel.iter().map(|b| b.g2_err * b.g2_err).sum::<f64>().sqrt() / m,
    })
}

/// First-order slit scan and its fitted fringe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    /// m
    pub positions: Vec<f64>,
    /// counts/s
    pub intensities: Vec<f64>,
    pub fitted_amplitude: f64,
    pub fitted_visibility: f64,
    /// m
    pub fitted_period: f64,
    /// m, position of a fringe maximum
    pub fitted_offset: f64,
    /// standard errors of (period, offset), m
    pub fit_errors: (f64, f64),
    pub visibility_error: f64,
    pub residual_rms: f64,
}

const MIN_VISIBILITY: f64 = 0.05;

fn fringe_model(p: &Vector4<f64>, x: f64) -> (f64, Vector4<f64>) {
    let (a, v, l, x0) = (p[0], p[1], p[2], p[3]);
    let arg = TAU * (x - x0) / l;
    let (s, c) = arg.sin_cos();
    let f = a * (1.0 + v * c);
    let grad = Vector4::new(1.0 + v * c, a * c, a * v * s * arg / l, a * v * s * TAU / l);
    (f, grad)
}

fn ssr(p: &Vector4<f64>, x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&xi, &yi)| (yi - fringe_model(p, xi).0).powi(2)).sum()
}

/// Levenberg–Marquardt from `p`; returns the parameters and final SSR.
fn levenberg_marquardt(mut p: Vector4<f64>, x: &[f64], y: &[f64]) -> Option<(Vector4<f64>, f64)> {
    let mut cost = ssr(&p, x, y);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (&xi, &yi) in x.iter().zip(y) {
            let (f, g) = fringe_model(&p, xi);
            jtj += g * g.transpose();
            jtr += g * (yi - f);
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for i in 0..4 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let trial_cost = if trial[2] > 0.0 { ssr(&trial, x, y) } else { f64::INFINITY };
            if trial_cost <= cost {
                let rel = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                let small = step.iter().zip(trial.iter()).all(|(d, q)| d.abs() <= 1e-12 * q.abs().max(1e-300));
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                if rel < 1e-15 || small || cost == 0.0 {
                    return Some((p, cost));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            return Some((p, cost));
        }
    }
    p.iter().all(|v| v.is_finite()).then_some((p, cost))
}

/// Fit I(x) = A(1 + V cos(2π(x − x₀)/L)) to a scan (positions in m).
pub fn fringe_fit(positions: &[f64], intensities: &[f64]) -> Result<FringeScan> {
    let n = positions.len();
    if n != intensities.len() {
        return Err(Error::domain("fringe scan", "positions and intensities differ in length"));
    }
    if n < 5 {
        return Err(Error::domain("fringe scan", "at least 5 positions are required"));
    }
    if positions.iter().chain(intensities).any(|v| !v.is_finite()) {
        return Err(Error::domain("fringe scan", "non-finite value"));
    }
    let lo = positions.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = positions.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return Err(Error::domain("fringe scan", "positions must not coincide"));
    }
    let mean = intensities.iter().sum::<f64>() / n as f64;
    if !(mean > 0.0) {
        return Err(Error::LowContrast { visibility: 0.0 });
    }

    // Fourier peak over periods from 2·span down to the sampling limit
    let f_min = 0.5 / span;
    let f_max = ((n - 1) as f64 / (2.0 * span)).max(2.0 * f_min);
    let grid = 4000;
    let mut best = (0.0, f_min, 0.0);
    for i in 0..=grid {
        let f = f_min + (f_max - f_min) * i as f64 / grid as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (&x, &y) in positions.iter().zip(intensities) {
            let (s, c) = (TAU * f * x).sin_cos();
            re += (y - mean) * c;
            im -= (y - mean) * s;
        }
        let power = re * re + im * im;
        if power > best.0 {
            best = (power, f, im.atan2(re));
        }
    }
    let (power, f0, phase) = best;
    if power == 0.0 {
        return Err(Error::LowContrast { visibility: 0.0 });
    }
    let v0 = (2.0 * power.sqrt() / n as f64 / mean).min(1.0);
    let mut fit: Option<(Vector4<f64>, f64)> = None;
    for scale in [1.0, 0.8, 1.25, 0.6, 1.6] {
        let f = f0 * scale;
        let start = Vector4::new(mean, v0, 1.0 / f, -phase / (TAU * f0));
        if let Some((p, c)) = levenberg_marquardt(start, positions, intensities) {
            if fit.as_ref().map_or(true, |(_, best)| c < *best) {
                fit = Some((p, c));
            }
        }
    }
    let (mut p, cost) = fit.ok_or(Error::Convergence {
        what: "fringe fit",
        detail: "no starting point converged".into(),
    })?;
    if p[1] < 0.0 {
        p[1] = -p[1];
        p[3] += p[2] / 2.0;
    }
    if p[1] < MIN_VISIBILITY {
        return Err(Error::LowContrast { visibility: p[1] });
    }
    let centre = 0.5 * (lo + hi);
    p[3] = centre + (p[3] - centre + p[2] / 2.0).rem_euclid(p[2]) - p[2] / 2.0;

    let mut jtj = Matrix4::<f64>::zeros();
    for &x in positions {
        let g = fringe_model(&p, x).1;
        jtj += g * g.transpose();
    }
    let dof = (n as f64 - 4.0).max(1.0);
    let cov = jtj.try_inverse().ok_or(Error::Convergence {
        what: "fringe fit",
        detail: "singular normal matrix".into(),
    })? * (cost / dof);
    let err = |i: usize| cov[(i, i)].max(0.0).sqrt();
    Ok(FringeScan {
        positions: positions.to_vec(),
        intensities: intensities.to_vec(),
        fitted_amplitude: p[0],
        fitted_visibility: p[1],
        fitted_period: p[2],
        fitted_offset: p[3],
        fit_errors: (err(2), err(3)),
        visibility_error: err(1),
        residual_rms: (cost / n as f64).sqrt(),
    })
}
