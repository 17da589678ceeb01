//! The `ihbt` command line.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::contrast::{compose_prediction, g2_visibility, ContrastModel, ContrastParams, PredictionCurve, PredictionPoint};
use crate::correlator::{
    correlate, correlate_brute_force, correlate_start_stop, fringe_fit, g2_zero_estimate, normalize,
    CorrelationHistogram, Estimate, G2Curve,
};
use crate::error::{Error, Result};
use crate::geometry::slit_to_phase;
use crate::manifest::{write_atomic, write_json, RunManifest};
use crate::stream::{accelerated, run_campaign, simulate_fringe, TimeTagStream};

#[derive(Debug, Parser)]
#[command(name = "ihbt", version, about = "Photon correlations of a driven two-ion crystal")]
pub struct Cli {
    /// TOML configuration (built-in reference parameters when omitted)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, env = "IHBT_SEED", default_value_t = 1)]
    pub seed: u64,

    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predicted g²(0) across a slit scan
    Predict(PredictArgs),
    /// Simulate detector time tags at one slit position
    Simulate(SimulateArgs),
    /// Correlate two time-tag files into a g²(τ) histogram
    Correlate(CorrelateArgs),
    /// Simulate and correlate a list of slit positions
    Scan(ScanArgs),
    /// Simulate and fit a first-order fringe scan
    Fringe(FringeArgs),
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// start:stop:step in mm
    #[arg(long, default_value = "-1.5:1.5:0.05", allow_hyphen_values = true)]
    pub range: String,
    /// Write the ideal curve (no motion, slit or detector effects) as the main output
    #[arg(long)]
    pub ideal: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Slit position, mm
    #[arg(long, allow_hyphen_values = true)]
    pub position: f64,
    /// Simulated time, s
    #[arg(long)]
    pub duration: f64,
    /// Axial trap frequency in kHz, overriding the configured crystal
    #[arg(long)]
    pub axial_frequency: Option<f64>,
    /// Raise the collection weight to this value, drop dead time and scale
    /// the dark rate with the signal (same predicted g², far shorter runs)
    #[arg(long)]
    pub accelerate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    pub stream_a: PathBuf,
    pub stream_b: PathBuf,
    /// Bin width, ns (default from config)
    #[arg(long)]
    pub bin: Option<f64>,
    /// Half-width of the delay window, ns (default from config)
    #[arg(long)]
    pub window: Option<f64>,
    /// Also run the brute-force correlator and fail on any difference
    #[arg(long)]
    pub oracle: bool,
    /// Count only the first stop after each start
    #[arg(long)]
    pub start_stop: bool,
    /// Bins on each side of τ = 0 for the g²(0) estimate
    #[arg(long, default_value_t = 1)]
    pub zero_bins: usize,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Slit positions, mm (comma separated)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub positions: Vec<f64>,
    /// Simulated time per position, s
    #[arg(long)]
    pub duration: f64,
    #[arg(long)]
    pub axial_frequency: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub zero_bins: usize,
    /// Raise the collection weight to this value, drop dead time and scale
    /// the dark rate with the signal (same predicted g², far shorter runs)
    #[arg(long)]
    pub accelerate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FringeArgs {
    /// Slit positions, mm (comma separated)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "range")]
    pub positions: Vec<f64>,
    /// start:stop:step in mm
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
    /// Integration time per position, s
    #[arg(long, default_value_t = 60.0)]
    pub integration: f64,
}

/// Parse `start:stop:step` (mm) into slit positions in metres.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::Usage(format!("range `{text}` is not start:stop:step in mm"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::Usage(format!("range `{text}` is empty")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| (start + step * i as f64) * 1e-3).collect())
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        None => Ok(ExperimentConfig::reference()),
        Some(p) => ExperimentConfig::load(p).map_err(|e| match e {
            Error::Io { path, source } => Error::config("--config", format!("{}: {source}", path.display())),
            other => other,
        }),
    }
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let command: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, command: Vec<String>) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Usage("--threads must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut config = load_config(cli.config.as_deref())?;
    let weight = match &cli.command {
        Command::Simulate(a) => a.accelerate,
        Command::Scan(a) => a.accelerate,
        _ => None,
    };
    if let Some(w) = weight {
        config = accelerated(&config, w)?;
    }
    let mut manifest = RunManifest::begin(config.hash(), cli.seed, command);
    let out = cli.out.as_path();
    let written = match &cli.command {
        Command::Predict(a) => predict(&config, a, out)?,
        Command::Simulate(a) => simulate(&config, a, cli.seed, out)?,
        Command::Correlate(a) => correlate_files(&config, a, out)?,
        Command::Scan(a) => scan(&config, a, cli.seed, out)?,
        Command::Fringe(a) => fringe(&config, a, cli.seed, out)?,
    };
    for p in &written {
        manifest.record(p)?;
    }
    manifest.finish(out)?;
    Ok(())
}

fn curve_files(curve: &PredictionCurve, out: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let csv = out.join(format!("{stem}.csv"));
    let json = out.join(format!("{stem}.json"));
    write_atomic(&csv, curve.to_csv().as_bytes())?;
    write_json(&json, curve)?;
    Ok(vec![csv, json])
}

fn formula_curve(config: &ExperimentConfig, xs: &[f64], visibility: f64) -> Result<PredictionCurve> {
    let s = ContrastParams::from_config(config)?.saturation;
    let points = xs
        .iter()
        .map(|&x| {
            let delta = slit_to_phase(&config.geometry, x);
            let g = g2_visibility(s, delta, visibility)?;
            Ok(PredictionPoint {
                slit_mm: x * 1e3,
                delta_rad: delta,
                g2: g,
                band_low: g,
                band_high: g,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PredictionCurve {
        config_hash: config.hash(),
        points,
        fringe_extremes: Some((g2_visibility(s, PI, visibility)?, g2_visibility(s, 0.0, visibility)?)),
    })
}

fn predict(config: &ExperimentConfig, args: &PredictArgs, out: &Path) -> Result<Vec<PathBuf>> {
    let xs = parse_range(&args.range)?;
    let ideal = formula_curve(config, &xs, 1.0)?;
    let visibility = formula_curve(config, &xs, config.motion.debye_waller_visibility)?;
    let main = if args.ideal { ideal.clone() } else { compose_prediction(config, &xs)? };
    let mut files = curve_files(&main, out, "prediction")?;
    files.extend(curve_files(&ideal, out, "prediction_ideal")?);
    files.extend(curve_files(&visibility, out, "prediction_visibility")?);
    if let (Some(max), Some(min)) = (main.max(), main.min()) {
        println!(
            "scan: g2(0) max {:.4} at {:.3} mm, min {:.4} at {:.3} mm",
            max.g2, max.slit_mm, min.g2, min.slit_mm
        );
    }
    if let Some((at_pi, at_zero)) = main.fringe_extremes {
        println!("fringe: g2(0) {at_pi:.4} at δ = π, {at_zero:.4} at δ = 0");
    }
    Ok(files)
}

fn check_duration(duration: f64) -> Result<()> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::Usage(format!("duration must be positive, got {duration}")));
    }
    Ok(())
}

fn simulate(config: &ExperimentConfig, args: &SimulateArgs, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    check_duration(args.duration)?;
    let axial = args.axial_frequency.map(|khz| TAU * khz * 1e3);
    let runs = run_campaign(config, &[args.position * 1e-3], args.duration, seed, axial, Some(out))?;
    let run = &runs[0];
    println!(
        "δ = {:.4} rad: {} tags on A, {} on B",
        run.delta,
        run.streams[0].len(),
        run.streams[1].len()
    );
    Ok(run.files.clone())
}

#[derive(serde::Serialize)]
struct HistogramReport<'a> {
    histogram: &'a CorrelationHistogram,
    g2: &'a G2Curve,
    g2_zero: Estimate,
    zero_bins: usize,
    start_stop: bool,
}

fn histogram_files(
    h: &CorrelationHistogram,
    zero_bins: usize,
    start_stop: bool,
    out: &Path,
    stem: &str,
) -> Result<(Vec<PathBuf>, Estimate)> {
    let g = normalize(h)?;
    let zero = g2_zero_estimate(&g, zero_bins).map_err(|e| Error::Usage(e.to_string()))?;
    let csv = out.join(format!("{stem}.csv"));
    let json = out.join(format!("{stem}.json"));
    write_atomic(&csv, g.to_csv().as_bytes())?;
    write_json(
        &json,
        &HistogramReport {
            histogram: h,
            g2: &g,
            g2_zero: zero,
            zero_bins,
            start_stop,
        },
    )?;
    Ok((vec![csv, json], zero))
}

fn correlate_files(config: &ExperimentConfig, args: &CorrelateArgs, out: &Path) -> Result<Vec<PathBuf>> {
    let bin = args.bin.map_or(config.detectors.bin_width, |ns| ns * 1e-9);
    let window = args.window.map_or(config.detectors.correlation_window, |ns| ns * 1e-9);
    if !(bin > 0.0) || !(window >= bin) {
        return Err(Error::Usage("need bin > 0 and window >= bin".into()));
    }
    let a = TimeTagStream::read(&args.stream_a)?;
    let b = TimeTagStream::read(&args.stream_b)?;
    let h = if args.start_stop {
        correlate_start_stop(&a, &b, bin, window)?
    } else {
        correlate(&a, &b, bin, window)?
    };
    if args.oracle {
        if args.start_stop {
            return Err(Error::Usage("--oracle compares multi-stop counting only".into()));
        }
        let reference = correlate_brute_force(&a, &b, bin, window)?;
        if reference != h {
            let first = h.counts.iter().zip(&reference.counts).position(|(x, y)| x != y);
            return Err(Error::OracleMismatch(format!("first differing bin: {first:?}")));
        }
        println!("oracle: identical");
    }
    let (files, zero) = histogram_files(&h, args.zero_bins, args.start_stop, out, "histogram")?;
    println!("g2(0) = {:.4} ± {:.4}", zero.value, zero.error);
    Ok(files)
}

fn scan(config: &ExperimentConfig, args: &ScanArgs, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    check_duration(args.duration)?;
    let xs: Vec<f64> = args.positions.iter().map(|mm| mm * 1e-3).collect();
    let axial = args.axial_frequency.map(|khz| TAU * khz * 1e3);
    let runs = run_campaign(config, &xs, args.duration, seed, axial, Some(out))?;
    let model = ContrastModel::from_config(config)?;
    let bands = if axial.is_none() { Some(compose_prediction(config, &xs)?) } else { None };
    let d = &config.detectors;
    let mut files = Vec::new();
    let mut table = String::from("slit_mm,delta_rad,g2_zero,g2_err,predicted,band_low,band_high,singles_a,singles_b\n");
    for (i, run) in runs.iter().enumerate() {
        files.extend(run.files.iter().cloned());
        let h = correlate(&run.streams[0], &run.streams[1], d.bin_width, d.correlation_window)?;
        let (hist_files, zero) = histogram_files(&h, args.zero_bins, false, out, &format!("pos{i:02}_histogram"))?;
        files.extend(hist_files);
        let (predicted, lo, hi) = match &bands {
            Some(b) => {
                let p = &b.points[i];
                (p.g2, p.band_low, p.band_high)
            }
            None => {
                let g = model.g2_zero(run.delta)?;
                (g, g, g)
            }
        };
        table.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            run.slit_position * 1e3,
            run.delta,
            zero.value,
            zero.error,
            predicted,
            lo,
            hi,
            run.streams[0].len(),
            run.streams[1].len()
        ));
        println!(
            "{:+.3} mm  δ = {:+.3}  g2(0) = {:.3} ± {:.3}  predicted {:.3}",
            run.slit_position * 1e3,
            run.delta,
            zero.value,
            zero.error,
            predicted
        );
    }
    let summary = out.join("scan_summary.csv");
    write_atomic(&summary, table.as_bytes())?;
    files.push(summary);
    Ok(files)
}

fn fringe(config: &ExperimentConfig, args: &FringeArgs, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    let xs: Vec<f64> = match &args.range {
        Some(r) => parse_range(r)?,
        None => args.positions.iter().map(|mm| mm * 1e-3).collect(),
    };
    if xs.len() < 5 {
        return Err(Error::Usage(format!("a fringe scan needs at least 5 positions, got {}", xs.len())));
    }
    check_duration(args.integration)?;
    let counts = simulate_fringe(config, &xs, args.integration, seed)?;
    let rates: Vec<f64> = counts.iter().map(|&n| n as f64 / args.integration).collect();
    let scan = fringe_fit(&xs, &rates)?;
    let path = out.join("fringe.json");
    write_json(&path, &scan)?;
    println!(
        "L = {:.4} ± {:.4} mm, x0 = {:.4} ± {:.4} mm, V = {:.3}",
        scan.fitted_period * 1e3,
        scan.fit_errors.0 * 1e3,
        scan.fitted_offset * 1e3,
        scan.fit_errors.1 * 1e3,
        scan.fitted_visibility
    );
    Ok(vec![path])
}
