//! Monte Carlo wavefunction unraveling with an explicit detected channel.

use nalgebra::Matrix2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::rng::{stream_rng, Domain};
use crate::config::SlitModel;
use crate::contrast::gauss_legendre;
use crate::engine::{ChannelKind, CMatrix, QuantumSystem, C64};
use crate::error::{Error, Result};
use crate::geometry::DetectionDirection;

const PS: f64 = 1e-12;
/// Slit quadrature nodes used when each photon samples its own slit point.
const TWO_POINT_NODES: usize = 8;

/// Slow phase fluctuations between the two emitters as seen through the slit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhaseNoise {
    /// Gaussian motional phase spread (rad); e^{−σ²/2} is the Debye–Waller visibility.
    pub motion_sigma: f64,
    pub slit_width_phase: f64,
    pub slit: SlitModel,
    /// Length of a segment with frozen phases, s.
    pub coherence_time: f64,
}

impl PhaseNoise {
    pub fn none() -> Self {
        Self {
            motion_sigma: 0.0,
            slit_width_phase: 0.0,
            slit: SlitModel::Collinear,
            coherence_time: 1e-6,
        }
    }

    pub fn from_visibility(visibility: f64, slit_width_phase: f64, slit: SlitModel, coherence_time: f64) -> Result<Self> {
        if !(visibility > 0.0 && visibility <= 1.0) {
            return Err(Error::domain("debye_waller_visibility", "must lie in (0, 1] for simulation"));
        }
        Ok(Self {
            motion_sigma: (-2.0 * visibility.ln()).sqrt(),
            slit_width_phase,
            slit,
            coherence_time,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRunSpec {
    pub seed: u64,
    /// s
    pub duration: f64,
    pub direction: DetectionDirection,
    pub collection_weight: f64,
    pub noise: PhaseNoise,
    /// s
    pub chunk_duration: f64,
    /// s, discarded at the start of each chunk
    pub burn_in: f64,
    /// Separates the random streams of runs sharing a seed.
    pub run_index: u64,
}

impl TrajectoryRunSpec {
    fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::domain("duration", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.collection_weight) {
            return Err(Error::config("simulation.collection_weight", "must lie in [0, 1]"));
        }
        if !(self.chunk_duration > 0.0) {
            return Err(Error::config("simulation.chunk_duration", "must be positive"));
        }
        if !(self.noise.coherence_time > 0.0) {
            return Err(Error::config("simulation.coherence_time", "must be positive"));
        }
        Ok(())
    }
}

/// One jump operator written as Σᵢ cᵢ σ̂ᵢ over the per-ion emission operators.
#[derive(Debug, Clone, Copy)]
struct EmissionChannel {
    coeffs: [C64; 2],
    rate: f64,
    detected: bool,
}

/// Detected plus residual emission channels at one phase offset.
fn emission_channels(
    ion_count: usize,
    gamma: f64,
    weight: f64,
    phases: &[(f64, f64)],
) -> Result<Vec<EmissionChannel>> {
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(phases.len() + 2);
    if ion_count == 1 {
        let rest = gamma * (1.0 - weight);
        if rest < -1e-12 * gamma {
            return Err(Error::config("simulation.collection_weight", "exceeds 1 for a single emitter"));
        }
        out.push(EmissionChannel { coeffs: [one, zero], rate: gamma * weight, detected: true });
        out.push(EmissionChannel { coeffs: [one, zero], rate: rest.max(0.0), detected: false });
        return Ok(out);
    }
    let mut m = Matrix2::<C64>::identity() * C64::new(gamma, 0.0);
    for &(phase, w) in phases {
        let u = [one, C64::from_polar(1.0, phase)];
        let r = gamma * weight * w;
        out.push(EmissionChannel { coeffs: u, rate: r, detected: true });
        for i in 0..2 {
            for j in 0..2 {
                m[(i, j)] -= u[i] * u[j].conj() * r;
            }
        }
    }
    let eig = m.symmetric_eigen();
    for k in 0..2 {
        let lambda = eig.eigenvalues[k];
        if lambda < -1e-12 * gamma {
            return Err(Error::config(
                "simulation.collection_weight",
                format!("residual channel rate {lambda:e} < 0; collection weight too large (limit 0.5 for two ions)"),
            ));
        }
        let v = eig.eigenvectors.column(k);
        out.push(EmissionChannel {
            coeffs: [v[0], v[1]],
            rate: lambda.max(0.0),
            detected: false,
        });
    }
    Ok(out)
}

/// Row-major dense matrix for fast small mat-vec products.
#[derive(Debug, Clone)]
struct Dense {
    n: usize,
    data: Vec<C64>,
}

impl Dense {
    fn from(m: &CMatrix) -> Self {
        let n = m.nrows();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(m[(i, j)]);
            }
        }
        Self { n, data }
    }

    fn apply(&self, v: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Everything needed to unravel one system; immutable and shared across chunks.
#[derive(Debug)]
pub struct Unraveling {
    dim: usize,
    ion_count: usize,
    /// e^{−i H_eff 2^k ps}, k = 0..=top
    steps: Vec<Dense>,
    lowering: Vec<Dense>,
    emission_rate: f64,
    other: Vec<(Dense, f64)>,
    base_phase: f64,
    weight: f64,
    noise: PhaseNoise,
    slit_nodes: Vec<(f64, f64)>,
}

impl Unraveling {
    pub fn new(system: &QuantumSystem, direction: &DetectionDirection, weight: f64, noise: PhaseNoise) -> Result<Self> {
        let dim = system.dim();
        let ion_count = system.ion_count();
        let mut emission_rate: Option<f64> = None;
        let mut other = Vec::new();
        let mut decay = CMatrix::zeros(dim, dim);
        for ch in system.channels() {
            decay += ch.operator.adjoint() * &ch.operator * C64::new(ch.rate, 0.0);
            match ch.kind {
                ChannelKind::Emission { .. } => {
                    if let Some(r) = emission_rate {
                        if (r - ch.rate).abs() > 1e-12 * r {
                            return Err(Error::domain("emission rates", "ions must decay at equal rates"));
                        }
                    }
                    emission_rate = Some(ch.rate);
                }
                _ => other.push((Dense::from(&ch.operator), ch.rate)),
            }
        }
        let emission_rate = emission_rate.ok_or_else(|| Error::domain("system", "no emission channel"))?;
        let h_eff = system.hamiltonian() - decay * C64::new(0.0, 0.5);

        let unit = system.rate_unit();
        let top = ((20.0 / unit / PS).log2().ceil() as usize).clamp(4, 40);
        let steps = (0..=top)
            .map(|k| {
                let dt = PS * (1u64 << k) as f64;
                Dense::from(&(&h_eff * C64::new(0.0, -dt)).exp())
            })
            .collect();
        let lowering = (0..ion_count).map(|i| Dense::from(system.lowering(i))).collect();

        let slit_nodes = match noise.slit {
            SlitModel::TwoPoint if noise.slit_width_phase > 0.0 => gauss_legendre(TWO_POINT_NODES)
                .into_iter()
                .map(|(x, w)| (x * noise.slit_width_phase / 2.0, w))
                .collect(),
            _ => vec![(0.0, 1.0)],
        };
        let out = Self {
            dim,
            ion_count,
            steps,
            lowering,
            emission_rate,
            other,
            base_phase: direction.phase,
            weight,
            noise,
            slit_nodes,
        };
        // constructive feasibility check at the nominal phase
        out.channels_at(0.0)?;
        Ok(out)
    }

    fn channels_at(&self, offset: f64) -> Result<Vec<EmissionChannel>> {
        let phases: Vec<(f64, f64)> = self
            .slit_nodes
            .iter()
            .map(|&(u, w)| (self.base_phase + offset + u, w))
            .collect();
        emission_channels(self.ion_count, self.emission_rate, self.weight, &phases)
    }

    /// Full jump-operator list at a phase offset, for checking the dissipator.
    pub fn jump_operators(&self, offset: f64) -> Result<Vec<(CMatrix, f64, bool)>> {
        let mut out = Vec::new();
        let lower: Vec<CMatrix> = (0..self.ion_count)
            .map(|i| {
                let d = &self.lowering[i];
                CMatrix::from_row_slice(d.n, d.n, &d.data)
            })
            .collect();
        for ch in self.channels_at(offset)? {
            let mut op = CMatrix::zeros(self.dim, self.dim);
            for (i, l) in lower.iter().enumerate() {
                op += l * ch.coeffs[i];
            }
            out.push((op, ch.rate, ch.detected));
        }
        for (d, r) in &self.other {
            out.push((CMatrix::from_row_slice(d.n, d.n, &d.data), *r, false));
        }
        Ok(out)
    }

    /// Phase offset (motion + common slit point) frozen during `segment`.
    fn segment_offset(&self, rng: &mut ChaCha8Rng, segment: u64) -> f64 {
        rng.set_word_pos(segment as u128 * 16);
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let normal = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        let slit = match self.noise.slit {
            SlitModel::Collinear => self.noise.slit_width_phase * (u3 - 0.5),
            SlitModel::TwoPoint => 0.0,
        };
        self.noise.motion_sigma * normal + slit
    }

    /// Detected emission times (ps from `start_ps`) over one chunk.
    pub fn run_chunk(&self, seed: u64, run_index: u64, chunk: u64, start_ps: u64, len_ps: u64, burn_ps: u64, coherence_ps: u64) -> Result<ChunkResult> {
        let key = (run_index << 24) | chunk;
        let mut jumps = stream_rng(seed, Domain::Jumps, key);
        let mut phases = stream_rng(seed, Domain::Phases, run_index);
        let dim = self.dim;
        let mut psi = vec![C64::new(0.0, 0.0); dim];
        psi[0] = C64::new(1.0, 0.0);
        let mut tmp = vec![C64::new(0.0, 0.0); dim];
        let mut kicks: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); dim]; self.ion_count];
        let end = burn_ps + len_ps;
        let top = self.steps.len() - 1;
        let mut t: u64 = 0;
        let mut detected = Vec::new();
        let mut emitted = 0u64;
        let mut cached: Option<(Option<u64>, Vec<EmissionChannel>)> = None;
        loop {
            let r: f64 = 1.0 - jumps.random::<f64>();
            // coarse steps while the norm stays above r
            loop {
                if t >= end {
                    return Ok(ChunkResult { detected, emitted });
                }
                self.steps[top].apply(&psi, &mut tmp);
                if norm2(&tmp) > r {
                    std::mem::swap(&mut psi, &mut tmp);
                    t += 1 << top;
                } else {
                    break;
                }
            }
            for k in (0..top).rev() {
                self.steps[k].apply(&psi, &mut tmp);
                if norm2(&tmp) > r {
                    std::mem::swap(&mut psi, &mut tmp);
                    t += 1 << k;
                }
            }
            self.steps[0].apply(&psi, &mut tmp);
            std::mem::swap(&mut psi, &mut tmp);
            t += 1;
            if t >= end {
                return Ok(ChunkResult { detected, emitted });
            }

            // absolute segment index so phases do not depend on chunking;
            // the unconditional dynamics do not care about the burn-in phase
            let segment = (t >= burn_ps).then(|| (start_ps + t - burn_ps) / coherence_ps);
            if cached.as_ref().map(|c| c.0) != Some(segment) {
                let offset = match segment {
                    Some(s) => self.segment_offset(&mut phases, s),
                    None => 0.0,
                };
                cached = Some((segment, self.channels_at(offset)?));
            }
            let channels = &cached.as_ref().expect("cached channels").1;

            for (i, l) in self.lowering.iter().enumerate() {
                l.apply(&psi, &mut kicks[i]);
            }
            let mut weights: Vec<f64> = Vec::with_capacity(channels.len() + self.other.len());
            for ch in channels.iter() {
                let mut acc = 0.0;
                for a in 0..dim {
                    let mut z = C64::new(0.0, 0.0);
                    for (i, kick) in kicks.iter().enumerate() {
                        z += ch.coeffs[i] * kick[a];
                    }
                    acc += z.norm_sqr();
                }
                weights.push(ch.rate * acc);
            }
            for (d, rate) in &self.other {
                d.apply(&psi, &mut tmp);
                weights.push(rate * norm2(&tmp));
            }
            let total: f64 = weights.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Convergence {
                    what: "trajectory",
                    detail: "jump with zero total channel weight".into(),
                });
            }
            let mut pick = jumps.random::<f64>() * total;
            let mut chosen = weights.len() - 1;
            for (k, w) in weights.iter().enumerate() {
                if pick < *w {
                    chosen = k;
                    break;
                }
                pick -= w;
            }
            if chosen < channels.len() {
                let ch = channels[chosen];
                for a in 0..dim {
                    let mut z = C64::new(0.0, 0.0);
                    for (i, kick) in kicks.iter().enumerate() {
                        z += ch.coeffs[i] * kick[a];
                    }
                    psi[a] = z;
                }
                if t >= burn_ps {
                    emitted += 1;
                    if ch.detected {
                        detected.push(start_ps + t - burn_ps);
                    }
                }
            } else {
                let (d, _) = &self.other[chosen - channels.len()];
                d.apply(&psi, &mut tmp);
                std::mem::swap(&mut psi, &mut tmp);
            }
            let n = norm2(&psi).sqrt();
            for z in psi.iter_mut() {
                *z /= n;
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ChunkResult {
    pub detected: Vec<u64>,
    /// All photons scattered after burn-in (detected or not).
    pub emitted: u64,
}

/// Detected emission events over `spec.duration`, in picoseconds.
#[derive(Debug, Clone)]
pub struct EmissionRecord {
    pub events: Vec<u64>,
    pub emitted: u64,
    pub duration_ps: u64,
}

/// Run independent trajectory chunks (in parallel) and merge them in chunk order.
pub fn run_trajectory(system: &QuantumSystem, spec: &TrajectoryRunSpec) -> Result<EmissionRecord> {
    spec.validate()?;
    let unravel = Unraveling::new(system, &spec.direction, spec.collection_weight, spec.noise)?;
    let duration_ps = (spec.duration / PS).round() as u64;
    let chunk_ps = ((spec.chunk_duration / PS).round() as u64).max(1);
    let burn_ps = (spec.burn_in / PS).round() as u64;
    let coherence_ps = ((spec.noise.coherence_time / PS).round() as u64).max(1);
    let chunks = duration_ps.div_ceil(chunk_ps);
    let results: Vec<Result<ChunkResult>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * chunk_ps;
            let len = chunk_ps.min(duration_ps - start);
            unravel.run_chunk(spec.seed, spec.run_index, c, start, len, burn_ps, coherence_ps)
        })
        .collect();
    let mut events = Vec::new();
    let mut emitted = 0;
    for r in results {
        let r = r?;
        emitted += r.emitted;
        events.extend(r.detected);
    }
    Ok(EmissionRecord {
        events,
        emitted,
        duration_ps,
    })
}
