use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{AtomParams, LaserParams};
use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub(crate) const GROUND: usize = 0;
pub(crate) const EXCITED: usize = 1;
pub(crate) const SHELF: usize = 2;

/// What a collapse channel does physically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChannelKind {
    /// e → g on the given ion; these photons are the observed fluorescence.
    Emission { ion: usize },
    /// e → d on the given ion (unobserved wavelength).
    Shelving { ion: usize },
    /// d → g incoherent repump on the given ion.
    Repump { ion: usize },
}

#[derive(Debug, Clone)]
pub struct CollapseChannel {
    pub operator: CMatrix,
    /// rad/s
    pub rate: f64,
    pub kind: ChannelKind,
}

/// Hamiltonian and dissipators of one or two identical emitters.
#[derive(Debug, Clone)]
pub struct QuantumSystem {
    levels_per_ion: usize,
    ion_count: usize,
    hamiltonian: CMatrix,
    channels: Vec<CollapseChannel>,
    basis_labels: Vec<String>,
    lowering: Vec<CMatrix>,
}

impl QuantumSystem {
    /// Assemble a system and check its invariants.
    pub fn new(
        levels_per_ion: usize,
        ion_count: usize,
        hamiltonian: CMatrix,
        channels: Vec<CollapseChannel>,
    ) -> Result<Self> {
        if !(levels_per_ion == 2 || levels_per_ion == 3) {
            return Err(Error::domain("levels_per_ion", "must be 2 or 3"));
        }
        if !(ion_count == 1 || ion_count == 2) {
            return Err(Error::domain("ion_count", "must be 1 or 2"));
        }
        let dim = levels_per_ion.pow(ion_count as u32);
        if hamiltonian.shape() != (dim, dim) {
            return Err(Error::domain("hamiltonian", format!("expected {dim}x{dim}")));
        }
        let scale = hamiltonian.norm().max(1.0);
        let skew = (&hamiltonian - hamiltonian.adjoint()).camax();
        if skew > 1e-12 * scale {
            return Err(Error::domain("hamiltonian", format!("not Hermitian (|H - H^+| = {skew:e})")));
        }
        for ch in &channels {
            if !(ch.rate >= 0.0) {
                return Err(Error::domain("rate", "collapse rates must be >= 0"));
            }
            if ch.operator.shape() != (dim, dim) {
                return Err(Error::domain("collapse operator", format!("expected {dim}x{dim}")));
            }
        }
        let letters = ['g', 'e', 'd'];
        let basis_labels = (0..dim)
            .map(|idx| {
                let mut label = String::new();
                let mut rest = idx;
                let mut digits = vec![0; ion_count];
                for slot in digits.iter_mut().rev() {
                    *slot = rest % levels_per_ion;
                    rest /= levels_per_ion;
                }
                for d in digits {
                    label.push(letters[d]);
                }
                label
            })
            .collect();
        let lowering = (0..ion_count)
            .map(|ion| local_operator(levels_per_ion, ion_count, ion, GROUND, EXCITED))
            .collect();
        Ok(Self {
            levels_per_ion,
            ion_count,
            hamiltonian,
            channels,
            basis_labels,
            lowering,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn levels_per_ion(&self) -> usize {
        self.levels_per_ion
    }

    pub fn ion_count(&self) -> usize {
        self.ion_count
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[CollapseChannel] {
        &self.channels
    }

    pub fn basis_labels(&self) -> &[String] {
        &self.basis_labels
    }

    /// σ̂ᵢ = |g⟩⟨e| acting on ion `ion`.
    pub fn lowering(&self, ion: usize) -> &CMatrix {
        &self.lowering[ion]
    }

    /// Index of a product state given per-ion level indices.
    pub fn basis_index(&self, levels: &[usize]) -> usize {
        levels
            .iter()
            .fold(0, |acc, &l| acc * self.levels_per_ion + l)
    }

    /// Largest total decay rate out of any level; the engine's natural rate unit.
    pub fn rate_unit(&self) -> f64 {
        let total: f64 = self
            .channels
            .iter()
            .filter(|c| matches!(c.kind, ChannelKind::Emission { ion: 0 } | ChannelKind::Shelving { ion: 0 }))
            .map(|c| c.rate)
            .sum();
        if total > 0.0 {
            total
        } else {
            self.channels.iter().map(|c| c.rate).fold(0.0, f64::max).max(1.0)
        }
    }
}

/// |to⟩⟨from| on one ion, identity elsewhere.
pub(crate) fn local_operator(
    levels: usize,
    ions: usize,
    ion: usize,
    to: usize,
    from: usize,
) -> CMatrix {
    let mut single = CMatrix::zeros(levels, levels);
    single[(to, from)] = C64::new(1.0, 0.0);
    let id = CMatrix::identity(levels, levels);
    let mut out = CMatrix::identity(1, 1);
    for i in 0..ions {
        out = out.kronecker(if i == ion { &single } else { &id });
    }
    out
}

/// Γ = 1/τ, rad/s.
pub fn decay_rate(atom: &AtomParams) -> f64 {
    1.0 / atom.excited_lifetime
}

/// Fill in whichever of saturation or Rabi frequency is missing,
/// with s = (Ω²/2)/(Δ² + Γ²/4).
pub fn saturation_conversions(laser: &LaserParams, atom: &AtomParams) -> Result<LaserParams> {
    if !(atom.excited_lifetime > 0.0) {
        return Err(Error::domain("excited_lifetime", "must be positive"));
    }
    let gamma = decay_rate(atom);
    let denom = laser.detuning * laser.detuning + gamma * gamma / 4.0;
    let mut out = laser.clone();
    match (laser.saturation, laser.rabi_frequency) {
        (Some(s), None) => {
            if !(s >= 0.0) {
                return Err(Error::domain("saturation", "must be >= 0"));
            }
            out.rabi_frequency = Some((2.0 * s * denom).sqrt());
        }
        (None, Some(omega)) => {
            out.saturation = Some(omega * omega / 2.0 / denom);
        }
        (Some(s), Some(omega)) => {
            let implied = omega * omega / 2.0 / denom;
            if (implied - s).abs() > 1e-9 * s.max(1e-12) {
                return Err(Error::domain(
                    "saturation",
                    format!("saturation {s} inconsistent with Rabi frequency (implies {implied})"),
                ));
            }
        }
        (None, None) => {
            return Err(Error::domain(
                "saturation",
                "one of saturation or rabi_frequency is required",
            ))
        }
    }
    Ok(out)
}

fn drive_hamiltonian(levels: usize, ions: usize, detuning: f64, rabi: f64) -> CMatrix {
    let dim = levels.pow(ions as u32);
    let mut h = CMatrix::zeros(dim, dim);
    for ion in 0..ions {
        let sigma = local_operator(levels, ions, ion, GROUND, EXCITED);
        let proj = local_operator(levels, ions, ion, EXCITED, EXCITED);
        h -= proj * C64::new(detuning, 0.0);
        h += (&sigma + sigma.adjoint()) * C64::new(rabi / 2.0, 0.0);
    }
    h
}

fn drive(laser: &LaserParams, atom: &AtomParams) -> Result<(f64, f64)> {
    let full = saturation_conversions(laser, atom)?;
    Ok((full.detuning, full.rabi_frequency.unwrap_or(0.0)))
}

/// Rotating-frame two-level emitters, equal drive on every ion, independent
/// spontaneous emission at Γ = 1/τ.
pub fn build_two_level_system(
    laser: &LaserParams,
    atom: &AtomParams,
    ion_count: usize,
) -> Result<QuantumSystem> {
    let (detuning, rabi) = drive(laser, atom)?;
    let gamma = decay_rate(atom);
    let h = drive_hamiltonian(2, ion_count, detuning, rabi);
    let channels = (0..ion_count)
        .map(|ion| CollapseChannel {
            operator: local_operator(2, ion_count, ion, GROUND, EXCITED),
            rate: gamma,
            kind: ChannelKind::Emission { ion },
        })
        .collect();
    QuantumSystem::new(2, ion_count, h, channels)
}

/// Emitters with a metastable shelf |d⟩ fed by a fraction `branching` of all
/// decays and emptied back to |g⟩ at `repump_rate`.
pub fn build_three_level_system(
    laser: &LaserParams,
    atom: &AtomParams,
    repump_rate: f64,
    ion_count: usize,
) -> Result<QuantumSystem> {
    let b = atom.branching_to_metastable;
    if !(0.0..1.0).contains(&b) {
        return Err(Error::domain("branching_to_metastable", "must lie in [0, 1)"));
    }
    if !(repump_rate >= 0.0) {
        return Err(Error::domain("repump_rate", "must be >= 0"));
    }
    let (detuning, rabi) = drive(laser, atom)?;
    let gamma = decay_rate(atom);
    let h = drive_hamiltonian(3, ion_count, detuning, rabi);
    let mut channels = Vec::new();
    for ion in 0..ion_count {
        channels.push(CollapseChannel {
            operator: local_operator(3, ion_count, ion, GROUND, EXCITED),
            rate: gamma * (1.0 - b),
            kind: ChannelKind::Emission { ion },
        });
        channels.push(CollapseChannel {
            operator: local_operator(3, ion_count, ion, SHELF, EXCITED),
            rate: gamma * b,
            kind: ChannelKind::Shelving { ion },
        });
        channels.push(CollapseChannel {
            operator: local_operator(3, ion_count, ion, GROUND, SHELF),
            rate: repump_rate,
            kind: ChannelKind::Repump { ion },
        });
    }
    QuantumSystem::new(3, ion_count, h, channels)
}

/// The photon detection operator σ̂₁ + e^{iδ} σ̂₂ (or σ̂ for a single ion).
#[derive(Debug, Clone)]
pub struct DetectionOperator {
    phase: f64,
    matrix: CMatrix,
}

impl DetectionOperator {
    pub fn new(system: &QuantumSystem, phase: f64) -> Self {
        let mut matrix = system.lowering(0).clone();
        if system.ion_count() == 2 {
            matrix += system.lowering(1) * C64::from_polar(1.0, phase);
        }
        Self { phase, matrix }
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}
