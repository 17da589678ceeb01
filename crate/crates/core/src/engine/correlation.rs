use std::collections::HashMap;
use std::f64::consts::TAU;

use serde::Serialize;

use super::density::DensityMatrix;
use super::liouvillian::{unvec, vectorize, CVector, Liouvillian};
use super::system::{CMatrix, DetectionOperator, QuantumSystem, C64};
use crate::config::SlitModel;
use crate::error::{Error, Result};

/// Intensities below this (in units of a fully excited emitter) count as dark.
const DARK_LIMIT: f64 = 1e-12;

/// (1+s)² / (1+s+cos δ)², the closed-form zero-delay value for two
/// weakly coupled two-level ions.
pub fn g2_zero_analytic(saturation: f64, delta: f64) -> Result<f64> {
    if !(saturation >= 0.0) {
        return Err(Error::domain("saturation", "must be >= 0"));
    }
    let den = 1.0 + saturation + delta.cos();
    if den.abs() < 1e-12 {
        return Err(Error::Divergent(format!(
            "g2(0) diverges at s = {saturation}, delta = {delta}"
        )));
    }
    Ok((1.0 + saturation).powi(2) / (den * den))
}

/// D ρ D† / Tr[D ρ D†]
pub fn heralded_state(rho: &DensityMatrix, d: &DetectionOperator) -> Result<DensityMatrix> {
    let m = d.matrix() * rho.matrix() * d.matrix().adjoint();
    let p = m.trace().re;
    if p < DARK_LIMIT {
        return Err(Error::DarkDirection { rate: p });
    }
    DensityMatrix::from_numerical(m)
}

/// Phase spread seen by a detected photon pair: Gaussian motional phase
/// (characteristic function v^{k²}) plus a uniform phase window across the
/// slit (characteristic function sinc(k w / 2)).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhaseSpread {
    pub motion_visibility: f64,
    pub slit_width_phase: f64,
    pub slit: SlitModel,
}

impl PhaseSpread {
    pub fn none() -> Self {
        Self {
            motion_visibility: 1.0,
            slit_width_phase: 0.0,
            slit: SlitModel::Collinear,
        }
    }

    fn motion(&self, k: i32) -> f64 {
        self.motion_visibility.powi(k * k)
    }

    fn slit(&self, k: i32) -> f64 {
        sinc(k as f64 * self.slit_width_phase / 2.0)
    }

    /// Average of e^{i(k₁φ₁ + k₂φ₂)} over the phase fluctuations of the two photons.
    pub fn weight(&self, k1: i32, k2: i32) -> f64 {
        let slit = match self.slit {
            SlitModel::Collinear => self.slit(k1 + k2),
            SlitModel::TwoPoint => self.slit(k1) * self.slit(k2),
        };
        self.motion(k1 + k2) * slit
    }
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Steady state plus cached propagation for one quantum system.
#[derive(Debug, Clone)]
pub struct Engine {
    system: QuantumSystem,
    liouvillian: Liouvillian,
    steady: DensityMatrix,
}

impl Engine {
    pub fn new(system: QuantumSystem) -> Result<Self> {
        let liouvillian = Liouvillian::new(&system);
        let steady = liouvillian.steady_state()?;
        Ok(Self {
            system,
            liouvillian,
            steady,
        })
    }

    pub fn system(&self) -> &QuantumSystem {
        &self.system
    }

    pub fn liouvillian(&self) -> &Liouvillian {
        &self.liouvillian
    }

    pub fn steady_state(&self) -> &DensityMatrix {
        &self.steady
    }

    pub fn detector(&self, phase: f64) -> DetectionOperator {
        DetectionOperator::new(&self.system, phase)
    }

    /// ⟨D†D⟩ in the steady state.
    pub fn intensity(&self, d: &DetectionOperator) -> f64 {
        self.steady
            .expect(&(d.matrix().adjoint() * d.matrix()))
            .re
    }

    /// Evolve an arbitrary state for t seconds.
    pub fn evolve(&self, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        if !(t >= 0.0) {
            return Err(Error::domain("t", "must be >= 0"));
        }
        let v = self.liouvillian.propagator(t) * vectorize(rho.matrix());
        DensityMatrix::from_numerical(unvec(&v, rho.dim()))
    }

    /// Unnormalised Tr[D₂†D₂ e^{Lτ}(D₁ρD₁†)] at each τ (seconds, any order).
    pub fn coincidence_curve(
        &self,
        d1: &DetectionOperator,
        d2: &DetectionOperator,
        taus: &[f64],
    ) -> Result<Vec<f64>> {
        coincidence_curve(&self.liouvillian, &self.steady, d1, d2, taus)
    }

    /// Normalised g²(τ) between two detection directions.
    pub fn g2_tau(
        &self,
        d1: &DetectionOperator,
        d2: &DetectionOperator,
        taus: &[f64],
    ) -> Result<Vec<f64>> {
        let i1 = self.intensity(d1);
        let i2 = self.intensity(d2);
        if i1 < DARK_LIMIT || i2 < DARK_LIMIT {
            return Err(Error::DarkDirection { rate: i1.min(i2) });
        }
        let g = self.coincidence_curve(d1, d2, taus)?;
        Ok(g.into_iter().map(|x| x / (i1 * i2)).collect())
    }

    pub fn g2_zero(&self, d1: &DetectionOperator, d2: &DetectionOperator) -> Result<f64> {
        Ok(self.g2_tau(d1, d2, &[0.0])?[0])
    }

    pub fn heralded_state(&self, d: &DetectionOperator) -> Result<DensityMatrix> {
        heralded_state(&self.steady, d)
    }

    /// Fourier coefficients of G²(τ) in the two detection phases around
    /// (`c1`, `c2`), orders −1..=1 each. Exact: D₁ρD₁† and D₂†D₂ carry at
    /// most first harmonics.
    pub fn coincidence_harmonics(&self, c1: f64, c2: f64, taus: &[f64]) -> Result<CoincidenceHarmonics> {
        let mut samples = vec![vec![vec![0.0; taus.len()]; 3]; 3];
        for (j1, row) in samples.iter_mut().enumerate() {
            for (j2, slot) in row.iter_mut().enumerate() {
                let d1 = self.detector(c1 + TAU * j1 as f64 / 3.0);
                let d2 = self.detector(c2 + TAU * j2 as f64 / 3.0);
                *slot = self.coincidence_curve(&d1, &d2, taus)?;
            }
        }
        let mut coeffs = vec![vec![vec![C64::new(0.0, 0.0); taus.len()]; 3]; 3];
        for k1 in -1i32..=1 {
            for k2 in -1i32..=1 {
                let dst = &mut coeffs[(k1 + 1) as usize][(k2 + 1) as usize];
                for (j1, row) in samples.iter().enumerate() {
                    for (j2, curve) in row.iter().enumerate() {
                        let ph = -TAU * (k1 * j1 as i32 + k2 * j2 as i32) as f64 / 3.0;
                        let w = C64::from_polar(1.0 / 9.0, ph);
                        for (d, &x) in dst.iter_mut().zip(curve) {
                            *d += w * x;
                        }
                    }
                }
            }
        }
        let mut intensity = [C64::new(0.0, 0.0); 3];
        let i_samples: Vec<f64> = (0..3)
            .map(|j| self.intensity(&self.detector(c1 + TAU * j as f64 / 3.0)))
            .collect();
        for k in -1i32..=1 {
            intensity[(k + 1) as usize] = (0..3)
                .map(|j| C64::from_polar(i_samples[j] / 3.0, -TAU * (k * j as i32) as f64 / 3.0))
                .sum();
        }
        Ok(CoincidenceHarmonics { coeffs, intensity })
    }

    /// ⟨D†D⟩ at nominal phase δ averaged over the phase spread.
    pub fn averaged_intensity(&self, delta: f64, spread: &PhaseSpread) -> f64 {
        let samples: Vec<f64> = (0..3)
            .map(|j| self.intensity(&self.detector(delta + TAU * j as f64 / 3.0)))
            .collect();
        (-1i32..=1)
            .map(|k| {
                let c: C64 = (0..3)
                    .map(|j| C64::from_polar(samples[j] / 3.0, -TAU * (k * j as i32) as f64 / 3.0))
                    .sum();
                c.re * spread.motion(k) * spread.slit(k)
            })
            .sum()
    }

    /// g²(τ) at nominal phase δ after averaging numerator and singles over
    /// the phase spread.
    pub fn averaged_g2(&self, delta: f64, spread: &PhaseSpread, taus: &[f64]) -> Result<Vec<f64>> {
        let h = self.coincidence_harmonics(delta, delta, taus)?;
        h.average(spread)
    }
}

/// Output of [`Engine::coincidence_harmonics`].
#[derive(Debug, Clone)]
pub struct CoincidenceHarmonics {
    coeffs: Vec<Vec<Vec<C64>>>,
    /// singles harmonics, orders −1..=1
    intensity: [C64; 3],
}

impl CoincidenceHarmonics {
    pub fn len(&self) -> usize {
        self.coeffs[1][1].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn average(&self, spread: &PhaseSpread) -> Result<Vec<f64>> {
        self.average_at(0.0, spread)
    }

    /// Averaged g²(τ) with both nominal phases moved by `shift` from the
    /// expansion centre.
    pub fn average_at(&self, shift: f64, spread: &PhaseSpread) -> Result<Vec<f64>> {
        let singles: f64 = (-1i32..=1)
            .map(|k| {
                (self.intensity[(k + 1) as usize]
                    * C64::from_polar(spread.motion(k) * spread.slit(k), k as f64 * shift))
                .re
            })
            .sum();
        if singles < DARK_LIMIT {
            return Err(Error::DarkDirection { rate: singles });
        }
        let mut out = vec![0.0; self.len()];
        for k1 in -1i32..=1 {
            for k2 in -1i32..=1 {
                let w = C64::from_polar(spread.weight(k1, k2), (k1 + k2) as f64 * shift);
                for (o, c) in out.iter_mut().zip(&self.coeffs[(k1 + 1) as usize][(k2 + 1) as usize]) {
                    *o += (c * w).re;
                }
            }
        }
        Ok(out.into_iter().map(|x| x / (singles * singles)).collect())
    }
}

fn trace_product(op: &CMatrix, v: &CVector, n: usize) -> f64 {
    // Tr[O σ] = Σ O_ij σ_ji with σ_ji stored at i*n + j
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += op[(i, j)] * v[i * n + j];
        }
    }
    acc.re
}

/// Tr[D₂†D₂ e^{Lτ}(D₁ρD₁†)] for an arbitrary initial state.
pub fn coincidence_curve(
    l: &Liouvillian,
    rho: &DensityMatrix,
    d1: &DetectionOperator,
    d2: &DetectionOperator,
    taus: &[f64],
) -> Result<Vec<f64>> {
    let start = d1.matrix() * rho.matrix() * d1.matrix().adjoint();
    let observable = d2.matrix().adjoint() * d2.matrix();
    let mut out = vec![0.0; taus.len()];
    propagate_many(l, &vectorize(&start), taus, |i, v| {
        out[i] = trace_product(&observable, v, l.dim());
    })?;
    Ok(out)
}

/// Step a vectorised operator through sorted delays, reusing e^{LΔ} for
/// repeated increments.
fn propagate_many<F: FnMut(usize, &CVector)>(
    l: &Liouvillian,
    start: &CVector,
    taus: &[f64],
    mut visit: F,
) -> Result<()> {
    if let Some(bad) = taus.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::domain("tau", format!("delays must be finite and >= 0 (got {bad})")));
    }
    let mut order: Vec<usize> = (0..taus.len()).collect();
    order.sort_by(|&a, &b| taus[a].total_cmp(&taus[b]));
    let mut cache: HashMap<u64, CMatrix> = HashMap::new();
    let mut v = start.clone();
    let mut now = 0.0;
    for idx in order {
        let dt = taus[idx] - now;
        if dt > 0.0 {
            // round increments to 1e-18 s so equal grid steps share a key
            let key = (dt * 1e18).round() as u64;
            let p = cache.entry(key).or_insert_with(|| l.propagator(dt));
            v = &*p * &v;
            now = taus[idx];
        }
        visit(idx, &v);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::engine::system::{build_three_level_system, build_two_level_system};
    use std::f64::consts::PI;

    fn two_ion(s: f64) -> Engine {
        let cfg = ExperimentConfig::reference();
        let mut laser = cfg.laser.clone();
        laser.saturation = Some(s);
        Engine::new(build_two_level_system(&laser, &cfg.atom, 2).unwrap()).unwrap()
    }

    #[test]
    fn engine_matches_closed_form_at_reference_phases() {
        let e = two_ion(0.46);
        for (delta, want) in [(0.0, 0.35224), (PI / 2.0, 1.0), (PI, 10.0737)] {
            let d = e.detector(delta);
            let got = e.g2_zero(&d, &d).unwrap();
            assert!((got - want).abs() < 1e-4 * want, "delta {delta}: {got} vs {want}");
        }
    }

    #[test]
    fn engine_matches_closed_form_on_grid() {
        for s in [0.05, 0.2, 0.46, 1.0, 3.0] {
            let e = two_ion(s);
            for j in 0..17 {
                let delta = PI * j as f64 / 16.0;
                let d = e.detector(delta);
                let got = e.g2_zero(&d, &d).unwrap();
                let want = g2_zero_analytic(s, delta).unwrap();
                assert!((got - want).abs() < 1e-6 * want.max(1.0), "s {s} delta {delta}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn single_ion_antibunches() {
        let cfg = ExperimentConfig::reference();
        let e = Engine::new(build_two_level_system(&cfg.laser, &cfg.atom, 1).unwrap()).unwrap();
        let d = e.detector(0.0);
        assert!(e.g2_zero(&d, &d).unwrap().abs() < 1e-10);
    }

    #[test]
    fn decorrelates_at_long_delay() {
        let e = two_ion(0.46);
        let gamma = 1.0 / 6.9e-9;
        for delta in [0.0, 1.0, PI] {
            let d = e.detector(delta);
            let g = e.g2_tau(&d, &d, &[20.0 / gamma]).unwrap()[0];
            assert!((g - 1.0).abs() < 1e-3, "delta {delta}: {g}");
        }
    }

    #[test]
    fn unsorted_delays_give_same_values() {
        let e = two_ion(0.46);
        let d = e.detector(0.7);
        let a = e.g2_tau(&d, &d, &[0.0, 1e-9, 5e-9, 30e-9]).unwrap();
        let b = e.g2_tau(&d, &d, &[30e-9, 5e-9, 0.0, 1e-9]).unwrap();
        assert!((a[0] - b[2]).abs() < 1e-12 && (a[3] - b[0]).abs() < 1e-12);
        assert!(e.g2_tau(&d, &d, &[-1e-9]).is_err());
    }

    #[test]
    fn detection_projects_out_symmetry_states() {
        let e = two_ion(0.46);
        let sys = e.system();
        let n = sys.dim();
        let ge = sys.basis_index(&[0, 1]);
        let eg = sys.basis_index(&[1, 0]);
        let r = 1.0 / 2f64.sqrt();
        let mut sym = CVector::zeros(n);
        sym[eg] = C64::new(r, 0.0);
        sym[ge] = C64::new(r, 0.0);
        let mut anti = CVector::zeros(n);
        anti[eg] = C64::new(r, 0.0);
        anti[ge] = C64::new(-r, 0.0);
        assert!((e.detector(0.0).matrix() * &anti).norm() < 1e-15);
        assert!((e.detector(PI).matrix() * &sym).norm() < 1e-15);
    }

    #[test]
    fn heralded_state_is_physical() {
        let e = two_ion(0.46);
        let h = e.heralded_state(&e.detector(PI)).unwrap();
        assert!(h.min_eigenvalue() > -1e-10);
        let later = e.evolve(&h, 5e-9).unwrap();
        assert!((later.matrix().trace().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn divergence_is_reported() {
        assert!(matches!(g2_zero_analytic(0.0, PI), Err(Error::Divergent(_))));
        assert!(g2_zero_analytic(0.0, 0.0).is_ok());
    }

    #[test]
    fn harmonic_average_without_spread_is_identity() {
        let e = two_ion(0.46);
        let taus = [0.0, 3e-9, 10e-9];
        for delta in [0.0, 1.1, PI] {
            let d = e.detector(delta);
            let direct = e.g2_tau(&d, &d, &taus).unwrap();
            let avg = e.averaged_g2(delta, &PhaseSpread::none(), &taus).unwrap();
            for (a, b) in direct.iter().zip(&avg) {
                assert!((a - b).abs() < 1e-9 * a.max(1.0));
            }
        }
    }

    #[test]
    fn motion_only_average_matches_visibility_formula() {
        // for weak coupling the Gaussian-averaged value is (1+s)²/(1+s+v cos δ)²
        let e = two_ion(0.46);
        let spread = PhaseSpread {
            motion_visibility: 0.5,
            slit_width_phase: 0.0,
            slit: SlitModel::Collinear,
        };
        let pi = e.averaged_g2(PI, &spread, &[0.0]).unwrap()[0];
        let zero = e.averaged_g2(0.0, &spread, &[0.0]).unwrap()[0];
        assert!((pi - 2.3130).abs() < 1e-3, "{pi}");
        assert!((zero - 0.55487).abs() < 1e-3, "{zero}");
    }

    #[test]
    fn empty_shelf_reduces_to_two_level() {
        let cfg = ExperimentConfig::reference();
        let mut atom = cfg.atom.clone();
        atom.branching_to_metastable = 0.0;
        let two = Engine::new(build_two_level_system(&cfg.laser, &atom, 2).unwrap()).unwrap();
        let three = Engine::new(build_three_level_system(&cfg.laser, &atom, 5e7, 2).unwrap()).unwrap();
        let taus = [0.0, 2e-9, 7e-9, 40e-9];
        for delta in [0.0, 2.0, PI] {
            let a = two.g2_tau(&two.detector(delta), &two.detector(delta), &taus).unwrap();
            let b = three.g2_tau(&three.detector(delta), &three.detector(delta), &taus).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9 * x.max(1.0));
            }
        }
    }
}
