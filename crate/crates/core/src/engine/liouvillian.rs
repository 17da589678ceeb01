//! Column-stacked Lindblad superoperator, in units of the system's decay rate.

use nalgebra::{DMatrix, DVector};

use super::density::DensityMatrix;
use super::system::{CMatrix, QuantumSystem, C64};
use crate::error::{Error, Result};

const NULLSPACE_TOL: f64 = 1e-9;
const CONDITION_LIMIT: f64 = 1e8;
const RESIDUAL_LIMIT: f64 = 1e-10;

pub type CVector = DVector<C64>;

#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    /// rad/s per dimensionless unit
    unit: f64,
    matrix: CMatrix,
}

impl Liouvillian {
    /// vec(AρB) = (Bᵀ ⊗ A) vec(ρ)
    pub fn new(system: &QuantumSystem) -> Self {
        let n = system.dim();
        let unit = system.rate_unit();
        let id = CMatrix::identity(n, n);
        let i = C64::new(0.0, 1.0);
        let h = system.hamiltonian() / C64::new(unit, 0.0);
        let mut l = (id.kronecker(&h) - h.transpose().kronecker(&id)) * (-i);
        for ch in system.channels() {
            if ch.rate == 0.0 {
                continue;
            }
            let r = C64::new(ch.rate / unit, 0.0);
            let c = &ch.operator;
            let cdc = c.adjoint() * c;
            let half = C64::new(0.5, 0.0);
            l += (c.conjugate().kronecker(c)
                - id.kronecker(&cdc) * half
                - cdc.transpose().kronecker(&id) * half)
                * r;
        }
        Self { dim: n, unit, matrix: l }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rate (rad/s) that corresponds to one dimensionless unit.
    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// exp(L t) for t in seconds.
    pub fn propagator(&self, t: f64) -> CMatrix {
        (&self.matrix * C64::new(t * self.unit, 0.0)).exp()
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    /// Null vector of L normalised to unit trace.
    pub fn steady_state(&self) -> Result<DensityMatrix> {
        let n = self.dim;
        let m = n * n;
        let svd = self.matrix.clone().svd(false, false);
        let sv = &svd.singular_values;
        let smax = sv.max();
        let null_dim = sv.iter().filter(|&&s| s < NULLSPACE_TOL * smax).count();
        if null_dim > 1 {
            return Err(Error::SteadyState {
                nullspace_dim: null_dim,
                condition: f64::INFINITY,
            });
        }

        let mut a = self.matrix.clone();
        for k in 0..m {
            a[(0, k)] = C64::new(0.0, 0.0);
        }
        for j in 0..n {
            a[(0, j * n + j)] = C64::new(1.0, 0.0);
        }
        let asv = a.clone().svd(false, false).singular_values;
        let condition = asv.max() / asv.min();
        let mut b = CVector::zeros(m);
        b[0] = C64::new(1.0, 0.0);

        let direct = if condition.is_finite() && condition < CONDITION_LIMIT {
            a.lu().solve(&b)
        } else {
            log::warn!("steady state: augmented system condition {condition:e}, propagating instead");
            None
        };
        let vec = match direct {
            Some(v) => v,
            None => self.propagate_to_steady(n)?,
        };
        let rho = DensityMatrix::from_numerical(unvec(&vec, n)).map_err(|_| Error::SteadyState {
            nullspace_dim: null_dim,
            condition,
        })?;
        let residual = self.apply(&vectorize(rho.matrix())).camax();
        if residual > RESIDUAL_LIMIT {
            return Err(Error::SteadyState {
                nullspace_dim: null_dim,
                condition,
            });
        }
        Ok(rho)
    }

    fn propagate_to_steady(&self, n: usize) -> Result<CVector> {
        let mut v = vectorize(DensityMatrix::pure_basis(n, 0).matrix());
        let mut step = (&self.matrix * C64::new(10.0, 0.0)).exp();
        for _ in 0..40 {
            let next = &step * &v;
            let change = (&next - &v).camax();
            v = next;
            if change < 1e-13 {
                return Ok(v);
            }
            step = &step * &step;
        }
        Err(Error::Convergence {
            what: "steady state",
            detail: "long-time propagation did not settle".into(),
        })
    }
}

/// Column-major stacking, matching nalgebra storage.
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &CVector, n: usize) -> CMatrix {
    DMatrix::from_column_slice(n, n, v.as_slice())
}
