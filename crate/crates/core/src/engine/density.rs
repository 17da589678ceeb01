use serde::Serialize;

use super::system::{CMatrix, C64};
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-10;

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensitySummary {
    pub populations: Vec<f64>,
    pub min_eigenvalue: f64,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::domain("density matrix", "must be square and non-empty"));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::domain("density matrix", "non-finite entry"));
        }
        let skew = (&matrix - matrix.adjoint()).camax();
        if skew > HERMITIAN_TOL {
            return Err(Error::domain("density matrix", format!("not Hermitian ({skew:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::domain("density matrix", format!("trace {tr} != 1")));
        }
        let out = Self { matrix };
        let min = out.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(Error::domain("density matrix", format!("negative eigenvalue {min:e}")));
        }
        Ok(out)
    }

    /// Hermitize and renormalize a numerically produced state, then validate.
    pub fn from_numerical(matrix: CMatrix) -> Result<Self> {
        let herm = (&matrix + matrix.adjoint()) * C64::new(0.5, 0.0);
        let tr = herm.trace().re;
        if !(tr.abs() > 0.0) || !tr.is_finite() {
            return Err(Error::domain("density matrix", "zero or non-finite trace"));
        }
        Self::new(herm / C64::new(tr, 0.0))
    }

    /// |i⟩⟨i|
    pub fn pure_basis(dim: usize, index: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(index, index)] = C64::new(1.0, 0.0);
        Self { matrix: m }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.population(i)).collect()
    }

    /// Tr[O ρ]
    pub fn expect(&self, op: &CMatrix) -> C64 {
        (op * &self.matrix).trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn summary(&self) -> DensitySummary {
        DensitySummary {
            populations: self.populations(),
            min_eigenvalue: self.min_eigenvalue(),
        }
    }
}
