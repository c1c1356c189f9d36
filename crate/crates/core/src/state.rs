use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues_desc, hermiticity_error, trace, CMatrix};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-10;

/// An n x n Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: CMatrix,
}

impl DensityMatrix {
    pub fn new(rho: CMatrix) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::InvalidState(format!(
                "matrix is not square: {}x{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        if rho.nrows() < 2 {
            return Err(Error::Dimension(rho.nrows()));
        }
        let herm = hermiticity_error(&rho);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = trace(&rho);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min = *hermitian_eigenvalues_desc(&rho).last().expect("n >= 2");
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { rho })
    }

    /// Wraps a matrix without validation. Intended for integrator internals
    /// where the invariants are tracked through diagnostics instead.
    pub fn new_unchecked(rho: CMatrix) -> Self {
        Self { rho }
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self { rho: CMatrix::identity(n, n) / crate::linalg::c(n as f64, 0.0) }
    }

    pub fn n(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn into_matrix(self) -> CMatrix {
        self.rho
    }

    /// Eigenvalues, descending.
    pub fn spectrum(&self) -> Vec<f64> {
        hermitian_eigenvalues_desc(&self.rho)
    }
}
