//! Pure and mixed quantum states with validated construction.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

pub const NORM_TOL: f64 = 1e-9;
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub enum QuantumState {
    Pure(Vec<C64>),
    Mixed(DMatrix<C64>),
}

impl QuantumState {
    pub fn pure(psi: Vec<C64>) -> Result<Self> {
        let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("state norm {norm} differs from 1")));
        }
        Ok(Self::Pure(psi))
    }

    pub fn mixed(rho: DMatrix<C64>) -> Result<Self> {
        if !rho.is_square() {
            return Err(Error::InvalidState("density matrix is not square".into()));
        }
        let herm = max_abs(&(&rho - rho.adjoint()));
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("density matrix not Hermitian (error {herm:e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = min_eigenvalue(&rho);
        if min_eig < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(Self::Mixed(rho))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Pure(psi) => psi.len(),
            Self::Mixed(rho) => rho.nrows(),
        }
    }

    pub fn as_pure(&self) -> Option<&[C64]> {
        match self {
            Self::Pure(psi) => Some(psi),
            Self::Mixed(_) => None,
        }
    }

    /// Projector `|ψ><ψ|` for pure states; mixed states are returned as is.
    pub fn to_density(&self) -> DMatrix<C64> {
        match self {
            Self::Pure(psi) => {
                let v = nalgebra::DVector::from_column_slice(psi);
                &v * v.adjoint()
            }
            Self::Mixed(rho) => rho.clone(),
        }
    }

    /// `<ψ|O|ψ>` or `Tr(O ρ)`.
    pub fn expectation(&self, op: &SparseOperator) -> Result<C64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: op.dim() });
        }
        Ok(match self {
            Self::Pure(psi) => pure_expectation(op, psi),
            Self::Mixed(rho) => op.triplets().map(|(r, c, v)| v * rho[(c, r)]).sum(),
        })
    }
}

pub(crate) fn pure_expectation(op: &SparseOperator, psi: &[C64]) -> C64 {
    let csr = op.csr();
    (0..psi.len())
        .map(|r| {
            let (cols, vals) = csr.row(r);
            let row: C64 = cols.iter().zip(vals).map(|(&c, &v)| v * psi[c]).sum();
            psi[r].conj() * row
        })
        .sum()
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Smallest eigenvalue of a Hermitian matrix (the Hermitian part is used).
pub fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}
