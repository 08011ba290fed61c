//! Dense complex linear algebra with no external numerical dependencies.

pub mod complex;
pub mod eigen;
pub mod matrix;

pub use complex::{inner, norm, Complex};
pub use eigen::{eig_hermitian, eig_hermitian_with, fix_phase, EigenDecomposition};
pub use matrix::{tensor, tensor_vec, ComplexMatrix};

use crate::error::{Error, Result};

/// Hermiticity tolerance enforced at construction.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A square matrix known to be Hermitian.
///
/// Construction checks `max |M_ij - conj(M_ji)| <= 1e-12` and then
/// symmetrises, so the stored entries are exactly Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, HERMITIAN_TOL)
    }

    /// Like [`HermitianMatrix::new`] with a caller-chosen tolerance, for
    /// operators assembled from long floating-point sums or read from files.
    pub fn with_tolerance(mut m: ComplexMatrix, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let defect = m.hermiticity_defect();
        if !(defect <= tol) {
            return Err(Error::NotHermitian(defect));
        }
        let n = m.rows();
        for i in 0..n {
            m[(i, i)] = Complex::real(m[(i, i)].re);
            for j in i + 1..n {
                let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                m[(i, j)] = avg;
                m[(j, i)] = avg.conj();
            }
        }
        Ok(HermitianMatrix(m))
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix(ComplexMatrix::identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix(ComplexMatrix::zeros(n, n))
    }

    /// `|v><v|`, Hermitian by construction.
    pub fn projector(v: &[Complex]) -> Self {
        HermitianMatrix(ComplexMatrix::projector(v))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// `Tr(self * other)`; real for two Hermitian operands.
    pub fn trace_product(&self, other: &HermitianMatrix) -> Result<f64> {
        Ok(self.0.trace_product(&other.0)?.re)
    }

    /// `<v|M|v>`.
    pub fn expectation(&self, v: &[Complex]) -> Result<f64> {
        Ok(self.0.sandwich(v, v)?.re)
    }

    pub fn add(&self, other: &HermitianMatrix) -> Result<Self> {
        Ok(HermitianMatrix(self.0.checked_add(&other.0)?))
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Result<Self> {
        Ok(HermitianMatrix(self.0.checked_sub(&other.0)?))
    }

    pub fn scale(&self, k: f64) -> Self {
        HermitianMatrix(self.0.scale_real(k))
    }

    pub fn tensor(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix(tensor(&self.0, &other.0))
    }

    pub fn eig(&self) -> Result<EigenDecomposition> {
        eig_hermitian(self)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(eig_hermitian(self)?.eigenvalues)
    }
}

impl AsRef<ComplexMatrix> for HermitianMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.0
    }
}
