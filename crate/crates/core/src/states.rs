//! Bipartite pure and mixed states with declared local dimensions.
//!
//! Local basis labels are 0-based throughout: the text-book state
//! `|1,2> + |2,1>` is stored with amplitudes at (0,1) and (1,0).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, eig_hermitian, Complex, ComplexMatrix, HermitianMatrix};

pub const NORM_TOL: f64 = 1e-12;
/// Singular values above this count towards the Schmidt number.
pub const SCHMIDT_THRESHOLD: f64 = 1e-9;
/// Most negative eigenvalue admitted in a density matrix.
pub const PSD_TOL: f64 = 1e-10;

/// `|i>` in a `dim`-dimensional space.
pub fn basis_vector(dim: usize, i: usize) -> Vec<Complex> {
    let mut v = vec![Complex::ZERO; dim];
    v[i] = Complex::ONE;
    v
}

/// Divides `v` by its norm; fails on the zero vector.
pub fn normalize(v: &[Complex]) -> Result<Vec<Complex>> {
    let n = linalg::norm(v);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::NotNormalized(n * n));
    }
    Ok(v.iter().map(|z| *z / n).collect())
}

/// Anything that yields Born-rule expectation values on a bipartite space.
pub trait QuantumState {
    fn dims(&self) -> (usize, usize);

    /// `Tr(rho * op)` for a Hermitian `op` on the joint space.
    fn expectation(&self, op: &HermitianMatrix) -> Result<f64>;

    /// `<x|rho|x>`; the probability of a rank-one projection when `x` is
    /// normalised.
    fn weight(&self, x: &[Complex]) -> f64;

    /// `Tr[(a ⊗ b) rho]` for local operators `a`, `b`.
    fn local_expectation(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64>;

    fn check_dims(&self, dim_a: usize, dim_b: usize) -> Result<()> {
        let (da, db) = self.dims();
        if (da, db) != (dim_a, dim_b) {
            return Err(Error::DimensionMismatch(format!("state is {da}x{db}, operators are {dim_a}x{dim_b}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    dim_a: usize,
    dim_b: usize,
    amplitudes: Vec<Complex>,
}

impl StateVector {
    /// Requires unit norm within [`NORM_TOL`].
    pub fn new(dim_a: usize, dim_b: usize, amplitudes: Vec<Complex>) -> Result<Self> {
        Self::check_shape(dim_a, dim_b, &amplitudes)?;
        let n2: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n2));
        }
        Ok(StateVector { dim_a, dim_b, amplitudes })
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(dim_a: usize, dim_b: usize, amplitudes: Vec<Complex>) -> Result<Self> {
        Self::check_shape(dim_a, dim_b, &amplitudes)?;
        Ok(StateVector { dim_a, dim_b, amplitudes: normalize(&amplitudes)? })
    }

    fn check_shape(dim_a: usize, dim_b: usize, amplitudes: &[Complex]) -> Result<()> {
        if dim_a == 0 || dim_b == 0 {
            return Err(Error::InvalidArgument("local dimensions must be positive".into()));
        }
        if amplitudes.len() != dim_a * dim_b {
            return Err(Error::DimensionMismatch(format!("{} amplitudes for {dim_a}x{dim_b}", amplitudes.len())));
        }
        if let Some(z) = amplitudes.iter().find(|z| !z.is_finite()) {
            return Err(Error::NonFinite(z.to_string()));
        }
        Ok(())
    }

    /// `|u> ⊗ |v>` from normalised local vectors.
    pub fn product(u: &[Complex], v: &[Complex]) -> Result<Self> {
        Self::new(u.len(), v.len(), linalg::tensor_vec(u, v))
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn amplitudes(&self) -> &[Complex] {
        &self.amplitudes
    }

    pub fn amplitude(&self, j: usize, k: usize) -> Complex {
        self.amplitudes[j * self.dim_b + k]
    }

    /// The `dim_a x dim_b` matrix `M[j][k] = <j,k|psi>`.
    pub fn amplitude_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_vec(self.dim_a, self.dim_b, self.amplitudes.clone()).expect("shape checked at construction")
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix { dim_a: self.dim_a, dim_b: self.dim_b, matrix: HermitianMatrix::projector(&self.amplitudes) }
    }

    /// `(ua ⊗ ub)|psi>`; the result is renormalised to absorb roundoff.
    pub fn apply_local(&self, ua: &ComplexMatrix, ub: &ComplexMatrix) -> Result<Self> {
        if ua.cols() != self.dim_a || ub.cols() != self.dim_b {
            return Err(Error::DimensionMismatch("local operator size".into()));
        }
        // (ua ⊗ ub) vec(M) = vec(ua M ub^T)
        let m = self.amplitude_matrix();
        let um = ua.matmul(&m)?;
        let out = um.matmul(&ub.transpose())?;
        Self::normalized(ua.rows(), ub.rows(), out.as_slice().to_vec())
    }

    pub fn schmidt(&self) -> Result<SchmidtDecomposition> {
        schmidt(self)
    }
}

impl QuantumState for StateVector {
    fn dims(&self) -> (usize, usize) {
        (self.dim_a, self.dim_b)
    }

    fn expectation(&self, op: &HermitianMatrix) -> Result<f64> {
        op.expectation(&self.amplitudes)
    }

    fn weight(&self, x: &[Complex]) -> f64 {
        linalg::inner(x, &self.amplitudes).norm_sqr()
    }

    fn local_expectation(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
        self.check_dims(a.rows(), b.rows())?;
        // <psi|(a ⊗ b)|psi> = Tr(M^† a M b^T)
        let m = self.amplitude_matrix();
        let am = a.matmul(&m)?;
        let mut acc = Complex::ZERO;
        for j in 0..self.dim_a {
            for k in 0..self.dim_b {
                // (a M b^T)[j][k] = Σ_l (aM)[j][l] b[k][l]
                let mut x = Complex::ZERO;
                for l in 0..self.dim_b {
                    x += am[(j, l)] * b[(k, l)];
                }
                acc += m[(j, k)].conj() * x;
            }
        }
        Ok(acc.re)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dim_a: usize,
    dim_b: usize,
    matrix: HermitianMatrix,
}

impl DensityMatrix {
    /// Validates unit trace (within [`NORM_TOL`]) and positivity (smallest
    /// eigenvalue at least `-PSD_TOL`).
    pub fn new(dim_a: usize, dim_b: usize, matrix: HermitianMatrix) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 || matrix.dim() != dim_a * dim_b {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} density for local dims {dim_a}x{dim_b}",
                matrix.dim(),
                matrix.dim()
            )));
        }
        let tr = matrix.trace();
        if (tr - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let lmin = eig_hermitian(&matrix)?.min();
        if lmin < -PSD_TOL {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {lmin:e}")));
        }
        Ok(DensityMatrix { dim_a, dim_b, matrix })
    }

    /// Convex combination `Σ w_i |psi_i><psi_i|`; the weights must be
    /// non-negative and sum to one.
    pub fn mixture(terms: &[(f64, StateVector)]) -> Result<Self> {
        let (_, first) = terms.first().ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
        let (da, db) = first.dims();
        let n = da * db;
        let mut m = ComplexMatrix::zeros(n, n);
        let mut total = 0.0;
        for (w, psi) in terms {
            if !(*w >= 0.0) {
                return Err(Error::InvalidArgument(format!("mixture weight {w}")));
            }
            if psi.dims() != (da, db) {
                return Err(Error::DimensionMismatch("mixture components differ in shape".into()));
            }
            total += w;
            m.add_scaled(Complex::real(*w), &ComplexMatrix::projector(psi.amplitudes()))?;
        }
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidDensity(format!("mixture weights sum to {total}")));
        }
        Self::new(da, db, HermitianMatrix::new(m)?)
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    pub fn purity(&self) -> f64 {
        self.matrix.trace_product(&self.matrix).expect("square")
    }
}

impl QuantumState for DensityMatrix {
    fn dims(&self) -> (usize, usize) {
        (self.dim_a, self.dim_b)
    }

    fn expectation(&self, op: &HermitianMatrix) -> Result<f64> {
        self.matrix.trace_product(op)
    }

    fn weight(&self, x: &[Complex]) -> f64 {
        self.matrix.expectation(x).expect("dimension checked by caller")
    }

    fn local_expectation(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
        self.check_dims(a.rows(), b.rows())?;
        let (da, db) = (self.dim_a, self.dim_b);
        let rho = self.matrix.as_matrix();
        // Tr[(a ⊗ b) rho] = Σ a[j][j'] b[k][k'] rho[(j',k'),(j,k)]
        let mut acc = Complex::ZERO;
        for j in 0..da {
            for jp in 0..da {
                let ajj = a[(j, jp)];
                if ajj == Complex::ZERO {
                    continue;
                }
                for k in 0..db {
                    let row = (jp * db) * (da * db);
                    let mut x = Complex::ZERO;
                    for kp in 0..db {
                        x += b[(k, kp)] * rho.as_slice()[row + kp * (da * db) + j * db + k];
                    }
                    acc += ajj * x;
                }
            }
        }
        Ok(acc.re)
    }
}

/// `(1/d) Σ_j |j,j><j,j|`.
pub fn separable_correlated(d: usize) -> Result<DensityMatrix> {
    check_d(d)?;
    let n = d * d;
    let mut m = ComplexMatrix::zeros(n, n);
    for j in 0..d {
        let idx = j * d + j;
        m[(idx, idx)] = Complex::real(1.0 / d as f64);
    }
    DensityMatrix::new(d, d, HermitianMatrix::new(m)?)
}

/// `(1/√d) Σ_k |k,k>`.
pub fn max_entangled(d: usize) -> Result<StateVector> {
    check_d(d)?;
    let mut amps = vec![Complex::ZERO; d * d];
    let a = 1.0 / (d as f64).sqrt();
    for k in 0..d {
        amps[k * d + k] = Complex::real(a);
    }
    StateVector::normalized(d, d, amps)
}

/// `(|0,1> + |1,0> + |2,3> + |3,2>) / 2` on 4x4.
pub fn psi4() -> StateVector {
    let mut amps = vec![Complex::ZERO; 16];
    for (j, k) in [(0, 1), (1, 0), (2, 3), (3, 2)] {
        amps[j * 4 + k] = Complex::real(0.5);
    }
    StateVector::new(4, 4, amps).expect("unit norm")
}

/// `(|0,1> + |1,0>) / √2` on 2x2.
pub fn psi_singletlike() -> StateVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amps = vec![Complex::ZERO, Complex::real(h), Complex::real(h), Complex::ZERO];
    StateVector::normalized(2, 2, amps).expect("non-zero")
}

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("local dimension {d} < 2")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    /// Non-negative, descending; `min(dim_a, dim_b)` entries.
    pub coefficients: Vec<f64>,
    pub left: Vec<Vec<Complex>>,
    pub right: Vec<Vec<Complex>>,
}

impl SchmidtDecomposition {
    pub fn schmidt_number(&self) -> usize {
        self.coefficients.iter().filter(|&&c| c > SCHMIDT_THRESHOLD).count()
    }

    /// `Σ_i σ_i |u_i> ⊗ |v_i>` as a flat amplitude vector.
    pub fn reconstruct(&self) -> Vec<Complex> {
        let da = self.left.first().map_or(0, Vec::len);
        let db = self.right.first().map_or(0, Vec::len);
        let mut out = vec![Complex::ZERO; da * db];
        for ((s, u), v) in self.coefficients.iter().zip(&self.left).zip(&self.right) {
            for j in 0..da {
                let a = u[j] * *s;
                for k in 0..db {
                    out[j * db + k] += a * v[k];
                }
            }
        }
        out
    }
}

/// Schmidt decomposition through the Gram matrix `M M†` of the amplitude
/// matrix.
///
/// Coefficients are taken as `‖u_i† M‖` rather than the square roots of
/// Gram eigenvalues: a roundoff eigenvalue of 1e-16 would otherwise turn
/// into a coefficient of 1e-8 and be counted by the rank threshold.
pub fn schmidt(v: &StateVector) -> Result<SchmidtDecomposition> {
    let n2: f64 = v.amplitudes.iter().map(|z| z.norm_sqr()).sum();
    if (n2 - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(n2));
    }
    let m = v.amplitude_matrix();
    let gram = HermitianMatrix::new(m.matmul(&m.adjoint())?)?;
    let eig = eig_hermitian(&gram)?;
    let rank = v.dim_a.min(v.dim_b);

    let mut terms: Vec<(f64, Vec<Complex>, Vec<Complex>)> = eig
        .eigenvectors
        .iter()
        .take(rank)
        .map(|u| {
            // row vector u† M
            let w: Vec<Complex> = (0..v.dim_b).map(|k| (0..v.dim_a).map(|j| u[j].conj() * m[(j, k)]).sum()).collect();
            let s = linalg::norm(&w);
            let left: Vec<Complex> = u.clone();
            let right: Vec<Complex> = if s > 0.0 { w.iter().map(|z| *z / s).collect() } else { w };
            (s, left, right)
        })
        .collect();
    terms.sort_by(|a, b| b.0.total_cmp(&a.0));

    // Right vectors of negligible coefficients are noise; rebuild them so the
    // right family stays orthonormal.
    let mut right: Vec<Vec<Complex>> = Vec::with_capacity(rank);
    let mut spare = 0;
    for (s, _, r) in &terms {
        let mut cand = if *s > SCHMIDT_THRESHOLD { r.clone() } else { Vec::new() };
        loop {
            if cand.is_empty() {
                cand = basis_vector(v.dim_b, spare);
                spare += 1;
            }
            for q in &right {
                let p = linalg::inner(q, &cand);
                for (x, y) in cand.iter_mut().zip(q) {
                    *x -= p * *y;
                }
            }
            let n = linalg::norm(&cand);
            if n > 1e-6 {
                right.push(cand.iter().map(|z| *z / n).collect());
                break;
            }
            cand.clear();
        }
    }

    Ok(SchmidtDecomposition {
        coefficients: terms.iter().map(|t| t.0).collect(),
        left: terms.into_iter().map(|t| t.1).collect(),
        right,
    })
}

/// JSON form shared by every state file: either `amplitudes` (pure) or
/// `density` (mixed), never both.
#[derive(Debug, Serialize, Deserialize)]
pub struct StateJson {
    #[serde(rename = "dimA")]
    pub dim_a: usize,
    #[serde(rename = "dimB")]
    pub dim_b: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<Complex>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Vec<Vec<Complex>>>,
}

#[derive(Clone, Debug)]
pub enum State {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl State {
    pub fn density(&self) -> DensityMatrix {
        match self {
            State::Pure(v) => v.density(),
            State::Mixed(r) => r.clone(),
        }
    }

    pub fn from_json(j: StateJson) -> Result<Self> {
        match (j.amplitudes, j.density) {
            (Some(a), None) => Ok(State::Pure(StateVector::new(j.dim_a, j.dim_b, a)?)),
            (None, Some(rows)) => {
                let m = ComplexMatrix::from_rows(&rows)?;
                // Files carry decimal text, so allow a looser Hermiticity check.
                let h = HermitianMatrix::with_tolerance(m, 1e-9)?;
                Ok(State::Mixed(DensityMatrix::new(j.dim_a, j.dim_b, h)?))
            }
            _ => Err(Error::Input("state needs exactly one of 'amplitudes' or 'density'".into())),
        }
    }

    pub fn to_json(&self) -> StateJson {
        match self {
            State::Pure(v) => {
                StateJson { dim_a: v.dim_a, dim_b: v.dim_b, amplitudes: Some(v.amplitudes.clone()), density: None }
            }
            State::Mixed(r) => StateJson {
                dim_a: r.dim_a,
                dim_b: r.dim_b,
                amplitudes: None,
                density: Some(r.matrix.as_matrix().to_rows()),
            },
        }
    }
}

impl Serialize for State {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for State {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        State::from_json(StateJson::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}
