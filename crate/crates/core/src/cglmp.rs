//! The d-outcome CGLMP inequality, its Bell operator, and the witness bound
//! for (d-1)-dimensional entanglement.
//!
//! `P(A_a = B_b + k)` is the probability that the outcomes satisfy
//! `A - B ≡ k (mod d)`; likewise `P(B_b = A_a + k)` means `B - A ≡ k`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, fix_phase, tensor, Complex, ComplexMatrix, EigenDecomposition, HermitianMatrix};
use crate::measurements::{cglmp_vector, Party};
use crate::states::{max_entangled, QuantumState, StateVector};

pub const LHV_LIMIT: f64 = 2.0;
/// Largest `d` with validated diagonal-form behaviour.
pub const MAX_VALIDATED_D: usize = 32;
/// Largest tolerated off-diagonal or imaginary amplitude in `|s₁>`.
pub const STRUCTURE_TOL: f64 = 1e-8;
/// Eigenvalue gap below which `s₁` is treated as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-9;

/// Outcome table `P[v][w]` for one setting pair.
pub type ProbTable = Vec<Vec<f64>>;

/// `1 - 2k/(d-1)` for `k = 0..⌊d/2⌋-1`.
pub fn weights(d: usize) -> Vec<f64> {
    (0..d / 2).map(|k| 1.0 - 2.0 * k as f64 / (d as f64 - 1.0)).collect()
}

/// Coefficients `c_ab[δ]` with `S_d = Σ_ab Σ_vw c_ab[(v - w) mod d] P_ab[v][w]`,
/// indexed `[a][b][δ]`.
pub fn coefficients(d: usize) -> [[Vec<f64>; 2]; 2] {
    let m = |x: i64| x.rem_euclid(d as i64) as usize;
    let mut c: [[Vec<f64>; 2]; 2] = std::array::from_fn(|_| std::array::from_fn(|_| vec![0.0; d]));
    for (k, w) in weights(d).into_iter().enumerate() {
        let k = k as i64;
        // + P(A0 = B0 + k) - P(A0 = B0 - k - 1)
        c[0][0][m(k)] += w;
        c[0][0][m(-k - 1)] -= w;
        // + P(B0 = A1 + k + 1) - P(B0 = A1 - k), with v - w = -(B - A)
        c[1][0][m(-k - 1)] += w;
        c[1][0][m(k)] -= w;
        // + P(A1 = B1 + k) - P(A1 = B1 - k - 1)
        c[1][1][m(k)] += w;
        c[1][1][m(-k - 1)] -= w;
        // + P(B1 = A0 + k) - P(B1 = A0 - k - 1)
        c[0][1][m(-k)] += w;
        c[0][1][m(k + 1)] -= w;
    }
    c
}

/// `P[v][w] = Tr[(|v><v|_a ⊗ |w><w|_b) ρ]`.
pub fn cglmp_probabilities(state: &impl QuantumState, a: usize, b: usize, d: usize) -> Result<ProbTable> {
    state.check_dims(d, d)?;
    if a > 1 || b > 1 {
        return Err(Error::InvalidArgument(format!("settings ({a}, {b}) not in {{0,1}}")));
    }
    let va: Vec<Vec<Complex>> = (0..d).map(|v| cglmp_vector(Party::A, a, d, v)).collect();
    let wb: Vec<Vec<Complex>> = (0..d).map(|w| cglmp_vector(Party::B, b, d, w)).collect();
    Ok(va
        .iter()
        .map(|x| wb.iter().map(|y| state.weight(&crate::linalg::tensor_vec(x, y)).clamp(0.0, 1.0)).collect())
        .collect())
}

/// All four tables, indexed `[a][b]`.
pub fn all_tables(state: &impl QuantumState, d: usize) -> Result<[[ProbTable; 2]; 2]> {
    Ok([
        [cglmp_probabilities(state, 0, 0, d)?, cglmp_probabilities(state, 0, 1, d)?],
        [cglmp_probabilities(state, 1, 0, d)?, cglmp_probabilities(state, 1, 1, d)?],
    ])
}

/// `S_d` from the four outcome tables, indexed `[a][b]`.
pub fn bell_parameter_d(tables: &[[ProbTable; 2]; 2], d: usize) -> Result<f64> {
    for t in tables.iter().flatten() {
        if t.len() != d || t.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument(format!("probability table is not {d}x{d}")));
        }
        if t.iter().flatten().any(|p| !p.is_finite() || *p < -1e-12) {
            return Err(Error::InvalidArgument("probability table has negative or non-finite entries".into()));
        }
        let total: f64 = t.iter().flatten().sum();
        if total > 1.0 + 1e-9 {
            return Err(Error::InvalidArgument(format!("probability table sums to {total}")));
        }
    }
    let c = coefficients(d);
    let mut s = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for v in 0..d {
                for w in 0..d {
                    s += c[a][b][(v + d - w) % d] * tables[a][b][v][w];
                }
            }
        }
    }
    Ok(s)
}

/// The `d² x d²` operator with `Tr(ρ Ŝ_d) = S_d`.
pub fn bell_operator_d(d: usize) -> Result<HermitianMatrix> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("d = {d} < 2")));
    }
    let c = coefficients(d);
    let proj = |party, setting| -> Vec<ComplexMatrix> {
        (0..d).map(|v| ComplexMatrix::projector(&cglmp_vector(party, setting, d, v))).collect()
    };
    let pa = [proj(Party::A, 0), proj(Party::A, 1)];
    let pb = [proj(Party::B, 0), proj(Party::B, 1)];
    let mut s = ComplexMatrix::zeros(d * d, d * d);
    for a in 0..2 {
        for b in 0..2 {
            for w in 0..d {
                // X_w = Σ_v c[(v - w) mod d] P_a^v, then S += X_w ⊗ P_b^w
                let mut x = ComplexMatrix::zeros(d, d);
                for v in 0..d {
                    let coef = c[a][b][(v + d - w) % d];
                    if coef != 0.0 {
                        x.add_scaled(Complex::real(coef), &pa[a][v])?;
                    }
                }
                s.add_scaled(Complex::ONE, &tensor(&x, &pb[b][w]))?;
            }
        }
    }
    // The sum of ~4d² rank-one terms carries roundoff well above 1e-12 for
    // large d before symmetrisation.
    HermitianMatrix::with_tolerance(s, 1e-9)
}

/// `<ψ_me| Ŝ_d |ψ_me>` for the maximally entangled state.
pub fn max_entangled_violation(d: usize) -> Result<f64> {
    let op = bell_operator_d(d)?;
    max_entangled(d)?.expectation(&op)
}

#[derive(Clone, Debug, Serialize)]
pub struct CglmpResult {
    pub d: usize,
    pub s1: f64,
    pub s2: f64,
    /// Real coefficients of `|s₁> = Σ_k c_k |k,k>` after phase fixing.
    pub s1_vector_coeffs: Vec<f64>,
    pub s_me: f64,
    pub s_bound: f64,
    /// `|<s̃₁|s₁>|²`.
    pub q: f64,
    /// Index of the coefficient dropped from `|s₁>`.
    pub dropped_index: usize,
    pub lhv_limit: f64,
    /// `s₁ >= |λ_min|`: the largest eigenvalue is also the largest in
    /// magnitude.
    pub s1_dominates_magnitude: bool,
    pub lambda_min: f64,
}

impl CglmpResult {
    /// `|s̃₁>`: `|s₁>` with the smallest coefficient removed, renormalised.
    pub fn witness_state(&self) -> Result<StateVector> {
        let d = self.d;
        let mut amps = vec![Complex::ZERO; d * d];
        for (k, c) in self.s1_vector_coeffs.iter().enumerate() {
            if k != self.dropped_index {
                amps[k * d + k] = Complex::real(*c);
            }
        }
        StateVector::normalized(d, d, amps)
    }

    pub fn s1_state(&self) -> Result<StateVector> {
        let d = self.d;
        let mut amps = vec![Complex::ZERO; d * d];
        for (k, c) in self.s1_vector_coeffs.iter().enumerate() {
            amps[k * d + k] = Complex::real(*c);
        }
        StateVector::normalized(d, d, amps)
    }
}

fn check_range(d: usize, unchecked: bool) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("d = {d} < 2")));
    }
    if d > MAX_VALIDATED_D && !unchecked {
        return Err(Error::InvalidArgument(format!(
            "d = {d} is beyond the validated range 2..={MAX_VALIDATED_D}; pass unchecked to override"
        )));
    }
    Ok(())
}

pub fn witness_bound(d: usize) -> Result<CglmpResult> {
    witness_bound_with(d, false)
}

/// Diagonalises `Ŝ_d`, checks that `|s₁>` lies on `span{|k,k>}` with real
/// coefficients, and combines `s₁` and `s₂` with the overlap between `|s₁>`
/// and its truncation.
pub fn witness_bound_with(d: usize, unchecked: bool) -> Result<CglmpResult> {
    check_range(d, unchecked)?;
    let op = bell_operator_d(d)?;
    let eig = eig_hermitian(&op)?;
    let s1 = eig.eigenvalues[0];
    let s2 = eig.eigenvalues[1];
    let lambda_min = eig.min();

    let mut v = top_vector(&eig, d)?;
    fix_phase(&mut v);
    let mut coeffs = Vec::with_capacity(d);
    for j in 0..d {
        for k in 0..d {
            let z = v[j * d + k];
            if j != k && z.abs() > STRUCTURE_TOL {
                return Err(Error::StructureViolation(format!(
                    "d = {d}: |s1> has amplitude {:e} on |{j},{k}>",
                    z.abs()
                )));
            }
        }
        let c = v[j * d + j];
        if c.im.abs() > STRUCTURE_TOL {
            return Err(Error::StructureViolation(format!(
                "d = {d}: coefficient c_{j} = {c} is not real after phase fixing"
            )));
        }
        coeffs.push(c.re);
    }

    let dropped_index = smallest_magnitude(&coeffs);
    let mut result = CglmpResult {
        d,
        s1,
        s2,
        s1_vector_coeffs: coeffs,
        s_me: max_entangled(d)?.expectation(&op)?,
        s_bound: 0.0,
        q: 0.0,
        dropped_index,
        lhv_limit: LHV_LIMIT,
        s1_dominates_magnitude: s1 >= lambda_min.abs(),
        lambda_min,
    };
    let tilde = result.witness_state()?;
    let q = crate::linalg::inner(tilde.amplitudes(), &v).norm_sqr();
    result.q = q;
    result.s_bound = q * s1 + (1.0 - q) * s2;
    Ok(result)
}

/// Magnitudes closer than this count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// First index among the coefficients of least magnitude, treating
/// magnitudes within [`TIE_TOL`] as equal.
pub fn smallest_magnitude(c: &[f64]) -> usize {
    let min = c.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    c.iter().position(|x| x.abs() <= min + TIE_TOL).unwrap_or(0)
}

/// The `s₁` eigenvector; inside a degenerate top eigenspace, the vector with
/// the most weight on `span{|k,k>}`.
fn top_vector(eig: &EigenDecomposition, d: usize) -> Result<Vec<Complex>> {
    let top = eig.eigenvalues[0];
    let cluster: Vec<&Vec<Complex>> = eig
        .eigenvalues
        .iter()
        .zip(&eig.eigenvectors)
        .take_while(|(l, _)| top - **l < DEGENERACY_GAP)
        .map(|(_, v)| v)
        .collect();
    if cluster.len() == 1 {
        return Ok(cluster[0].clone());
    }
    let m = cluster.len();
    let mut g = ComplexMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            g[(i, j)] = (0..d).map(|k| cluster[i][k * d + k].conj() * cluster[j][k * d + k]).sum();
        }
    }
    let ge = eig_hermitian(&HermitianMatrix::with_tolerance(g, 1e-10)?)?;
    let alpha = &ge.eigenvectors[0];
    let mut v = vec![Complex::ZERO; d * d];
    for (a, u) in alpha.iter().zip(&cluster) {
        for (x, y) in v.iter_mut().zip(u.iter()) {
            *x += *a * *y;
        }
    }
    crate::states::normalize(&v)
}

/// Witness results for `dmin..=dmax` in `d` order, computed in parallel.
pub fn table(dmin: usize, dmax: usize, unchecked: bool) -> Result<Vec<CglmpResult>> {
    if dmin > dmax {
        return Err(Error::InvalidArgument(format!("dmin = {dmin} > dmax = {dmax}")));
    }
    check_range(dmin, unchecked)?;
    check_range(dmax, unchecked)?;
    // Largest d first so the slow cases start early.
    let mut rows: Vec<CglmpResult> = (dmin..=dmax)
        .rev()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|d| witness_bound_with(d, unchecked))
        .collect::<Result<_>>()?;
    rows.sort_by_key(|r| r.d);
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessVerdict {
    pub d: usize,
    pub measured_s: f64,
    pub uncertainty: f64,
    pub s_bound: f64,
    pub certified: bool,
    /// `|<s̃₁|s₁>|²`.
    pub q: f64,
}

/// Certified when `measured_s - uncertainty > S_d^bound`.
pub fn certify(d: usize, measured_s: f64, uncertainty: f64) -> Result<WitnessVerdict> {
    if !(uncertainty >= 0.0) || !measured_s.is_finite() || !uncertainty.is_finite() {
        return Err(Error::InvalidArgument(format!("measured S = {measured_s}, uncertainty = {uncertainty}")));
    }
    let w = witness_bound(d)?;
    Ok(WitnessVerdict {
        d,
        measured_s,
        uncertainty,
        s_bound: w.s_bound,
        certified: measured_s - uncertainty > w.s_bound,
        q: w.q,
    })
}
