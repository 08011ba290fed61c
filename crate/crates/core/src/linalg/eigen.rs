//! Cyclic Jacobi eigensolver for complex Hermitian matrices.

use super::complex::{inner, Complex, ZERO};
use super::matrix::ComplexMatrix;
use super::HermitianMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 64;

/// Eigenvalues closer than this are treated as one cluster when
/// re-orthonormalising eigenvectors.
pub const CLUSTER_GAP: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Sorted descending by algebraic value.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` belongs to `eigenvalues[k]`.
    pub eigenvectors: Vec<Vec<Complex>>,
    pub sweeps: usize,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min(&self) -> f64 {
        *self.eigenvalues.last().expect("empty decomposition")
    }

    /// `Σ_k λ_k v_k v_k†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut m = ComplexMatrix::zeros(n, n);
        for (lam, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            for i in 0..n {
                let a = v[i] * *lam;
                for j in 0..n {
                    m[(i, j)] += a * v[j].conj();
                }
            }
        }
        m
    }

    /// Rotates each eigenvector so its largest-modulus component is real and
    /// positive.
    pub fn fix_phases(&mut self) {
        for v in &mut self.eigenvectors {
            fix_phase(v);
        }
    }
}

/// Multiplies `v` by a global phase making its largest-modulus entry real
/// positive (first such entry on ties).
pub fn fix_phase(v: &mut [Complex]) {
    let mut best = 0;
    for (i, z) in v.iter().enumerate() {
        if z.abs() > v[best].abs() {
            best = i;
        }
    }
    let pivot = v[best];
    if pivot.abs() == 0.0 {
        return;
    }
    let phase = pivot.conj() / pivot.abs();
    for z in v.iter_mut() {
        *z *= phase;
    }
}

pub fn eig_hermitian(m: &HermitianMatrix) -> Result<EigenDecomposition> {
    eig_hermitian_with(m, DEFAULT_TOL)
}

pub fn eig_hermitian_with(m: &HermitianMatrix, tol: f64) -> Result<EigenDecomposition> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidArgument(format!("eigensolver tolerance {tol}")));
    }
    let n = m.dim();
    let mut a: Vec<Complex> = m.as_matrix().as_slice().to_vec();
    // Row k of `vt` is column k of the accumulated unitary, so both updates
    // below walk contiguous memory.
    let mut vt = ComplexMatrix::identity(n).as_slice().to_vec();

    let norm = m.as_matrix().frobenius_norm();
    let target = tol * norm;
    let skip = if n > 0 { target / n as f64 } else { 0.0 };

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a, n);
        if off <= target {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NonConvergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let g = a[p * n + q];
                if g.abs() <= skip {
                    continue;
                }
                rotate(&mut a, &mut vt, n, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut eigenvectors: Vec<Vec<Complex>> = order.iter().map(|&i| vt[i * n..(i + 1) * n].to_vec()).collect();
    orthonormalise_clusters(&eigenvalues, &mut eigenvectors);

    Ok(EigenDecomposition { eigenvalues, eigenvectors, sweeps })
}

fn off_diagonal_norm(a: &[Complex], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += a[i * n + j].norm_sqr();
        }
    }
    (2.0 * s).sqrt()
}

/// One complex Givens rotation zeroing `a[p][q]`.
///
/// The rotation is `U = [[c, s], [-s e^{-iφ}, c e^{-iφ}]]` on the (p, q)
/// plane, with `φ = arg a_pq`; `a ← U† a U` and `V ← V U`.
fn rotate(a: &mut [Complex], vt: &mut [Complex], n: usize, p: usize, q: usize) {
    let g = a[p * n + q];
    let gabs = g.abs();
    let ph = g / gabs; // e^{iφ}
    let app = a[p * n + p].re;
    let aqq = a[q * n + q].re;

    let theta = (aqq - app) / (2.0 * gabs);
    let t = if theta >= 0.0 {
        1.0 / (theta + (theta * theta + 1.0).sqrt())
    } else {
        -1.0 / (-theta + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // Rows p and q of U† a (contiguous), mirrored into columns.
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        let new_p = apk * c - ph * aqk * s;
        let new_q = apk * s + ph * aqk * c;
        a[p * n + k] = new_p;
        a[q * n + k] = new_q;
        a[k * n + p] = new_p.conj();
        a[k * n + q] = new_q.conj();
    }
    a[p * n + p] = Complex::real(app - t * gabs);
    a[q * n + q] = Complex::real(aqq + t * gabs);
    a[p * n + q] = ZERO;
    a[q * n + p] = ZERO;

    // Columns p and q of V U, stored as rows of vt.
    let phc = ph.conj();
    for k in 0..n {
        let vp = vt[p * n + k];
        let vq = vt[q * n + k];
        vt[p * n + k] = vp * c - phc * vq * s;
        vt[q * n + k] = vp * s + phc * vq * c;
    }
}

/// Modified Gram-Schmidt inside each run of near-equal eigenvalues.
fn orthonormalise_clusters(values: &[f64], vectors: &mut [Vec<Complex>]) {
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end - 1] - values[end] < CLUSTER_GAP {
            end += 1;
        }
        for k in start..end {
            for j in start..k {
                let (head, tail) = vectors.split_at_mut(k);
                let proj = inner(&head[j], &tail[0]);
                for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= proj * *y;
                }
            }
            let nrm = super::complex::norm(&vectors[k]);
            for x in vectors[k].iter_mut() {
                *x = *x / nrm;
            }
        }
        start = end;
    }
}
