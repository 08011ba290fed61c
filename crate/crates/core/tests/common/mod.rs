// Oracles spell out their sums index by index.
#![allow(clippy::needless_range_loop)]

//! Helpers shared by the integration tests: random operators, independent
//! oracles, and the golden table.

#![allow(dead_code)]

use std::f64::consts::PI;

use bellscope::linalg::{Complex, ComplexMatrix, HermitianMatrix};
use bellscope::measurements::{dichotomic_projector, MeasurementSetting, Outcome};
use bellscope::states::StateVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> Complex {
    Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_matrix(n: usize, m: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_vec(n, m, (0..n * m).map(|_| random_complex(rng)).collect()).unwrap()
}

pub fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    let a = random_matrix(n, n, rng);
    let h = a.checked_add(&a.adjoint()).unwrap().scale_real(0.5);
    HermitianMatrix::new(h).unwrap()
}

pub fn random_unit_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex> {
    let v: Vec<Complex> = (0..n).map(|_| random_complex(rng)).collect();
    let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / nrm).collect()
}

pub fn random_state(da: usize, db: usize, rng: &mut ChaCha8Rng) -> StateVector {
    StateVector::new(da, db, random_unit_vector(da * db, rng)).unwrap()
}

/// `exp(K)` by scaling and squaring a truncated Taylor series.
pub fn expm(k: &ComplexMatrix) -> ComplexMatrix {
    let n = k.rows();
    let norm = k.frobenius_norm();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let ks = k.scale_real(scale);
    let mut term = ComplexMatrix::identity(n);
    let mut sum = ComplexMatrix::identity(n);
    for i in 1..20 {
        term = term.matmul(&ks).unwrap().scale_real(1.0 / i as f64);
        sum = sum.checked_add(&term).unwrap();
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum).unwrap();
    }
    sum
}

/// `exp(iH)` for a random Hermitian `H`.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let h = random_hermitian(n, rng);
    expm(&h.as_matrix().scale(Complex::I))
}

/// Determinant by LU decomposition with partial pivoting.
pub fn det_lu(m: &ComplexMatrix) -> Complex {
    let n = m.rows();
    let mut a: Vec<Vec<Complex>> = m.to_rows();
    let mut det = Complex::ONE;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[piv][col].abs() == 0.0 {
            return Complex::ZERO;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                let x = a[col][c];
                a[r][c] -= f * x;
            }
        }
    }
    det
}

pub struct GoldenRow {
    pub d: usize,
    pub s1: f64,
    pub s2: f64,
    pub s_bound: f64,
}

/// The published `(d, s1, s2, S_bound)` table.
pub fn golden_table() -> Vec<GoldenRow> {
    include_str!("../data/cglmp_table.csv")
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            GoldenRow {
                d: f[0].parse().unwrap(),
                s1: f[1].parse().unwrap(),
                s2: f[2].parse().unwrap(),
                s_bound: f[3].parse().unwrap(),
            }
        })
        .collect()
}

/// Analyser amplitudes written out directly from the Fourier formula:
/// party A `exp(i 2π/d j (v + α))`, party B `exp(i 2π/d j (-w + β))`.
pub fn oracle_analyser(party_a: bool, setting: usize, d: usize, outcome: usize) -> Vec<Complex> {
    let alpha = [0.0, 0.5];
    let beta = [0.25, -0.25];
    (0..d)
        .map(|j| {
            let x = if party_a { outcome as f64 + alpha[setting] } else { -(outcome as f64) + beta[setting] };
            let ph = 2.0 * PI / d as f64 * j as f64 * x;
            Complex::new(ph.cos(), ph.sin()) / (d as f64).sqrt()
        })
        .collect()
}

/// `P_ab[v][w] = |(<v| ⊗ <w|) ψ|²` summed term by term.
pub fn oracle_tables(psi: &StateVector, d: usize) -> [[Vec<Vec<f64>>; 2]; 2] {
    let table = |a: usize, b: usize| -> Vec<Vec<f64>> {
        (0..d)
            .map(|v| {
                let x = oracle_analyser(true, a, d, v);
                (0..d)
                    .map(|w| {
                        let y = oracle_analyser(false, b, d, w);
                        let mut amp = Complex::ZERO;
                        for j in 0..d {
                            for k in 0..d {
                                amp += x[j].conj() * y[k].conj() * psi.amplitude(j, k);
                            }
                        }
                        amp.norm_sqr()
                    })
                    .collect()
            })
            .collect()
    };
    [[table(0, 0), table(0, 1)], [table(1, 0), table(1, 1)]]
}

/// Probability that `x - y ≡ k (mod d)` in a table `P[x][y]`.
fn p_diff(t: &[Vec<f64>], k: i64, d: usize) -> f64 {
    let mut s = 0.0;
    for x in 0..d {
        for y in 0..d {
            if (x as i64 - y as i64 - k).rem_euclid(d as i64) == 0 {
                s += t[x][y];
            }
        }
    }
    s
}

/// The CGLMP expression written term by term.
///
/// `P(A_a = B_b + k)` reads the (a, b) table as `A - B ≡ k`; `P(B_b = A_a + k)`
/// reads it as `B - A ≡ k`.
pub fn oracle_cglmp(t: &[[Vec<Vec<f64>>; 2]; 2], d: usize) -> f64 {
    let ab = |a: usize, b: usize, k: i64| p_diff(&t[a][b], k, d); // A_a = B_b + k
    let ba = |a: usize, b: usize, k: i64| p_diff(&t[a][b], -k, d); // B_b = A_a + k
    let mut s = 0.0;
    for k in 0..(d / 2) as i64 {
        let w = 1.0 - 2.0 * k as f64 / (d as f64 - 1.0);
        s += w
            * (ab(0, 0, k) + ba(1, 0, k + 1) + ab(1, 1, k) + ba(0, 1, k)
                - ab(0, 0, -k - 1)
                - ba(1, 0, -k)
                - ab(1, 1, -k - 1)
                - ba(0, 1, -k - 1));
    }
    s
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (tol {tol:e})");
}

/// Columns of a random unitary, as an orthonormal basis.
pub fn random_basis(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Complex>> {
    let u = random_unitary(n, rng);
    (0..n).map(|j| u.column(j)).collect()
}

/// A random ±1 setting `{p|φ><φ|, 1 - p|φ><φ|}`.
pub fn random_dichotomic(label: &str, n: usize, rng: &mut ChaCha8Rng) -> MeasurementSetting {
    let phi = random_unit_vector(n, rng);
    let p = rng.random_range(0.05..=1.0);
    dichotomic_projector(label, &phi, p).unwrap()
}

/// A random lossy setting: weighted projectors onto some vectors of a
/// random basis.
pub fn random_lossy_setting(label: &str, n: usize, rng: &mut ChaCha8Rng) -> MeasurementSetting {
    let basis = random_basis(n, rng);
    let m = rng.random_range(1..=n);
    let outcomes = basis
        .iter()
        .take(m)
        .enumerate()
        .map(|(i, v)| Outcome {
            value: i as i64,
            operator: HermitianMatrix::projector(v).scale(rng.random_range(0.1..=1.0)),
        })
        .collect();
    MeasurementSetting::new(label, outcomes).unwrap()
}
