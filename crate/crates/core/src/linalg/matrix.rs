use std::ops::{Add, Index, IndexMut, Mul, Sub};

use super::complex::{Complex, ONE, ZERO};
use crate::error::{Error, Result};

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        if let Some(z) = data.iter().find(|z| !z.is_finite()) {
            return Err(Error::NonFinite(z.to_string()));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::from_vec(n, m, rows.iter().flatten().copied().collect())
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Complex>> = rows.iter().map(|r| r.iter().map(|&x| Complex::real(x)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex::real(v);
        }
        m
    }

    /// `|u><v|`.
    pub fn outer(u: &[Complex], v: &[Complex]) -> Self {
        let mut m = Self::zeros(u.len(), v.len());
        for (i, a) in u.iter().enumerate() {
            for (j, b) in v.iter().enumerate() {
                m.data[i * v.len() + j] = *a * b.conj();
            }
        }
        m
    }

    /// Rank-one projector `|v><v|`.
    pub fn projector(v: &[Complex]) -> Self {
        Self::outer(v, v)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[Complex] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<Complex>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        m
    }

    pub fn scale(&self, k: Complex) -> Self {
        ComplexMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| *z * k).collect() }
    }

    pub fn scale_real(&self, k: f64) -> Self {
        self.scale(Complex::real(k))
    }

    pub fn trace(&self) -> Complex {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (*a - *b).abs()).fold(0.0, f64::max)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * *b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[Complex]) -> Result<Vec<Complex>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix applied to length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| *a * *b).sum()).collect())
    }

    /// `<u|M|v>`.
    pub fn sandwich(&self, u: &[Complex], v: &[Complex]) -> Result<Complex> {
        let mv = self.matvec(v)?;
        Ok(super::complex::inner(u, &mv))
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Result<Complex> {
        if self.cols != other.rows || self.rows != other.cols {
            return Err(Error::DimensionMismatch("trace of non-square product".into()));
        }
        let mut acc = ZERO;
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self.data[i * self.cols + k] * other.data[k * other.cols + i];
            }
        }
        Ok(acc)
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex, Complex) -> Complex) -> Result<Self> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    /// In-place `self += k * other`.
    pub fn add_scaled(&mut self, k: Complex, other: &Self) -> Result<()> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch("add_scaled".into()));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += k * *b;
        }
        Ok(())
    }

    /// Largest `|M_ij - conj(M_ji)|`; infinite for non-square input.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).abs();
                worst = worst.max(d);
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex {
        &mut self.data[i * self.cols + j]
    }
}

// Operator forms panic on shape mismatch; use the checked_* methods for
// untrusted shapes.
impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, o: &ComplexMatrix) -> ComplexMatrix {
        self.checked_add(o).expect("matrix shapes differ")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, o: &ComplexMatrix) -> ComplexMatrix {
        self.checked_sub(o).expect("matrix shapes differ")
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, o: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(o).expect("inner dimensions differ")
    }
}

/// Kronecker product: block `(i, j)` of the result is `a[i][j] * b`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let s = a.data[i * a.cols + j];
            if s == ZERO {
                continue;
            }
            for k in 0..b.rows {
                let dst = (i * b.rows + k) * cols + j * b.cols;
                let src = &b.data[k * b.cols..(k + 1) * b.cols];
                for (o, x) in out.data[dst..dst + b.cols].iter_mut().zip(src) {
                    *o = s * *x;
                }
            }
        }
    }
    out
}

/// Kronecker product of two vectors.
pub fn tensor_vec(u: &[Complex], v: &[Complex]) -> Vec<Complex> {
    let mut out = Vec::with_capacity(u.len() * v.len());
    for a in u {
        for b in v {
            out.push(*a * *b);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn identity_tensor_identity() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(tensor(&i2, &i2), ComplexMatrix::identity(4));
    }

    #[test]
    fn pauli_z_tensor_square() {
        let z = ComplexMatrix::diagonal(&[1.0, -1.0]);
        assert_eq!(tensor(&z, &z), ComplexMatrix::diagonal(&[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn tensor_matches_four_index_definition() {
        // Deterministic pseudo-random 3x3 entries.
        let mut s = 0.37_f64;
        let mut next = || {
            s = (s * 97.13 + 0.171).fract();
            s - 0.5
        };
        let a = ComplexMatrix::from_vec(3, 3, (0..9).map(|_| c(next(), next())).collect()).unwrap();
        let b = ComplexMatrix::from_vec(3, 3, (0..9).map(|_| c(next(), next())).collect()).unwrap();
        let t = tensor(&a, &b);
        assert_eq!((t.rows(), t.cols()), (9, 9));
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let expect = a[(i, j)] * b[(k, l)];
                        assert!((t[(3 * i + k, 3 * j + l)] - expect).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn rectangular_tensor_shape() {
        let a = ComplexMatrix::zeros(2, 3);
        let b = ComplexMatrix::zeros(4, 1);
        let t = tensor(&a, &b);
        assert_eq!((t.rows(), t.cols()), (8, 3));
    }

    #[test]
    fn from_vec_rejects_bad_length_and_nan() {
        assert!(ComplexMatrix::from_vec(2, 2, vec![ZERO; 3]).is_err());
        assert!(ComplexMatrix::from_vec(1, 1, vec![c(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn matmul_and_trace_product_agree() {
        let a = ComplexMatrix::from_rows(&[vec![c(1.0, 1.0), c(0.0, 2.0)], vec![c(3.0, 0.0), c(-1.0, 0.5)]]).unwrap();
        let b = a.adjoint();
        let p = &a * &b;
        assert!((p.trace() - a.trace_product(&b).unwrap()).abs() < 1e-14);
        assert!(p.hermiticity_defect() < 1e-14);
    }
}
