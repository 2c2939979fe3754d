use std::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};
use crate::scalar::Real;

/// Dense row-major complex matrix; entries are stored as interleaved
/// `(re, im)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "CMatrix::new",
                format!("{} values for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_real(m: &Matrix<T>) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            data: m
                .as_slice()
                .iter()
                .map(|&v| Complex::new(v, T::zero()))
                .collect(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "CMatrix::matmul",
                format!("inner dimension {}", self.cols),
                other.rows,
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * v` for a complex vector.
    pub fn apply(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if v.len() != self.cols {
            return Err(Error::shape("CMatrix::apply", self.cols, v.len()));
        }
        Ok(self
            .data
            .chunks(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect())
    }

    /// Largest entrywise deviation of `self^H self` from the identity.
    pub fn unitarity_defect(&self) -> T {
        let p = self
            .adjoint()
            .matmul(self)
            .expect("adjoint product is always conformable");
        let mut worst = T::zero();
        for i in 0..p.rows {
            for j in 0..p.cols {
                let target = if i == j { T::one() } else { T::zero() };
                let d = p[(i, j)] - Complex::new(target, T::zero());
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Complex matrix with real and imaginary parts i.i.d. uniform on `[lo, hi)`.
pub fn uniform_cmatrix<T: Real>(
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
    rng: &mut RngStream,
) -> Result<CMatrix<T>> {
    if rows == 0 || cols == 0 || !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "uniform_cmatrix needs positive dimensions and lo < hi, got {rows}x{cols} on [{lo}, {hi})"
        )));
    }
    let data = (0..rows * cols)
        .map(|_| {
            let re = rng.uniform(lo, hi);
            let im = rng.uniform(lo, hi);
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect();
    Ok(CMatrix { rows, cols, data })
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_unitary_and_neutral() {
        let mut rng = RngStream::new(4);
        let a: CMatrix<f64> = uniform_cmatrix(3, 3, -1.0, 1.0, &mut rng).unwrap();
        let i = CMatrix::identity(3);
        assert_eq!(a.matmul(&i).unwrap(), a);
        assert_eq!(i.unitarity_defect(), 0.0);
        assert!(a.unitarity_defect() > 1e-3);
    }

    #[test]
    fn adjoint_of_product() {
        let mut rng = RngStream::new(9);
        let a: CMatrix<f64> = uniform_cmatrix(3, 4, -1.0, 1.0, &mut rng).unwrap();
        let b: CMatrix<f64> = uniform_cmatrix(4, 2, -1.0, 1.0, &mut rng).unwrap();
        let lhs = a.matmul(&b).unwrap().adjoint();
        let rhs = b.adjoint().matmul(&a.adjoint()).unwrap();
        for (x, y) in lhs.as_slice().iter().zip(rhs.as_slice()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn apply_matches_matmul() {
        let mut rng = RngStream::new(1);
        let a: CMatrix<f64> = uniform_cmatrix(3, 3, -1.0, 1.0, &mut rng).unwrap();
        let v: CMatrix<f64> = uniform_cmatrix(3, 1, -1.0, 1.0, &mut rng).unwrap();
        let got = a.apply(v.as_slice()).unwrap();
        let want = a.matmul(&v).unwrap();
        for (x, y) in got.iter().zip(want.as_slice()) {
            assert!((x - y).norm() < 1e-15);
        }
        assert!(a.apply(&v.as_slice()[..2]).is_err());
    }
}
