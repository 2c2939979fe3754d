use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::scalar::Real;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Whether an operand enters a product as-is or transposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    N,
    T,
}

impl<T: Real> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::new",
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
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("Matrix::from_rows", "equal row lengths", "ragged rows"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    /// A single-row matrix.
    pub fn row_vector(v: &[T]) -> Self {
        Self {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
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
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact panics on a zero chunk size
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(T) -> T) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_shape("zip_map", other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.check_same_shape("hadamard", other)?;
        self.zip_map(other, |a, b| a * b)
    }

    pub fn hadamard_inplace(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape("hadamard", other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a *= b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: T, other: &Self) -> Result<()> {
        self.check_same_shape("axpy", other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Sum over rows, giving one value per column.
    pub fn column_sums(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for row in self.row_iter() {
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Adds `v` to every row.
    pub fn add_row_vector(&mut self, v: &[T]) -> Result<()> {
        if v.len() != self.cols {
            return Err(Error::shape("add_row_vector", self.cols, v.len()));
        }
        let cols = self.cols;
        for row in self.data.chunks_mut(cols.max(1)) {
            for (a, &b) in row.iter_mut().zip(v) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|&v| U::lit(v.to_f64_lossy()))
                .collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        product(self, Op::N, other, Op::N)
    }

    fn check_same_shape(&self, op: &'static str, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                op,
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(())
    }
}

fn op_dims<T>(m: &Matrix<T>, op: Op) -> (usize, usize, isize, isize) {
    let (r, c) = (m.rows, m.cols);
    match op {
        Op::N => (r, c, c as isize, 1),
        Op::T => (c, r, 1, c as isize),
    }
}

/// `c <- alpha * op(a) * op(b) + beta * c`.
pub fn gemm<T: Real>(
    alpha: T,
    a: &Matrix<T>,
    op_a: Op,
    b: &Matrix<T>,
    op_b: Op,
    beta: T,
    c: &mut Matrix<T>,
) -> Result<()> {
    let (m, k, rsa, csa) = op_dims(a, op_a);
    let (kb, n, rsb, csb) = op_dims(b, op_b);
    if k != kb || c.rows != m || c.cols != n {
        return Err(Error::shape(
            "gemm",
            format!("({m}x{k})*({k}x?) into {m}x{n}"),
            format!("({m}x{k})*({kb}x{n}) into {}x{}", c.rows, c.cols),
        ));
    }
    if m == 0 || n == 0 {
        return Ok(());
    }
    if k == 0 {
        c.scale(beta);
        return Ok(());
    }
    // SAFETY: dimensions and strides were validated against the buffer shapes
    // above, and `c` is a distinct &mut borrow so it cannot alias `a` or `b`.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
    Ok(())
}

/// `op(a) * op(b)` into a fresh matrix.
pub fn product<T: Real>(a: &Matrix<T>, op_a: Op, b: &Matrix<T>, op_b: Op) -> Result<Matrix<T>> {
    let (m, _, _, _) = op_dims(a, op_a);
    let (_, n, _, _) = op_dims(b, op_b);
    let mut c = Matrix::zeros(m, n);
    gemm(T::one(), a, op_a, b, op_b, T::zero(), &mut c)?;
    Ok(c)
}

/// Outer product `u v^T`.
pub fn outer<T: Real>(u: &[T], v: &[T]) -> Result<Matrix<T>> {
    if u.is_empty() || v.is_empty() {
        return Err(Error::InvalidArgument("outer product of an empty vector".into()));
    }
    Ok(Matrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j]))
}

/// Matrix with i.i.d. entries uniform on `[lo, hi)`, filled in row-major order.
pub fn uniform_matrix<T: Real>(
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
    rng: &mut RngStream,
) -> Result<Matrix<T>> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(format!(
            "uniform_matrix needs positive dimensions, got {rows}x{cols}"
        )));
    }
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "uniform_matrix needs lo < hi, got [{lo}, {hi})"
        )));
    }
    let data = (0..rows * cols)
        .map(|_| T::lit(rng.uniform(lo, hi)))
        .collect();
    Ok(Matrix { rows, cols, data })
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for row in self.data.chunks(self.cols.max(1)).take(self.rows.min(8)) {
            writeln!(f, "  {:?}", row)?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn hadamard_hand_case() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = m(&[&[2.0, 0.0], &[1.0, -1.0]]);
        assert_eq!(a.hadamard(&b).unwrap(), m(&[&[2.0, 0.0], &[3.0, -4.0]]));
    }

    #[test]
    fn hadamard_shape_mismatch() {
        let a = Matrix::<f64>::zeros(2, 3);
        let b = Matrix::<f64>::zeros(3, 2);
        assert!(matches!(a.hadamard(&b), Err(Error::Shape { .. })));
    }

    #[test]
    fn outer_cases() {
        assert_eq!(outer(&[1.0], &[5.0]).unwrap(), m(&[&[5.0]]));
        assert_eq!(
            outer(&[1.0, 2.0], &[3.0, 4.0]).unwrap(),
            m(&[&[3.0, 4.0], &[6.0, 8.0]])
        );
        let e1 = [0.0, 1.0, 0.0];
        let e2 = [0.0, 0.0, 1.0, 0.0];
        let o = outer(&e1, &e2).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let expect = if (i, j) == (1, 2) { 1.0 } else { 0.0 };
                assert_eq!(o[(i, j)], expect);
            }
        }
        assert!(outer::<f64>(&[], &[1.0]).is_err());
    }

    #[test]
    fn uniform_matrix_contracts() {
        let a: Matrix<f64> = uniform_matrix(2, 3, -1.0, 1.0, &mut RngStream::new(7)).unwrap();
        let b: Matrix<f64> = uniform_matrix(2, 3, -1.0, 1.0, &mut RngStream::new(7)).unwrap();
        assert_eq!(a, b);
        let eps = 1e-9;
        let c: Matrix<f64> = uniform_matrix(1, 1, 0.0, eps, &mut RngStream::new(3)).unwrap();
        assert!(c[(0, 0)] >= 0.0 && c[(0, 0)] < eps);
        assert!(matches!(
            uniform_matrix::<f64>(0, 3, 0.0, 1.0, &mut RngStream::new(1)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(uniform_matrix::<f64>(1, 1, 1.0, 1.0, &mut RngStream::new(1)).is_err());
    }

    #[test]
    fn uniform_matrix_mean_near_zero() {
        let a: Matrix<f64> = uniform_matrix(1000, 1000, -1.0, 1.0, &mut RngStream::new(1)).unwrap();
        let mean = a.sum() / 1e6;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn gemm_transposes_agree_with_naive() {
        let mut rng = RngStream::new(5);
        let a: Matrix<f64> = uniform_matrix(3, 4, -1.0, 1.0, &mut rng).unwrap();
        let b: Matrix<f64> = uniform_matrix(5, 4, -1.0, 1.0, &mut rng).unwrap();
        let got = product(&a, Op::N, &b, Op::T).unwrap();
        let bt = b.transpose();
        for i in 0..3 {
            for j in 0..5 {
                let naive: f64 = (0..4).map(|k| a[(i, k)] * bt[(k, j)]).sum();
                assert!((got[(i, j)] - naive).abs() < 1e-14);
            }
        }
        let got2 = product(&a, Op::T, &a, Op::N).unwrap();
        assert_eq!(got2.shape(), (4, 4));
        assert!((got2[(1, 2)] - (0..3).map(|k| a[(k, 1)] * a[(k, 2)]).sum::<f64>()).abs() < 1e-14);
    }

    #[test]
    fn gemm_rejects_bad_shapes() {
        let a = Matrix::<f64>::zeros(2, 3);
        let b = Matrix::<f64>::zeros(2, 3);
        assert!(product(&a, Op::N, &b, Op::N).is_err());
    }

    #[test]
    fn f32_and_f64_agree() {
        let mut rng = RngStream::new(8);
        let a: Matrix<f64> = uniform_matrix(6, 6, -1.0, 1.0, &mut rng).unwrap();
        let p64 = a.matmul(&a).unwrap();
        let a32: Matrix<f32> = a.cast();
        let p32 = a32.matmul(&a32).unwrap();
        for (x, y) in p64.as_slice().iter().zip(p32.as_slice()) {
            assert!((x - *y as f64).abs() < 1e-5);
        }
    }

    fn shape_and_seed() -> impl Strategy<Value = (usize, usize, u64)> {
        (1usize..=64, 1usize..=64, any::<u64>())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn identity_is_neutral((r, c, seed) in shape_and_seed()) {
            let a: Matrix<f64> = uniform_matrix(r, c, -2.0, 2.0, &mut RngStream::new(seed)).unwrap();
            prop_assert_eq!(a.matmul(&Matrix::identity(c)).unwrap(), a.clone());
            prop_assert_eq!(Matrix::identity(r).matmul(&a).unwrap(), a);
        }

        #[test]
        fn hadamard_identities((r, c, seed) in shape_and_seed()) {
            let mut rng = RngStream::new(seed);
            let a: Matrix<f64> = uniform_matrix(r, c, -2.0, 2.0, &mut rng).unwrap();
            let b: Matrix<f64> = uniform_matrix(r, c, -2.0, 2.0, &mut rng).unwrap();
            prop_assert_eq!(a.hadamard(&Matrix::filled(r, c, 1.0)).unwrap(), a.clone());
            prop_assert_eq!(a.hadamard(&Matrix::zeros(r, c)).unwrap().max_abs(), 0.0);
            prop_assert_eq!(a.hadamard(&b).unwrap(), b.hadamard(&a).unwrap());
        }

        #[test]
        fn outer_entries((r, c, seed) in shape_and_seed()) {
            let mut rng = RngStream::new(seed);
            let u: Vec<f64> = (0..r).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let v: Vec<f64> = (0..c).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let o = outer(&u, &v).unwrap();
            prop_assert_eq!(o.shape(), (r, c));
            for i in 0..r {
                for j in 0..c {
                    prop_assert_eq!(o[(i, j)], u[i] * v[j]);
                }
            }
            // rank one: outer(u, v) == column(u) * row(v)
            let uc = Matrix::new(r, 1, u.clone()).unwrap();
            let vr = Matrix::row_vector(&v);
            let p = uc.matmul(&vr).unwrap();
            for (x, y) in p.as_slice().iter().zip(o.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-15);
            }
        }

        #[test]
        fn random_constructors_are_reproducible(seed in any::<u64>()) {
            let a: Matrix<f32> = uniform_matrix(4, 7, -1.0, 1.0, &mut RngStream::new(seed)).unwrap();
            let b: Matrix<f32> = uniform_matrix(4, 7, -1.0, 1.0, &mut RngStream::new(seed)).unwrap();
            prop_assert_eq!(a.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            b.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}
