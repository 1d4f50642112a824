//! Dense matrices over a [`Ring`], plus numerical helpers for complex entries.

use std::fmt;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{real, Real, Ring};

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[T]> = self.data.chunks(self.cols.max(1)).collect();
        f.debug_struct("Matrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("data", &rows)
            .finish()
    }
}

impl<T: Ring> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Entry at 0-based `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn last_row(&self) -> Vec<T> {
        self.row(self.rows - 1).to_vec()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols.max(1)).map(<[T]>::to_vec).take(self.rows).collect()
    }

    pub fn mul(&self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out: Matrix<T> = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let idx = i * out.cols + j;
                    let prod = a.clone() * b.clone();
                    out.data[idx] = out.data[idx].clone() + prod;
                }
            }
        }
        out
    }

    /// Row vector times matrix.
    pub fn vec_mul(v: &[T], m: &Matrix<T>) -> Vec<T> {
        assert_eq!(v.len(), m.rows);
        (0..m.cols)
            .map(|j| {
                v.iter().enumerate().fold(T::zero(), |acc, (k, a)| {
                    let b = m.get(k, j);
                    if a.is_zero() || b.is_zero() {
                        acc
                    } else {
                        acc + a.clone() * b.clone()
                    }
                })
            })
            .collect()
    }

    /// Upper-left `m × m` block.
    pub fn top_left(&self, m: usize) -> Matrix<T> {
        Matrix::from_fn(m, m, |i, j| self.get(i, j).clone())
    }

    /// Places a square matrix in the upper-left corner of the `n × n` identity.
    pub fn embed(&self, n: usize) -> Matrix<T> {
        assert!(self.is_square() && self.rows <= n);
        let mut out = Matrix::identity(n);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn map<U, G: FnMut(&T) -> U>(&self, f: G) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Determinant by Laplace expansion along the first column. Works over
    /// any ring; only meant for small sizes.
    pub fn det_expansion(&self) -> T {
        assert!(self.is_square());
        fn rec<T: Ring>(m: &Matrix<T>, rows: &[usize], col: usize) -> T {
            if rows.is_empty() {
                return T::one();
            }
            let mut acc = T::zero();
            for (pos, &r) in rows.iter().enumerate() {
                let a = m.get(r, col);
                if a.is_zero() {
                    continue;
                }
                let rest: Vec<usize> = rows.iter().copied().filter(|&x| x != r).collect();
                let term = a.clone() * rec(m, &rest, col + 1);
                acc = if pos % 2 == 0 { acc + term } else { acc - term };
            }
            acc
        }
        let rows: Vec<usize> = (0..self.rows).collect();
        rec(self, &rows, 0)
    }
}

impl<F: Real> Matrix<Complex<F>> {
    pub fn to_nalgebra(&self) -> DMatrix<Complex<F>> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<Complex<F>>) -> Self {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    pub fn determinant(&self) -> Complex<F> {
        assert!(self.is_square());
        if self.rows == 0 {
            return Complex::new(F::one(), F::zero());
        }
        self.to_nalgebra().determinant()
    }

    pub fn inverse(&self) -> Result<Self> {
        self.to_nalgebra()
            .try_inverse()
            .map(|m| Matrix::from_nalgebra(&m))
            .ok_or(Error::SingularMatrix)
    }

    pub fn frobenius_norm(&self) -> F {
        crate::scalar::norm(&self.data)
    }

    pub fn frobenius_distance(&self, other: &Self) -> F {
        crate::scalar::distance(&self.data, &other.data)
    }

    /// Whether `|det - 1| <= tol`.
    pub fn is_special(&self, tol: F) -> bool {
        let d = self.determinant() - Complex::new(F::one(), F::zero());
        ComplexField::modulus(d) <= tol
    }

    pub fn max_abs(&self) -> F {
        self.data
            .iter()
            .fold(F::zero(), |m, z| m.max(ComplexField::modulus(*z)))
    }
}

/// Singular values in descending order.
pub fn singular_values<F: Real>(m: &Matrix<Complex<F>>) -> Vec<F> {
    if m.rows() == 0 || m.cols() == 0 {
        return Vec::new();
    }
    let sv = m.to_nalgebra().singular_values();
    let mut v: Vec<F> = sv.iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Numerical rank: number of singular values above `rel_tol * largest`.
/// Also returns the ratio of the `k`-th largest singular value to the
/// largest, where `k = min(rows, cols)`.
pub fn numerical_rank<F: Real>(m: &Matrix<Complex<F>>, rel_tol: F) -> (usize, F) {
    let sv = singular_values(m);
    let Some(&largest) = sv.first() else {
        return (0, F::zero());
    };
    if largest <= F::zero() {
        return (0, F::zero());
    }
    let rank = sv.iter().filter(|&&s| s > rel_tol * largest).count();
    let smallest = *sv.last().unwrap();
    (rank, smallest / largest)
}

/// Minimum-norm least-squares solution of `J x = r` via the SVD, discarding
/// singular values at or below `rel_tol * largest`.
pub fn min_norm_solve<F: Real>(j: &Matrix<Complex<F>>, r: &[Complex<F>], rel_tol: F) -> Vec<Complex<F>> {
    assert_eq!(j.rows(), r.len());
    let svd = j.to_nalgebra().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors");
    let vt = svd.v_t.as_ref().expect("right singular vectors");
    let largest = svd.singular_values.iter().copied().fold(F::zero(), |a, b| a.max(b));
    let cutoff = rel_tol * largest;
    let rhs = DVector::from_column_slice(r);
    let mut x = DVector::<Complex<F>>::zeros(j.cols());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff || s <= F::zero() {
            continue;
        }
        let coef = u.column(k).dotc(&rhs) / Complex::new(s, F::zero());
        // rows of v_t are conjugated right singular vectors
        for (idx, v) in vt.row(k).iter().enumerate() {
            x[idx] += v.conj() * coef;
        }
    }
    x.iter().copied().collect()
}

/// Default relative rank threshold shared by the submersion test and the tracker.
pub fn default_rank_tol<F: Real>() -> F {
    real(1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    type C = Complex<f64>;

    #[test]
    fn identity_and_product() {
        let a = Matrix::from_rows(vec![vec![cx::<f64>(2.0, 0.0), cx(3.0, 0.0)], vec![cx(1.0, 0.0), cx(2.0, 0.0)]]).unwrap();
        assert_eq!(a.mul(&Matrix::identity(2)), a);
        let inv = a.inverse().unwrap();
        assert!(a.mul(&inv).frobenius_distance(&Matrix::identity(2)) < 1e-14);
        assert!(a.is_special(1e-12));
        assert!((a.det_expansion() - C::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn min_norm_solution_of_wide_system() {
        // x + y = 2 has minimum-norm solution (1, 1)
        let j = Matrix::from_rows(vec![vec![cx::<f64>(1.0, 0.0), cx(1.0, 0.0)]]).unwrap();
        let x = min_norm_solve(&j, &[cx(2.0, 0.0)], 1e-12);
        assert!((x[0] - cx(1.0, 0.0)).norm() < 1e-14);
        assert!((x[1] - cx(1.0, 0.0)).norm() < 1e-14);
        // complex entries: i*x = 1 -> x = -i
        let j = Matrix::from_rows(vec![vec![cx::<f64>(0.0, 1.0)]]).unwrap();
        let x = min_norm_solve(&j, &[cx(1.0, 0.0)], 1e-12);
        assert!((x[0] - cx(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn rank_of_deficient_matrix() {
        let j = Matrix::from_rows(vec![
            vec![cx::<f64>(-1.0, 0.0), cx(0.0, 0.0), cx(-1.0, 0.0)],
            vec![cx(0.0, 0.0), cx(0.0, 0.0), cx(0.0, 0.0)],
        ])
        .unwrap();
        assert_eq!(numerical_rank(&j, 1e-8).0, 1);
    }

    #[test]
    fn embed_and_block() {
        let a: Matrix<C> = Matrix::from_rows(vec![vec![cx(5.0, 0.0)]]).unwrap();
        let e = a.embed(3);
        assert_eq!(*e.get(0, 0), cx(5.0, 0.0));
        assert_eq!(*e.get(2, 2), cx(1.0, 0.0));
        assert_eq!(e.top_left(1), a);
    }
}
