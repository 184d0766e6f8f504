//! Small dense linear algebra: enough for truncated Jacobians, flow
//! determinants and Nyström matrices (dimensions up to a few hundred).

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{LfmError, Result};
use crate::scalar::Real;

/// Dense row-major square or rectangular matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
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

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.concat() }
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

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "vector length differs from column count");
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum()).collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// Induced 1-norm (max column sum).
    pub fn norm1(&self) -> T {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<T>()).fold(T::zero(), T::max)
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn lu(&self) -> Result<Lu<T>> {
        Lu::new(self)
    }

    /// Determinant by partial-pivot LU; a structurally singular matrix gives 0.
    pub fn det(&self) -> T {
        match Lu::new(self) {
            Ok(lu) => lu.det(),
            Err(_) => T::zero(),
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        self.lu()?.inverse()
    }

    /// Matrix exponential by scaling and squaring with a truncated Taylor series.
    pub fn expm(&self) -> Self {
        assert!(self.is_square());
        let n = self.rows;
        let norm = self.norm1();
        let mut squarings = 0u32;
        let half = T::lit(0.5);
        let mut scaled_norm = norm;
        while scaled_norm > half {
            scaled_norm *= half;
            squarings += 1;
        }
        let a = self.scale(T::lit(0.5_f64.powi(squarings as i32)));
        // ||a|| <= 1/2: 20 terms push the truncation below 1e-25.
        let mut term = Self::identity(n);
        let mut sum = Self::identity(n);
        for k in 1..=20 {
            term = term.matmul(&a).scale(T::one() / T::from_usize_lossy(k));
            sum = sum.add(&term);
        }
        for _ in 0..squarings {
            sum = sum.matmul(&sum);
        }
        sum
    }

    /// Eigenvalues and eigenvectors (columns) of a symmetric matrix by cyclic
    /// Jacobi rotations. Eigenvalues are returned in descending order.
    pub fn symmetric_eigen(&self) -> (Vec<T>, Self) {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut v = Self::identity(n);
        let scale = self.frobenius().max(T::min_positive_value());
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            if off.sqrt() <= T::epsilon() * T::lit(1e-2) * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= T::min_positive_value() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = Self::from_fn(n, n, |r, c| v[(r, order[c])]);
        (values, vectors)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        Ok(())
    }
}

/// Partial-pivot LU factorisation `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
    sign: T,
    /// Smallest |pivot| divided by the largest |entry| of the input.
    pub pivot_ratio: T,
}

impl<T: Real> Lu<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(LfmError::DimensionMismatch(format!("LU of a {}x{} matrix", a.rows, a.cols)));
        }
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        let scale = a.max_abs();
        let mut min_pivot = T::infinity();
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, lu[i * n + k].abs()))
                    .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == T::zero() {
                return Err(LfmError::SingularJacobian { tau: f64::NAN });
            }
            min_pivot = min_pivot.min(pmax);
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                if factor != T::zero() {
                    for j in (k + 1)..n {
                        let ukj = lu[k * n + j];
                        lu[i * n + j] -= factor * ukj;
                    }
                }
            }
        }
        let pivot_ratio = if n == 0 { T::one() } else { min_pivot / scale };
        Ok(Self { n, lu, perm, sign, pivot_ratio })
    }

    pub fn det(&self) -> T {
        (0..self.n).fold(self.sign, |acc, i| acc * self.lu[i * self.n + i])
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[i * n + j];
                x[i] = x[i] - l * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let u = self.lu[i * n + j];
                let xj = x[j];
                x[i] -= u * xj;
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }

    pub fn inverse(&self) -> Result<Matrix<T>> {
        let n = self.n;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }
}

/// Gram–Schmidt (modified, applied twice) on the columns of `vectors`
/// under the inner product `<a, b> = a^T M b` for symmetric positive `M`.
pub fn orthonormalize_columns<T: Real>(vectors: &[Vec<T>], metric: &Matrix<T>) -> Vec<Vec<T>> {
    let dot = |a: &[T], b: &[T]| -> T {
        let mb = metric.matvec(b);
        a.iter().zip(&mb).map(|(&x, &y)| x * y).sum()
    };
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _pass in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(wi, &bi)| *wi -= c * bi);
            }
        }
        let norm = dot(&w, &w).sqrt();
        if norm > T::epsilon() * T::lit(1e3) {
            basis.push(w.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}
