//! Small dense linear algebra: row-major matrices, Householder QR,
//! Cholesky and a Jacobi eigensolver for symmetric matrices.
//!
//! Sizes in this crate are modest (n up to a few thousand rows, at most a
//! few dozen columns in any solve), so everything is written for clarity
//! over blocking.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};
use libm::{fabs, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot threshold below which a column is declared dependent.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
                context: "matrix data length",
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: r.len(),
                    context: "row length",
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds an `n x cols.len()` matrix from column vectors.
    pub fn from_columns(n: usize, cols: &[&[f64]]) -> Result<Self> {
        let mut m = Self::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: c.len(),
                    context: "column length",
                });
            }
            for (i, v) in c.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_cols(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    /// Appends `other`'s columns to the right.
    pub fn hcat(&self, other: &Matrix) -> Result<Self> {
        if other.rows != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                actual: other.rows,
                context: "hcat row count",
            });
        }
        Ok(Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        }))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `self^T v`.
    pub fn t_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                axpy(vi, self.row(i), &mut out);
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    axpy(a, other.row(k), orow);
                }
            }
        }
        out
    }

    /// `self^T self`.
    pub fn gram(&self) -> Self {
        let p = self.cols;
        let mut g = Self::zeros(p, p);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..p {
                let ra = r[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..p {
                    g.data[a * p + b] += ra * r[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                g.data[a * p + b] = g.data[b * p + a];
            }
        }
        g
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Householder QR of a tall matrix (`rows >= cols`).
#[derive(Debug, Clone)]
pub struct Qr {
    /// Column-major copy holding R above the diagonal and reflectors below.
    qr: Vec<f64>,
    rdiag: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Qr {
    pub fn new(a: &Matrix) -> Result<Self> {
        let (m, n) = (a.nrows(), a.ncols());
        if m < n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: m,
                context: "QR needs at least as many rows as columns",
            });
        }
        let mut qr = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                qr[j * m + i] = a[(i, j)];
            }
        }
        let mut rdiag = vec![0.0; n];
        for k in 0..n {
            let (head, tail) = qr.split_at_mut(k * m + m);
            let colk = &mut head[k * m..];
            let mut nrm = 0.0;
            for v in &colk[k..] {
                nrm = libm::hypot(nrm, *v);
            }
            if nrm != 0.0 {
                if colk[k] < 0.0 {
                    nrm = -nrm;
                }
                for v in &mut colk[k..] {
                    *v /= nrm;
                }
                colk[k] += 1.0;
                for j in (k + 1)..n {
                    let colj = &mut tail[(j - k - 1) * m..(j - k) * m];
                    let s: f64 = -dot(&colk[k..], &colj[k..]) / colk[k];
                    axpy(s, &colk[k..], &mut colj[k..]);
                }
            }
            rdiag[k] = -nrm;
        }
        Ok(Self {
            qr,
            rdiag,
            rows: m,
            cols: n,
        })
    }

    /// Number of columns whose pivot is negligible relative to the largest.
    pub fn rank_deficiency(&self) -> usize {
        let max = self.rdiag.iter().fold(0.0f64, |a, v| a.max(fabs(*v)));
        if max == 0.0 {
            return self.cols;
        }
        self.rdiag
            .iter()
            .filter(|v| fabs(**v) <= RANK_TOL * max)
            .count()
    }

    pub fn check_full_rank(&self) -> Result<()> {
        match self.rank_deficiency() {
            0 => Ok(()),
            d => Err(Error::Singular {
                columns: self.cols,
                rank_deficiency: d,
            }),
        }
    }

    /// Applies `Q^T` in place to a vector of length `rows`.
    pub fn apply_qt(&self, y: &mut [f64]) {
        let m = self.rows;
        for k in 0..self.cols {
            let colk = &self.qr[k * m..(k + 1) * m];
            if colk[k] == 0.0 {
                continue;
            }
            let s = -dot(&colk[k..], &y[k..]) / colk[k];
            axpy(s, &colk[k..], &mut y[k..]);
        }
    }

    /// Applies `Q` in place to a vector of length `rows`.
    pub fn apply_q(&self, y: &mut [f64]) {
        let m = self.rows;
        for k in (0..self.cols).rev() {
            let colk = &self.qr[k * m..(k + 1) * m];
            if colk[k] == 0.0 {
                continue;
            }
            let s = -dot(&colk[k..], &y[k..]) / colk[k];
            axpy(s, &colk[k..], &mut y[k..]);
        }
    }

    /// Thin `Q` (rows x cols) with orthonormal columns.
    pub fn thin_q(&self) -> Matrix {
        let (m, n) = (self.rows, self.cols);
        let mut q = Matrix::zeros(m, n);
        let mut e = vec![0.0; m];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.apply_q(&mut e);
            for i in 0..m {
                q[(i, j)] = e[i];
            }
        }
        q
    }

    pub fn r(&self) -> Matrix {
        let (m, n) = (self.rows, self.cols);
        Matrix::from_fn(n, n, |i, j| {
            if i == j {
                self.rdiag[i]
            } else if i < j {
                self.qr[j * m + i]
            } else {
                0.0
            }
        })
    }

    /// Least-squares solution of `A x = y`.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_full_rank()?;
        let mut qty = y.to_vec();
        self.apply_qt(&mut qty);
        Ok(self.back_substitute(&qty[..self.cols]))
    }

    fn back_substitute(&self, b: &[f64]) -> Vec<f64> {
        let (m, n) = (self.rows, self.cols);
        let mut x = b.to_vec();
        for k in (0..n).rev() {
            x[k] /= self.rdiag[k];
            for i in 0..k {
                x[i] -= x[k] * self.qr[k * m + i];
            }
        }
        x
    }

    /// `(A^T A)^{-1}` from `R^{-1} R^{-T}`.
    pub fn gram_inverse(&self) -> Result<Matrix> {
        self.check_full_rank()?;
        let n = self.cols;
        let r = self.r();
        // R^{-1} by back substitution on unit vectors.
        let mut rinv = Matrix::zeros(n, n);
        for j in 0..n {
            for i in (0..=j).rev() {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in (i + 1)..=j {
                    s -= r[(i, k)] * rinv[(k, j)];
                }
                rinv[(i, j)] = s / r[(i, i)];
            }
        }
        Ok(Matrix::from_fn(n, n, |a, b| {
            (a.max(b)..n).map(|k| rinv[(a, k)] * rinv[(b, k)]).sum()
        }))
    }
}

/// Ordinary least squares `argmin |y - A b|`.
pub fn least_squares(a: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    Qr::new(a)?.solve(y)
}

/// Cholesky factor `L` of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.nrows();
        let mut l = Matrix::zeros(n, n);
        let scale = (0..n).fold(0.0f64, |m, i| m.max(fabs(a[(i, i)])));
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > RANK_TOL * scale) {
                return Err(Error::Singular {
                    columns: n,
                    rank_deficiency: n - j,
                });
            }
            let djj = sqrt(d);
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.nrows();
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[(i, k)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.l.nrows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (fabs(theta) + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Diagonal of the hat matrix `X (X^T X)^{-1} X^T`, via thin QR row norms.
pub fn hat_diagonal(x: &Matrix) -> Result<Vec<f64>> {
    let qr = Qr::new(x)?;
    qr.check_full_rank()?;
    let q = qr.thin_q();
    Ok((0..q.nrows()).map(|i| dot(q.row(i), q.row(i))).collect())
}
