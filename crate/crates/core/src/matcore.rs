//! Dense square-matrix primitives.
//!
//! Everything the orientation machinery needs and nothing more: a small
//! row-major [`Matrix`], Givens rotations and their cascades, determinants,
//! orthonormality checks, and a cyclic Jacobi eigensolver for ingesting
//! sample correlation matrices.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use crate::error::{argument, Error, Result};

/// Sweep budget for the Jacobi eigensolver.
pub const JACOBI_MAX_SWEEPS: usize = 50;
/// Off-diagonal convergence threshold, relative to the Frobenius norm of the input.
pub const JACOBI_REL_TOL: f64 = 1e-12;
/// Absolute symmetry tolerance accepted by [`symmetric_eigen`] (scaled by `max(1, max|m|)`).
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Row-major dense matrix of finite reals.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data. Rejects shape mismatches and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return argument(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            ));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return argument(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return argument("ragged rows");
        }
        Self::new(n_rows, n_cols, rows.concat())
    }

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

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n_cols = columns.len();
        let n_rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_rows) {
            return argument("columns differ in length");
        }
        let mut data = vec![0.0; n_rows * n_cols];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[i * n_cols + j] = v;
            }
        }
        Self::new(n_rows, n_cols, data)
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major view of the entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows, "column length mismatch");
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn scale_column(&mut self, j: usize, factor: f64) {
        for i in 0..self.rows {
            self[(i, j)] *= factor;
        }
    }

    /// Returns a copy with columns taken in the given order.
    pub fn select_columns(&self, order: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, order.len());
        for (dst, &src) in order.iter().enumerate() {
            for i in 0..self.rows {
                out[(i, dst)] = self[(i, src)];
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return argument(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest absolute entrywise difference; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `max |m_ij - m_ji|`, or infinity for non-square input.
    pub fn symmetry_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut err = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                err = err.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        err
    }

    /// Replaces the matrix with `(m + mᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    /// Left-multiplies in place by the Givens rotation `G(i, j, theta)`.
    pub(crate) fn rotate_rows(&mut self, i: usize, j: usize, theta: f64) {
        let (s, c) = theta.sin_cos();
        self.rotate_rows_cs(i, j, c, s);
    }

    /// Left-multiplies in place by `G(i, j, theta)ᵀ`.
    pub(crate) fn rotate_rows_transposed(&mut self, i: usize, j: usize, theta: f64) {
        let (s, c) = theta.sin_cos();
        self.rotate_rows_cs(i, j, c, -s);
    }

    fn rotate_rows_cs(&mut self, i: usize, j: usize, c: f64, s: f64) {
        if s == 0.0 && c == 1.0 {
            return;
        }
        for col in 0..self.cols {
            let a = self[(i, col)];
            let b = self[(j, col)];
            self[(i, col)] = c * a - s * b;
            self[(j, col)] = s * a + c * b;
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    /// Panics on shape mismatch; use [`Matrix::matmul`] for a fallible product.
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("matrix shapes must agree")
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// A plane rotation by `theta` in the `(axis_i, axis_j)` plane of `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GivensSpec {
    dim: usize,
    axis_i: usize,
    axis_j: usize,
    theta: f64,
}

impl GivensSpec {
    pub fn new(dim: usize, axis_i: usize, axis_j: usize, theta: f64) -> Result<Self> {
        if !(axis_i < axis_j && axis_j < dim) {
            return argument(format!(
                "Givens axes must satisfy 0 <= i < j < dim, got i={axis_i}, j={axis_j}, dim={dim}"
            ));
        }
        if !theta.is_finite() {
            return argument("Givens angle must be finite");
        }
        Ok(Self {
            dim,
            axis_i,
            axis_j,
            theta,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn axes(&self) -> (usize, usize) {
        (self.axis_i, self.axis_j)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Identity except `(i,i)=(j,j)=cos θ`, `(i,j)=-sin θ`, `(j,i)=+sin θ`.
pub fn make_givens(spec: &GivensSpec) -> Matrix {
    let mut g = Matrix::identity(spec.dim);
    let (s, c) = spec.theta.sin_cos();
    let (i, j) = (spec.axis_i, spec.axis_j);
    g[(i, i)] = c;
    g[(j, j)] = c;
    g[(i, j)] = -s;
    g[(j, i)] = s;
    g
}

fn check_cascade(dim: usize, pivot: usize, angles: &[f64]) -> Result<()> {
    if pivot + 1 >= dim {
        return argument(format!(
            "pivot {pivot} has no reducible subspace in dimension {dim}"
        ));
    }
    if angles.len() != dim - pivot - 1 {
        return argument(format!(
            "pivot {pivot} in dimension {dim} needs {} angles, got {}",
            dim - pivot - 1,
            angles.len()
        ));
    }
    if angles.iter().any(|a| !a.is_finite()) {
        return argument("cascade angles must be finite");
    }
    Ok(())
}

/// Subspace rotation `R_pivot = G(pivot, pivot+1) · G(pivot, pivot+2) ⋯ G(pivot, dim-1)`.
///
/// `angles[m]` is the angle of the plane `(pivot, pivot + 1 + m)`.
pub fn compose_cascade(dim: usize, pivot: usize, angles: &[f64]) -> Result<Matrix> {
    check_cascade(dim, pivot, angles)?;
    let mut r = Matrix::identity(dim);
    apply_cascade(&mut r, pivot, angles);
    Ok(r)
}

/// `m ← R_pivot · m`, with `R_pivot` as in [`compose_cascade`].
pub(crate) fn apply_cascade(m: &mut Matrix, pivot: usize, angles: &[f64]) {
    // Accumulate right-to-left: the plane furthest from the pivot acts first.
    for (offset, &theta) in angles.iter().enumerate().rev() {
        m.rotate_rows(pivot, pivot + 1 + offset, theta);
    }
}

/// `m ← R_pivotᵀ · m`.
pub(crate) fn apply_cascade_transposed(m: &mut Matrix, pivot: usize, angles: &[f64]) {
    for (offset, &theta) in angles.iter().enumerate() {
        m.rotate_rows_transposed(pivot, pivot + 1 + offset, theta);
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors in the columns, in
/// no particular order.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !m.is_square() {
        return argument("eigendecomposition requires a square matrix");
    }
    let scale = m.max_abs().max(1.0);
    if m.symmetry_error() > SYMMETRY_TOL * scale {
        return argument(format!(
            "matrix is not symmetric (max asymmetry {:e})",
            m.symmetry_error()
        ));
    }
    let n = m.rows();
    let mut a = m.clone();
    a.symmetrize();
    let mut v = Matrix::identity(n);
    let threshold = JACOBI_REL_TOL * m.frobenius_norm();

    let off_norm = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * a[(i, j)] * a[(i, j)];
            }
        }
        s.sqrt()
    };

    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off_norm(&a) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (tau * tau + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // A ← Jᵀ A J with J = rotation in the (p, q) plane.
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
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off_norm(&a) > threshold {
        return Err(Error::Numeric(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }
    let eigenvalues = (0..n).map(|i| a[(i, i)]).collect();
    Ok((eigenvalues, v))
}

/// Determinant by LU decomposition with partial pivoting.
pub fn det(m: &Matrix) -> Result<f64> {
    if !m.is_square() {
        return argument("determinant requires a square matrix");
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut det = 1.0;
    for k in 0..n {
        let (pivot_row, pivot_abs) =
            (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if pivot_abs == 0.0 {
            return Ok(0.0);
        }
        if pivot_row != k {
            for j in 0..n {
                let tmp = a[(k, j)];
                a[(k, j)] = a[(pivot_row, j)];
                a[(pivot_row, j)] = tmp;
            }
            det = -det;
        }
        let pivot = a[(k, k)];
        det *= pivot;
        for i in (k + 1)..n {
            let factor = a[(i, k)] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in k..n {
                a[(i, j)] -= factor * a[(k, j)];
            }
        }
    }
    Ok(det)
}

/// Largest entry of `|mᵀm - I|`; infinity for non-square input.
pub fn orthonormality_error(m: &Matrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.rows();
    let mut err = 0.0f64;
    for a in 0..n {
        for b in a..n {
            let dot: f64 = (0..n).map(|k| m[(k, a)] * m[(k, b)]).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            err = err.max((dot - target).abs());
        }
    }
    err
}

/// True iff `max |mᵀm - I| <= tol`.
pub fn is_orthonormal(m: &Matrix, tol: f64) -> bool {
    orthonormality_error(m) <= tol
}
