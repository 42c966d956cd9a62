//! Small dense complex linear algebra.
//!
//! Everything here is sized for microphone arrays (M <= 8), so matrices are
//! plain row-major `Vec<Complex64>` and inversion is Gauss-Jordan elimination
//! with partial pivoting.

use num_complex::Complex64;
use std::ops::{Index, IndexMut};
use thiserror::Error;

/// Absolute floor added to the diagonal on every regularized inversion.
pub const ABS_LOADING: f64 = 1e-12;

/// Pivots smaller than this fraction of the largest row norm are singular.
pub const PIVOT_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is numerically singular (pivot {pivot:e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Complex column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CVector(pub Vec<Complex64>);

impl CVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); dim])
    }

    /// Unit vector with a one at `index`.
    pub fn unit(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.is_finite())
    }

    /// Conjugated inner product `self^H · other`.
    pub fn dot_h(&self, other: &[Complex64]) -> Complex64 {
        debug_assert_eq!(self.0.len(), other.len());
        self.0
            .iter()
            .zip(other)
            .fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b)
    }
}

impl From<Vec<Complex64>> for CVector {
    fn from(v: Vec<Complex64>) -> Self {
        Self(v)
    }
}

impl Index<usize> for CVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(scale, 0.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries. Panics if `data.len()` is not a square.
    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), dim * dim, "expected {dim}x{dim} entries");
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn column(&self, j: usize) -> CVector {
        CVector((0..self.dim).map(|i| self[(i, j)]).collect())
    }

    pub fn conj_transpose(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    /// Largest elementwise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Replaces the matrix with `(A + A^H) / 2`.
    pub fn symmetrize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            let d = self[(i, i)];
            self[(i, i)] = Complex64::new(d.re, 0.0);
            for j in (i + 1)..n {
                let avg = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
        }
    }

    /// `self = keep * self + add_scale * (v v^H)` in place.
    pub fn blend_outer(&mut self, keep: f64, add_scale: f64, v: &[Complex64]) {
        debug_assert_eq!(v.len(), self.dim);
        let n = self.dim;
        for (row, &vi) in self.data.chunks_exact_mut(n).zip(v) {
            let vi = vi * add_scale;
            for (x, vj) in row.iter_mut().zip(v) {
                *x = *x * keep + vi * vj.conj();
            }
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Rank-one Hermitian outer product `v v^H`.
pub fn herm_outer(v: &[Complex64]) -> CMatrix {
    let n = v.len();
    let mut m = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = v[i] * v[j].conj();
        }
    }
    m
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, LinalgError> {
    if a.dim != b.dim {
        return Err(LinalgError::DimensionMismatch(a.dim, b.dim));
    }
    let n = a.dim;
    let mut out = CMatrix::zeros(n);
    for i in 0..n {
        for k in 0..n {
            let aik = a[(i, k)];
            for j in 0..n {
                out.data[i * n + j] += aik * b.data[k * n + j];
            }
        }
    }
    Ok(out)
}

pub fn matvec(a: &CMatrix, x: &[Complex64]) -> Result<CVector, LinalgError> {
    if a.dim != x.len() {
        return Err(LinalgError::DimensionMismatch(a.dim, x.len()));
    }
    let n = a.dim;
    Ok(CVector(
        (0..n)
            .map(|i| (0..n).map(|j| a[(i, j)] * x[j]).sum())
            .collect(),
    ))
}

/// Inverse of `m + (loading * trace(m)/M + ABS_LOADING) * I`.
///
/// `loading` is relative to the mean diagonal power, so the regularization
/// scales with the matrix.
pub fn regularized_inverse(m: &CMatrix, loading: f64) -> Result<CMatrix, LinalgError> {
    debug_assert!(loading >= 0.0);
    let n = m.dim;
    let load = loading * (m.trace().re / n as f64) + ABS_LOADING;
    let mut a = m.clone();
    for i in 0..n {
        a[(i, i)].re += load;
    }
    invert(a)
}

/// Gauss-Jordan inversion with partial pivoting; consumes its input.
pub fn invert(mut a: CMatrix) -> Result<CMatrix, LinalgError> {
    let n = a.dim;
    let row_norm_max = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let threshold = PIVOT_THRESHOLD * row_norm_max;
    let mut inv = CMatrix::identity(n);

    for col in 0..n {
        let (pivot_row, pivot_mag) =
            (col..n)
                .map(|r| (r, a[(r, col)].norm()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if pivot_mag.is_nan() || pivot_mag <= threshold {
            return Err(LinalgError::SingularMatrix {
                column: col,
                pivot: pivot_mag,
            });
        }
        if pivot_row != col {
            for j in 0..n {
                a.data.swap(col * n + j, pivot_row * n + j);
                inv.data.swap(col * n + j, pivot_row * n + j);
            }
        }
        let p = a[(col, col)].inv();
        for j in 0..n {
            a.data[col * n + j] *= p;
            inv.data[col * n + j] *= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[(r, col)];
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                let av = a.data[col * n + j];
                let iv = inv.data[col * n + j];
                a.data[r * n + j] -= f * av;
                inv.data[r * n + j] -= f * iv;
            }
        }
    }
    Ok(inv)
}
