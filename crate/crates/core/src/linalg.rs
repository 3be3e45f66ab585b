//! Dense complex matrices and the handful of vector helpers the rest of
//! the crate shares.

use std::ops::{Index, IndexMut};

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NhError, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Square dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    /// Builds from row-major entries; fails unless `entries.len() == dim²`.
    pub fn from_row_major(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(NhError::Domain(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * s).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `self - shift * I`
    pub fn shifted(&self, shift: Complex64) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            m[(i, i)] -= shift;
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.entries[i * n + j] += a * other.entries[k * n + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim, "dimension mismatch");
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// `P A P^T` for the permutation sending old index `perm[k]` to new index `k`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.dim, "permutation length mismatch");
        Self::from_fn(self.dim, |i, j| self[(perm[i], perm[j])])
    }

    /// Submatrix with the given rows and columns.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> BlockMatrix {
        BlockMatrix {
            rows: rows.len(),
            cols: cols.len(),
            entries: rows
                .iter()
                .flat_map(|&i| cols.iter().map(move |&j| self[(i, j)]))
                .collect(),
        }
    }

    /// Whether all nonzero entries sit on the three central diagonals.
    pub fn is_tridiagonal(&self) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..n).all(|j| i.abs_diff(j) <= 1 || self[(i, j)] == ZERO))
    }

    /// Determinant by LU factorisation with partial pivoting.
    pub fn determinant(&self) -> Complex64 {
        let n = self.dim;
        let mut a = self.entries.clone();
        let mut det = ONE;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x * n + col].norm().total_cmp(&a[y * n + col].norm()))
                .unwrap_or(col);
            let p = a[pivot * n + col];
            if p == ZERO {
                return ZERO;
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(pivot * n + j, col * n + j);
                }
                det = -det;
            }
            det *= p;
            for row in col + 1..n {
                let factor = a[row * n + col] / p;
                if factor == ZERO {
                    continue;
                }
                for j in col..n {
                    let upper = a[col * n + j];
                    a[row * n + j] -= factor * upper;
                }
            }
        }
        det
    }

    /// LU factorisation with partial pivoting. Exactly zero pivots are
    /// replaced by `tiny` so that nearly singular shifts still solve.
    pub fn lu(&self, tiny: f64) -> Lu {
        let n = self.dim;
        let mut a = self.entries.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x * n + col].norm().total_cmp(&a[y * n + col].norm()))
                .unwrap_or(col);
            if pivot != col {
                for j in 0..n {
                    a.swap(pivot * n + j, col * n + j);
                }
                perm.swap(pivot, col);
            }
            if a[col * n + col] == ZERO {
                a[col * n + col] = Complex64::new(tiny, 0.0);
            }
            let p = a[col * n + col];
            for row in col + 1..n {
                let factor = a[row * n + col] / p;
                a[row * n + col] = factor;
                if factor == ZERO {
                    continue;
                }
                for j in col + 1..n {
                    let upper = a[col * n + j];
                    a[row * n + j] -= factor * upper;
                }
            }
        }
        Lu { n, a, perm }
    }

    pub(crate) fn to_faer(&self) -> Mat<Complex64> {
        Mat::from_fn(self.dim, self.dim, |i, j| self[(i, j)])
    }

    /// Eigenvalues only (no ordering guarantee).
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        self.to_faer()
            .eigenvalues()
            .map_err(|e| NhError::Convergence {
                dim: self.dim,
                reason: format!("{e:?}"),
                max_residual: f64::NAN,
                bound: f64::NAN,
            })
    }

    /// Eigenpairs of a Hermitian matrix; values ascending, vectors orthonormal.
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, Vec<Vec<Complex64>>)> {
        let evd = self
            .to_faer()
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| NhError::Convergence {
                dim: self.dim,
                reason: format!("{e:?}"),
                max_residual: f64::NAN,
                bound: f64::NAN,
            })?;
        let s = evd.S().column_vector();
        let u = evd.U();
        let values = (0..self.dim).map(|k| s[k].re).collect();
        let vectors = (0..self.dim)
            .map(|k| (0..self.dim).map(|i| u[(i, k)]).collect())
            .collect();
        Ok((values, vectors))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[i * self.dim + j]
    }
}

/// Rectangular block cut out of a [`ComplexMatrix`].
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Complex64>,
}

impl BlockMatrix {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.cols + j]
    }

    /// Square blocks only.
    pub fn to_square(&self) -> Result<ComplexMatrix> {
        if self.rows != self.cols {
            return Err(NhError::Domain(format!(
                "block is {}x{}, not square",
                self.rows, self.cols
            )));
        }
        ComplexMatrix::from_row_major(self.rows, self.entries.clone())
    }

    pub fn conj_transpose(&self) -> BlockMatrix {
        BlockMatrix {
            rows: self.cols,
            cols: self.rows,
            entries: (0..self.cols)
                .flat_map(|i| (0..self.rows).map(move |j| (i, j)))
                .map(|(i, j)| self.get(j, i).conj())
                .collect(),
        }
    }
}

/// Packed `L\U` factors and the row permutation.
pub struct Lu {
    n: usize,
    a: Vec<Complex64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let t = self.a[i * n + j] * x[j];
                x[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = self.a[i * n + j] * x[j];
                x[i] -= t;
            }
            x[i] /= self.a[i * n + i];
        }
        x
    }
}

/// `⟨a|b⟩ = Σ conj(a_i) b_i`
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Scales `v` to unit 2-norm; a zero vector is left untouched.
pub fn normalize(v: &mut [Complex64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        let m = ComplexMatrix::from_row_major(
            3,
            vec![
                c(2.0, 1.0),
                c(0.0, -1.0),
                c(1.0, 0.0),
                c(1.0, 0.0),
                c(3.0, 0.0),
                c(0.0, 2.0),
                c(-1.0, 1.0),
                c(0.5, 0.0),
                c(1.0, -1.0),
            ],
        )
        .unwrap();
        let a = |i: usize, j: usize| m[(i, j)];
        let expected = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
            - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
            + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
        assert!((m.determinant() - expected).norm() < 1e-12);
    }

    #[test]
    fn lu_solve_round_trip() {
        let m = ComplexMatrix::from_fn(4, |i, j| c((i * 3 + j) as f64 % 5.0 + if i == j { 4.0 } else { 0.0 }, (i as f64) - (j as f64)));
        let x: Vec<Complex64> = (0..4).map(|k| c(k as f64, 1.0 - k as f64)).collect();
        let b = m.mul_vec(&x);
        let y = m.lu(1e-300).solve(&b);
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn singular_determinant_is_zero() {
        let m = ComplexMatrix::from_fn(3, |i, _| c(i as f64, 0.0));
        assert!(m.determinant().norm() < 1e-14);
    }

    #[test]
    fn permutation_and_blocks() {
        let m = ComplexMatrix::from_fn(4, |i, j| c((4 * i + j) as f64, 0.0));
        let p = m.permuted(&[0, 2, 1, 3]);
        assert_eq!(p[(1, 1)], m[(2, 2)]);
        assert_eq!(p[(0, 1)], m[(0, 2)]);
        let b = m.block(&[0, 2], &[1, 3]);
        assert_eq!(b.get(1, 0), m[(2, 1)]);
        assert_eq!(b.conj_transpose().get(0, 1), m[(2, 1)].conj());
    }

    #[test]
    fn hermitian_eigen_is_orthonormal() {
        let m = ComplexMatrix::from_fn(5, |i, j| match i.abs_diff(j) {
            0 => c(i as f64 * 0.3, 0.0),
            1 if i < j => c(0.0, 1.0),
            1 => c(0.0, -1.0),
            _ => ZERO,
        });
        let (vals, vecs) = m.hermitian_eigen().unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for a in 0..5 {
            for b in 0..5 {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((inner(&vecs[a], &vecs[b]) - c(expected, 0.0)).norm() < 1e-12);
            }
            let hv = m.mul_vec(&vecs[a]);
            let res: f64 = hv
                .iter()
                .zip(&vecs[a])
                .map(|(x, y)| (x - y * vals[a]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-12);
        }
    }
}
