//! Small dense square matrices (k <= ~5) and vector helpers.
//!
//! Everything here is sized for the laboratory's tiny systems; no attempt
//! is made at cache blocking or BLAS-style dispatch.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
#[allow(unused_imports)] // resolves libm methods in no_std builds
use crate::math::F64Ext;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        Mat::from_fn(n, |i, j| rows[i][j])
    }

    /// Column `j` as a vector.
    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        for i in 0..self.n {
            self[(i, j)] = v[i];
        }
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let s = self[(i, l)];
                if s == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += s * other[(l, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self[(i, j)] * v[j];
            }
            out[i] = s;
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| self[(i, j)] + other[(i, j)])
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| self[(i, j)] - other[(i, j)])
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat::from_fn(self.n, |i, j| c * self[(i, j)])
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    /// Max absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        let n = self.n;
        let mut best = 0.0f64;
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self[(i, j)].abs();
            }
            best = best.max(s);
        }
        best
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().map(|&x| x * x).sum::<f64>().sqrt()
    }

    /// Spectral (operator 2-) norm via power iteration on A^T A.
    pub fn spectral_norm(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let ata = self.transpose().mul(self);
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let mut lambda = 0.0;
        for _ in 0..200 {
            let w = ata.mul_vec(&v);
            let norm = vec_norm(&w);
            if norm == 0.0 {
                return 0.0;
            }
            let next = norm;
            v = w.iter().map(|x| x / norm).collect();
            if (next - lambda).abs() <= 1e-14 * next.max(1.0) {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda.sqrt()
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> f64 {
        let n = self.n;
        let mut a = self.clone();
        let mut d = 1.0;
        for c in 0..n {
            let mut piv = c;
            for r in c + 1..n {
                if a[(r, c)].abs() > a[(piv, c)].abs() {
                    piv = r;
                }
            }
            if a[(piv, c)] == 0.0 {
                return 0.0;
            }
            if piv != c {
                for j in 0..n {
                    let t = a[(c, j)];
                    a[(c, j)] = a[(piv, j)];
                    a[(piv, j)] = t;
                }
                d = -d;
            }
            d *= a[(c, c)];
            for r in c + 1..n {
                let f = a[(r, c)] / a[(c, c)];
                for j in c..n {
                    a[(r, j)] -= f * a[(c, j)];
                }
            }
        }
        d
    }

    /// QR factorization by modified Gram-Schmidt with positive R diagonal.
    ///
    /// Fails with `DegenerateBasis` when a pivot collapses relative to the
    /// column scale (condition beyond ~1e10).
    pub fn qr_pos(&self) -> Result<(Mat, Mat)> {
        let n = self.n;
        let mut q = self.clone();
        let mut r = Mat::zeros(n);
        let scale = self.max_abs().max(1e-300);
        for j in 0..n {
            let mut v = q.col(j);
            for i in 0..j {
                let qi = q.col(i);
                let proj = dot(&qi, &v);
                r[(i, j)] = proj;
                for (vk, qk) in v.iter_mut().zip(qi.iter()) {
                    *vk -= proj * qk;
                }
            }
            // second orthogonalization pass for accuracy
            for i in 0..j {
                let qi = q.col(i);
                let proj = dot(&qi, &v);
                r[(i, j)] += proj;
                for (vk, qk) in v.iter_mut().zip(qi.iter()) {
                    *vk -= proj * qk;
                }
            }
            let norm = vec_norm(&v);
            if norm <= 1e-10 * scale {
                return Err(CoreError::DegenerateBasis);
            }
            r[(j, j)] = norm;
            for vk in v.iter_mut() {
                *vk /= norm;
            }
            q.set_col(j, &v);
        }
        Ok((q, r))
    }

    /// ||Q^T Q - I||, max entry.
    pub fn orthogonality_drift(&self) -> f64 {
        self.transpose().mul(self).sub(&Mat::identity(self.n)).max_abs()
    }

    pub fn is_upper_triangular(&self, tol: f64) -> bool {
        for i in 0..self.n {
            for j in 0..i {
                if self[(i, j)].abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.a[i * self.n + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.a[i * self.n + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn vec_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn normalize(v: &[f64]) -> Vec<f64> {
    let n = vec_norm(v);
    v.iter().map(|x| x / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_and_norms() {
        let m = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 1.0]]);
        assert!((m.det() - 1.0).abs() < 1e-14);
        assert!((m.inf_norm() - 3.0).abs() < 1e-14);
        // spectral norm of the cat map is its top eigenvalue (symmetric)
        let lam = (3.0 + 5.0f64.sqrt()) / 2.0;
        assert!((m.spectral_norm() - lam).abs() < 1e-10);
    }

    #[test]
    fn qr_reconstructs() {
        let m = Mat::from_rows(&[&[1.0, 2.0, 0.5], &[-1.0, 0.3, 2.0], &[0.1, 4.0, -1.0]]);
        let (q, r) = m.qr_pos().unwrap();
        let back = q.mul(&r);
        assert!(back.sub(&m).max_abs() < 1e-12);
        assert!(q.orthogonality_drift() < 1e-12);
        assert!(r.is_upper_triangular(1e-14));
        for i in 0..3 {
            assert!(r[(i, i)] > 0.0);
        }
    }

    #[test]
    fn qr_degenerate() {
        let m = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(m.qr_pos().unwrap_err(), CoreError::DegenerateBasis);
    }
}
