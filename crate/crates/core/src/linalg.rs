//! Small dense linear-algebra kernel.
//!
//! Everything in this crate runs at desk scale (matrices of order a few
//! thousand at most), so a row-major `Vec<f64>` matrix plus a cyclic Jacobi
//! eigensolver for the symmetric eigenproblem is the whole kernel. Jacobi is
//! unconditionally convergent on symmetric input and delivers eigenvalues to
//! machine precision, which the spectral certificates downstream rely on.

use crate::error::{Error, Result};

/// Hard cap for the dense symmetric eigensolver.
pub const EIGEN_SIZE_LIMIT: usize = 2048;

const MAX_SWEEPS: usize = 75;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from explicit rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidArgument("matrix must be non-empty".into()));
        }
        let cols = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Dimension {
                    context: "matrix row length",
                    expected: cols,
                    actual: r.len(),
                });
            }
            let _ = i;
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
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

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec operand length");
        let mut y = vec![0.0; self.rows];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(self.row(i), x);
        }
        y
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// A B.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a != 0.0 {
                    for j in 0..other.cols {
                        out.set(i, j, out.get(i, j) + a * other.get(k, j));
                    }
                }
            }
        }
        out
    }

    /// AᵀA, the Gram matrix of the columns.
    pub fn gram(&self) -> Mat {
        let mut g = Mat::zeros(self.cols, self.cols);
        for i in 0..self.cols {
            for j in i..self.cols {
                let mut s = 0.0;
                for k in 0..self.rows {
                    s += self.get(k, i) * self.get(k, j);
                }
                g.set(i, j, s);
                g.set(j, i, s);
            }
        }
        g
    }

    /// A ⊗ I_d.
    pub fn kron_identity(&self, d: usize) -> Mat {
        assert!(d > 0);
        let mut k = Mat::zeros(self.rows * d, self.cols * d);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.get(i, j);
                if v != 0.0 {
                    for b in 0..d {
                        k.set(i * d + b, j * d + b, v);
                    }
                }
            }
        }
        k
    }

    /// xᵀ A x (no symmetry assumption, but callers pass symmetric A).
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        assert!(self.is_square() && x.len() == self.rows);
        let mut total = 0.0;
        for i in 0..self.rows {
            total += x[i] * dot(self.row(i), x);
        }
        total
    }

    /// max_{ij} |A_ij − A_ji| (0 for exactly symmetric matrices).
    pub fn max_abs_asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted in
/// descending order.
///
/// The input must be symmetric; the asymmetric part is ignored (the working
/// copy is symmetrized up front). Convergence: each full sweep annihilates
/// every off-diagonal entry once; the off-diagonal Frobenius mass decreases
/// quadratically until it drops below `1e-14 * ||A||_F`.
pub fn sym_eigenvalues(m: &Mat) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension {
            context: "symmetric eigensolver",
            expected: m.rows(),
            actual: m.cols(),
        });
    }
    let n = m.rows();
    if n > EIGEN_SIZE_LIMIT {
        return Err(Error::MatrixTooLarge {
            size: n,
            limit: EIGEN_SIZE_LIMIT,
        });
    }
    if n == 1 {
        return Ok(vec![m.get(0, 0)]);
    }

    // symmetrized working copy
    let mut w = Mat::from_fn(n, n, |i, j| 0.5 * (m.get(i, j) + m.get(j, i)));
    let scale = w.frobenius_norm();
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let tol = 1e-14 * scale;

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n - 1 {
            for q in p + 1..n {
                off += w.get(p, q) * w.get(p, q);
            }
        }
        if (2.0 * off).sqrt() <= tol {
            let mut eig: Vec<f64> = (0..n).map(|i| w.get(i, i)).collect();
            eig.sort_by(|a, b| b.total_cmp(a));
            return Ok(eig);
        }

        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = w.get(p, q);
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = w.get(p, p);
                let aqq = w.get(q, q);
                // stable small-angle rotation (Numerical Recipes convention)
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = w.get(k, p);
                    let akq = w.get(k, q);
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    w.set(k, p, new_kp);
                    w.set(p, k, new_kp);
                    w.set(k, q, new_kq);
                    w.set(q, k, new_kq);
                }
                w.set(p, p, c * c * app - 2.0 * s * c * apq + s * s * aqq);
                w.set(q, q, s * s * app + 2.0 * s * c * apq + c * c * aqq);
                w.set(p, q, 0.0);
                w.set(q, p, 0.0);
            }
        }
    }

    Err(Error::EigenNonConvergence { sweeps: MAX_SWEEPS })
}

/// Spectral norm of a symmetric matrix: max |eigenvalue|.
pub fn spectral_norm_sym(m: &Mat) -> Result<f64> {
    let eig = sym_eigenvalues(m)?;
    Ok(eig.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}
