//! Small dense/banded direct solvers used by the reference schemes.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solve `A x = b` by LU with partial pivoting; `a` is row-major `n x n`.
pub fn lu_solve<T: Scalar>(a: &mut [T], b: &mut [T], n: usize) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        // pivot
        let mut best = col;
        let mut best_val = a[perm[col] * n + col].abs();
        for row in col + 1..n {
            let v = a[perm[row] * n + col].abs();
            if v > best_val {
                best = row;
                best_val = v;
            }
        }
        if best_val == T::zero() {
            return Err(Error::Numerical("singular linear system".into()));
        }
        perm.swap(col, best);
        let p = perm[col];
        let pivot = a[p * n + col];
        for row in col + 1..n {
            let r = perm[row];
            let factor = a[r * n + col] / pivot;
            a[r * n + col] = factor;
            for k in col + 1..n {
                let delta = factor * a[p * n + k];
                a[r * n + k] = a[r * n + k] - delta;
            }
            b[r] = b[r] - factor * b[p];
        }
    }
    // back substitution
    let mut x = vec![T::zero(); n];
    for col in (0..n).rev() {
        let p = perm[col];
        let mut acc = b[p];
        for k in col + 1..n {
            acc = acc - a[p * n + k] * x[k];
        }
        x[col] = acc / a[p * n + col];
    }
    b.copy_from_slice(&x);
    Ok(())
}

/// Thomas algorithm for a tridiagonal system (`lower`, `diag`, `upper`).
pub fn tridiag_solve<T: Scalar>(
    lower: &[T],
    diag: &[T],
    upper: &[T],
    rhs: &mut [T],
) -> Result<()> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    if diag[0] == T::zero() {
        return Err(Error::Numerical("singular tridiagonal system".into()));
    }
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c[i - 1];
        if denom == T::zero() {
            return Err(Error::Numerical("singular tridiagonal system".into()));
        }
        if i < n - 1 {
            c[i] = upper[i] / denom;
        }
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    rhs[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = d[i] - c[i] * rhs[i + 1];
    }
    Ok(())
}

/// Banded LU without pivoting (for diagonally dominant five-point systems).
/// `band[i][k]` holds `A[i, i - bw + k]` for `k in 0..2*bw+1`.
pub struct BandedMatrix<T> {
    pub n: usize,
    pub bw: usize,
    pub data: Vec<T>, // n rows of 2*bw+1
}

impl<T: Scalar> BandedMatrix<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![T::zero(); n * (2 * bw + 1)],
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let k = j + self.bw - i;
        self.data[i * (2 * self.bw + 1) + k] += v;
    }

    pub fn solve(mut self, mut rhs: Vec<T>) -> Result<Vec<T>> {
        let w = 2 * self.bw + 1;
        let (n, bw) = (self.n, self.bw);
        for col in 0..n {
            let pivot = self.data[col * w + bw];
            if pivot == T::zero() {
                return Err(Error::Numerical("singular banded system".into()));
            }
            let lo = (col + 1).min(n);
            let hi = (col + bw + 1).min(n);
            for row in lo..hi {
                // A[row, col]
                let k = col + bw - row;
                let factor = self.data[row * w + k] / pivot;
                if factor == T::zero() {
                    continue;
                }
                self.data[row * w + k] = T::zero();
                for jj in col + 1..(col + bw + 1).min(n) {
                    let delta = factor * self.data[col * w + (jj + bw - col)];
                    let kk = jj + bw - row;
                    self.data[row * w + kk] = self.data[row * w + kk] - delta;
                }
                rhs[row] = rhs[row] - factor * rhs[col];
            }
        }
        for col in (0..n).rev() {
            let mut acc = rhs[col];
            for jj in col + 1..(col + bw + 1).min(n) {
                acc = acc - self.data[col * w + (jj + bw - col)] * rhs[jj];
            }
            rhs[col] = acc / self.data[col * w + bw];
        }
        Ok(rhs)
    }
}
