//! Elliptic diffusion-limit solves.
//!
//! Isotropic kernels give `<v v> = I/3` in 1D velocity and `I/2` on the
//! circle, so the limit equation reads
//! `-(c/sigma_s) Lap rho = -sigma_a rho + G` with `c = 1/3` or `1/2`,
//! Dirichlet data from the half-space far-field constants.

use super::linalg::{tridiag_solve, BandedMatrix};
use super::{Axis, Field};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// 1D limit: `(1/3) d_x(rho_x / sigma_s) = sigma_a rho - G`, second-order
/// centered differences, Thomas solve.
pub fn diffusion_limit_solve_1d<T: Scalar>(
    n: usize,
    domain: (T, T),
    zeta: (T, T),
    sigma_s: &dyn Fn(T) -> T,
    sigma_a: &dyn Fn(T) -> T,
    source: &dyn Fn(T) -> T,
) -> Result<Field<T>> {
    if n < 3 {
        return Err(invalid("need at least three nodes"));
    }
    let (x0, x1) = domain;
    let h = (x1 - x0) / T::of_usize(n - 1);
    let xs: Vec<T> = (0..n).map(|i| x0 + h * T::of_usize(i)).collect();
    let third = T::one() / T::of(3.0);
    let m = n - 2;
    let mut lower = vec![T::zero(); m];
    let mut diag = vec![T::zero(); m];
    let mut upper = vec![T::zero(); m];
    let mut rhs = vec![T::zero(); m];
    for k in 0..m {
        let i = k + 1;
        let x = xs[i];
        let s_m = sigma_s(x - h * T::of(0.5));
        let s_p = sigma_s(x + h * T::of(0.5));
        let a_w = third / (s_m * h * h);
        let a_e = third / (s_p * h * h);
        // -(a_w rho_{i-1} - (a_w + a_e) rho_i + a_e rho_{i+1}) + sigma_a rho = G
        lower[k] = -a_w;
        upper[k] = -a_e;
        diag[k] = a_w + a_e + sigma_a(x);
        rhs[k] = source(x);
    }
    rhs[0] = rhs[0] + third / (sigma_s(xs[1] - h * T::of(0.5)) * h * h) * zeta.0;
    rhs[m - 1] =
        rhs[m - 1] + third / (sigma_s(xs[n - 2] + h * T::of(0.5)) * h * h) * zeta.1;
    tridiag_solve(&lower, &diag, &upper, &mut rhs)?;
    let mut values = Vec::with_capacity(n);
    values.push(zeta.0);
    values.extend(rhs);
    values.push(zeta.1);
    let mut weights = vec![h; n];
    weights[0] = h * T::of(0.5);
    weights[n - 1] = h * T::of(0.5);
    Ok(Field {
        axes: vec![Axis {
            label: "x",
            nodes: xs,
            weights,
        }],
        values,
    })
}

/// 2D limit on a box with constant sigma_s:
/// `(1/(2 sigma_s)) Lap rho = sigma_a rho - G`, five-point stencil, banded
/// direct solve. `boundary(face_point) -> rho` supplies Dirichlet data and
/// receives points on the box edge.
#[allow(clippy::too_many_arguments)]
pub fn diffusion_limit_solve_2d<T: Scalar>(
    n_x: usize,
    n_y: usize,
    domain: &[(T, T)],
    boundary: &dyn Fn(T, T) -> T,
    sigma_s: T,
    sigma_a: &dyn Fn(T, T) -> T,
    source: &dyn Fn(T, T) -> T,
) -> Result<Field<T>> {
    if n_x < 3 || n_y < 3 {
        return Err(invalid("need at least three nodes per axis"));
    }
    let (x0, x1) = domain[0];
    let (y0, y1) = domain[1];
    let hx = (x1 - x0) / T::of_usize(n_x - 1);
    let hy = (y1 - y0) / T::of_usize(n_y - 1);
    let xs: Vec<T> = (0..n_x).map(|i| x0 + hx * T::of_usize(i)).collect();
    let ys: Vec<T> = (0..n_y).map(|j| y0 + hy * T::of_usize(j)).collect();
    let c = T::one() / (T::of(2.0) * sigma_s);
    let cx = c / (hx * hx);
    let cy = c / (hy * hy);
    let mx = n_x - 2;
    let my = n_y - 2;
    let unknowns = mx * my;
    let bw = my;
    let mut a = BandedMatrix::zeros(unknowns, bw);
    let mut rhs = vec![T::zero(); unknowns];
    let uid = |i: usize, j: usize| (i - 1) * my + (j - 1);
    for i in 1..n_x - 1 {
        for j in 1..n_y - 1 {
            let row = uid(i, j);
            a.add(row, row, T::of(2.0) * (cx + cy) + sigma_a(xs[i], ys[j]));
            rhs[row] = source(xs[i], ys[j]);
            // west
            if i > 1 {
                a.add(row, uid(i - 1, j), -cx);
            } else {
                rhs[row] = rhs[row] + cx * boundary(xs[0], ys[j]);
            }
            // east
            if i < n_x - 2 {
                a.add(row, uid(i + 1, j), -cx);
            } else {
                rhs[row] = rhs[row] + cx * boundary(xs[n_x - 1], ys[j]);
            }
            // south
            if j > 1 {
                a.add(row, uid(i, j - 1), -cy);
            } else {
                rhs[row] = rhs[row] + cy * boundary(xs[i], ys[0]);
            }
            // north
            if j < n_y - 2 {
                a.add(row, uid(i, j + 1), -cy);
            } else {
                rhs[row] = rhs[row] + cy * boundary(xs[i], ys[n_y - 1]);
            }
        }
    }
    let sol = a.solve(rhs)?;
    let mut values = vec![T::zero(); n_x * n_y];
    for i in 0..n_x {
        for j in 0..n_y {
            values[i * n_y + j] = if i == 0 || i == n_x - 1 || j == 0 || j == n_y - 1 {
                boundary(xs[i], ys[j])
            } else {
                sol[uid(i, j)]
            };
        }
    }
    let wts = |nodes: &[T]| {
        let n = nodes.len();
        let mut w = vec![T::zero(); n];
        for i in 0..n - 1 {
            let h = nodes[i + 1] - nodes[i];
            w[i] += h * T::of(0.5);
            w[i + 1] += h * T::of(0.5);
        }
        w
    };
    Ok(Field {
        axes: vec![
            Axis {
                label: "x",
                weights: wts(&xs),
                nodes: xs,
            },
            Axis {
                label: "y",
                weights: wts(&ys),
                nodes: ys,
            },
        ],
        values,
    })
}
