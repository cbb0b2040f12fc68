//! 2D discrete-ordinates transport: upwind in both coordinates per
//! ordinate, source iteration over the scattering integral.

use super::{Axis, Field};
use crate::error::{invalid, Error, Result};
use crate::problem::{Face, ProblemSpec};
use crate::quadrature::{gauss_legendre, QuadratureRule};
use crate::scalar::Scalar;
use crate::scattering::DiscreteScattering;
use ndarray::Array2;

#[derive(Debug, Clone)]
pub struct Mesh2D<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub v_rule: QuadratureRule<T>,
}

impl<T: Scalar> Mesh2D<T> {
    pub fn uniform(n_x: usize, n_y: usize, domain: &[(T, T)], n_v: usize) -> Result<Self> {
        if n_x < 2 || n_y < 2 {
            return Err(invalid("mesh needs at least two nodes per axis"));
        }
        let (x0, x1) = domain[0];
        let (y0, y1) = domain[1];
        let hx = (x1 - x0) / T::of_usize(n_x - 1);
        let hy = (y1 - y0) / T::of_usize(n_y - 1);
        Ok(Self {
            x: (0..n_x).map(|i| x0 + hx * T::of_usize(i)).collect(),
            y: (0..n_y).map(|i| y0 + hy * T::of_usize(i)).collect(),
            v_rule: gauss_legendre(n_v, T::zero(), T::of(2.0) * T::PI())?,
        })
    }

    fn trapezoid(nodes: &[T]) -> Vec<T> {
        let n = nodes.len();
        let mut w = vec![T::zero(); n];
        for i in 0..n - 1 {
            let h = nodes[i + 1] - nodes[i];
            w[i] += h * T::of(0.5);
            w[i + 1] += h * T::of(0.5);
        }
        w
    }
}

/// Reference 2D transport solve (isotropic or Henyey-Greenstein).
pub fn fdm_rte_2d<T: Scalar>(
    problem: &ProblemSpec<T>,
    mesh: &Mesh2D<T>,
    tol: T,
    max_sweeps: usize,
) -> Result<Field<T>> {
    if problem.dim != 2 {
        return Err(invalid("fdm_rte_2d requires a 2D problem"));
    }
    let nx = mesh.x.len();
    let ny = mesh.y.len();
    let nv = mesh.v_rule.len();
    let eps = problem.epsilon;
    let scat = DiscreteScattering::new(problem.kernel, mesh.v_rule.clone())?;
    // In-scatter matrix: (S f)_k = (1/|S|) sum_j K_kj w_j f_j.
    let op = scat.operator_matrix(); // L = S - I
    let mut s_mat = op.clone();
    for k in 0..nv {
        s_mat[(k, k)] = s_mat[(k, k)] + T::one();
    }

    let idx = |i: usize, j: usize, k: usize| (i * ny + j) * nv + k;
    let mut f = vec![T::zero(); nx * ny * nv];

    // Prescribe inflow rows once.
    let apply_bc = |f: &mut Vec<T>| {
        for (k, &a) in mesh.v_rule.nodes.iter().enumerate() {
            for j in 0..ny {
                if Face::XLow.is_inflow_2d(a) {
                    f[idx(0, j, k)] = (problem.inflow)(Face::XLow, &[mesh.y[j]], a);
                }
                if Face::XHigh.is_inflow_2d(a) {
                    f[idx(nx - 1, j, k)] = (problem.inflow)(Face::XHigh, &[mesh.y[j]], a);
                }
            }
            for i in 0..nx {
                if Face::YLow.is_inflow_2d(a) {
                    f[idx(i, 0, k)] = (problem.inflow)(Face::YLow, &[mesh.x[i]], a);
                }
                if Face::YHigh.is_inflow_2d(a) {
                    f[idx(i, ny - 1, k)] = (problem.inflow)(Face::YHigh, &[mesh.x[i]], a);
                }
            }
        }
    };
    apply_bc(&mut f);

    let mut scatter = Array2::<T>::zeros((nx * ny, nv));
    let mut converged = false;
    for _ in 0..max_sweeps {
        // Scattering integral from the previous iterate.
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nv {
                    let mut acc = T::zero();
                    for kk in 0..nv {
                        acc += s_mat[(k, kk)] * f[idx(i, j, kk)];
                    }
                    scatter[(i * ny + j, k)] = acc;
                }
            }
        }
        let mut delta = T::zero();
        for (k, &a) in mesh.v_rule.nodes.iter().enumerate() {
            let (ca, sa) = (a.cos(), a.sin());
            let xs: Vec<usize> = if ca >= T::zero() {
                (0..nx).collect()
            } else {
                (0..nx).rev().collect()
            };
            let ys: Vec<usize> = if sa >= T::zero() {
                (0..ny).collect()
            } else {
                (0..ny).rev().collect()
            };
            for &i in &xs {
                for &j in &ys {
                    // Skip prescribed inflow rows.
                    let on_x_in = (ca > T::zero() && i == 0) || (ca < T::zero() && i == nx - 1);
                    let on_y_in = (sa > T::zero() && j == 0) || (sa < T::zero() && j == ny - 1);
                    if on_x_in || on_y_in {
                        continue;
                    }
                    let p = [mesh.x[i], mesh.y[j]];
                    let ss = (problem.sigma_s)(&p);
                    let sa_c = (problem.sigma_a)(&p);
                    let g = (problem.source)(&p, a);
                    let mut num = ss * scatter[(i * ny + j, k)] + eps * eps * g;
                    let mut den = ss + eps * eps * sa_c;
                    if ca > T::zero() {
                        let h = mesh.x[i] - mesh.x[i - 1];
                        let adv = eps * ca / h;
                        num += adv * f[idx(i - 1, j, k)];
                        den += adv;
                    } else if ca < T::zero() {
                        let h = mesh.x[i + 1] - mesh.x[i];
                        let adv = eps * (-ca) / h;
                        num += adv * f[idx(i + 1, j, k)];
                        den += adv;
                    }
                    if sa > T::zero() {
                        let h = mesh.y[j] - mesh.y[j - 1];
                        let adv = eps * sa / h;
                        num += adv * f[idx(i, j - 1, k)];
                        den += adv;
                    } else if sa < T::zero() {
                        let h = mesh.y[j + 1] - mesh.y[j];
                        let adv = eps * (-sa) / h;
                        num += adv * f[idx(i, j + 1, k)];
                        den += adv;
                    }
                    let newv = num / den;
                    delta = delta.max((newv - f[idx(i, j, k)]).abs());
                    f[idx(i, j, k)] = newv;
                }
            }
        }
        if delta < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(
            "2D source iteration did not converge within the sweep budget".into(),
        ));
    }
    Ok(Field {
        axes: vec![
            Axis {
                label: "x",
                nodes: mesh.x.clone(),
                weights: Mesh2D::trapezoid(&mesh.x),
            },
            Axis {
                label: "y",
                nodes: mesh.y.clone(),
                weights: Mesh2D::trapezoid(&mesh.y),
            },
            Axis {
                label: "v",
                nodes: mesh.v_rule.nodes.clone(),
                weights: mesh.v_rule.weights.clone(),
            },
        ],
        values: f,
    })
}
