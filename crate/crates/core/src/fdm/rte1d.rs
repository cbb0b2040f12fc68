//! 1D discrete-ordinates transport with first-order upwinding.
//!
//! `eps v d_x f = sigma_s (<f> - f) - eps^2 sigma_a f + eps^2 G` on a
//! (possibly nonuniform) node set, inflow imposed strongly at both ends.
//! The scattering coupling is closed either by a dense direct solve on the
//! mean (robust at small eps) or by source iteration.

use super::linalg::lu_solve;
use super::{Axis, Field};
use crate::error::{invalid, Error, Result};
use crate::problem::{Face, ProblemSpec};
use crate::quadrature::{gauss_legendre, QuadratureRule};
use crate::scalar::Scalar;
use crate::scattering::KernelSpec;

/// Spatial nodes plus the velocity rule.
#[derive(Debug, Clone)]
pub struct Mesh1D<T> {
    pub x: Vec<T>,
    pub v_rule: QuadratureRule<T>,
}

impl<T: Scalar> Mesh1D<T> {
    pub fn uniform(n_x: usize, lo: T, hi: T, n_v: usize) -> Result<Self> {
        if n_x < 2 {
            return Err(invalid("mesh needs at least two nodes"));
        }
        let h = (hi - lo) / T::of_usize(n_x - 1);
        Ok(Self {
            x: (0..n_x).map(|i| lo + h * T::of_usize(i)).collect(),
            v_rule: gauss_legendre(n_v, -T::one(), T::one())?,
        })
    }

    /// Layer-refined mesh: `n_layer` uniform nodes on `[lo, split)` and
    /// `n_bulk` uniform cells on `[split, hi]` (nodes include both
    /// endpoints).
    pub fn split(n_layer: usize, n_bulk: usize, lo: T, split: T, hi: T, n_v: usize) -> Result<Self> {
        if !(lo < split && split < hi) {
            return Err(invalid("split point must lie inside the interval"));
        }
        let mut x = Vec::with_capacity(n_layer + n_bulk + 1);
        let h1 = (split - lo) / T::of_usize(n_layer);
        for i in 0..n_layer {
            x.push(lo + h1 * T::of_usize(i));
        }
        let h2 = (hi - split) / T::of_usize(n_bulk);
        for i in 0..=n_bulk {
            x.push(split + h2 * T::of_usize(i));
        }
        Ok(Self {
            x,
            v_rule: gauss_legendre(n_v, -T::one(), T::one())?,
        })
    }

    /// Trapezoid weights of the node set (for error metrics).
    pub fn x_weights(&self) -> Vec<T> {
        let n = self.x.len();
        let mut w = vec![T::zero(); n];
        for i in 0..n - 1 {
            let h = self.x[i + 1] - self.x[i];
            w[i] += h * T::of(0.5);
            w[i + 1] += h * T::of(0.5);
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdmSolver {
    /// Dense solve of the mean equation; cost `O(n_x^2 n_v + n_x^3)`.
    Direct,
    SourceIteration,
}

#[derive(Debug, Clone)]
pub struct FdmOptions<T> {
    pub solver: FdmSolver,
    pub tol: T,
    pub max_sweeps: usize,
}

impl<T: Scalar> Default for FdmOptions<T> {
    fn default() -> Self {
        Self {
            solver: FdmSolver::Direct,
            tol: T::of(1e-10),
            max_sweeps: 100_000,
        }
    }
}

impl<T: Scalar> FdmOptions<T> {
    /// Direct below `n_x * n_v <= 1e5` (source iteration degenerates as
    /// eps -> 0), source iteration above.
    pub fn auto(mesh: &Mesh1D<T>) -> Self {
        let solver = if mesh.x.len() * mesh.v_rule.len() <= 100_000 {
            FdmSolver::Direct
        } else {
            FdmSolver::SourceIteration
        };
        Self {
            solver,
            ..Self::default()
        }
    }
}

/// One transport sweep: given the mean `rho`, solve every ordinate by
/// upwinding and return the full flux table (row-major `x` then `v`).
fn sweep<T: Scalar>(
    problem: &ProblemSpec<T>,
    mesh: &Mesh1D<T>,
    rho: &[T],
    with_data: bool,
) -> Vec<T> {
    let n = mesh.x.len();
    let nv = mesh.v_rule.len();
    let eps = problem.epsilon;
    let mut f = vec![T::zero(); n * nv];
    for (j, &v) in mesh.v_rule.nodes.iter().enumerate() {
        if v > T::zero() {
            f[j] = if with_data {
                (problem.inflow)(Face::XLow, &[], v)
            } else {
                T::zero()
            };
            for i in 1..n {
                let h = mesh.x[i] - mesh.x[i - 1];
                let p = [mesh.x[i]];
                let ss = (problem.sigma_s)(&p);
                let sa = (problem.sigma_a)(&p);
                let g = if with_data {
                    (problem.source)(&p, v)
                } else {
                    T::zero()
                };
                let adv = eps * v / h;
                f[i * nv + j] = (adv * f[(i - 1) * nv + j] + ss * rho[i] + eps * eps * g)
                    / (adv + ss + eps * eps * sa);
            }
        } else {
            f[(n - 1) * nv + j] = if with_data {
                (problem.inflow)(Face::XHigh, &[], v)
            } else {
                T::zero()
            };
            for i in (0..n - 1).rev() {
                let h = mesh.x[i + 1] - mesh.x[i];
                let p = [mesh.x[i]];
                let ss = (problem.sigma_s)(&p);
                let sa = (problem.sigma_a)(&p);
                let g = if with_data {
                    (problem.source)(&p, v)
                } else {
                    T::zero()
                };
                let adv = eps * (-v) / h;
                f[i * nv + j] = (adv * f[(i + 1) * nv + j] + ss * rho[i] + eps * eps * g)
                    / (adv + ss + eps * eps * sa);
            }
        }
    }
    f
}

fn mean_of<T: Scalar>(mesh: &Mesh1D<T>, f: &[T]) -> Vec<T> {
    let n = mesh.x.len();
    let nv = mesh.v_rule.len();
    let measure = mesh.v_rule.measure();
    (0..n)
        .map(|i| {
            let mut acc = T::zero();
            for j in 0..nv {
                acc += mesh.v_rule.weights[j] * f[i * nv + j];
            }
            acc / measure
        })
        .collect()
}

/// Reference transport solve (isotropic kernel).
pub fn fdm_rte_1d<T: Scalar>(
    problem: &ProblemSpec<T>,
    mesh: &Mesh1D<T>,
    opts: &FdmOptions<T>,
) -> Result<Field<T>> {
    if problem.dim != 1 {
        return Err(invalid("fdm_rte_1d requires a 1D problem"));
    }
    if !matches!(problem.kernel, KernelSpec::Isotropic) {
        return Err(invalid("1D reference solver supports only the isotropic kernel"));
    }
    let n = mesh.x.len();
    let rho = match opts.solver {
        FdmSolver::Direct => {
            // rho = M rho + c with M built columnwise from unit means.
            let c = mean_of(mesh, &sweep(problem, mesh, &vec![T::zero(); n], true));
            let mut a = vec![T::zero(); n * n];
            for k in 0..n {
                let mut e = vec![T::zero(); n];
                e[k] = T::one();
                let col = mean_of(mesh, &sweep(problem, mesh, &e, false));
                for i in 0..n {
                    // (I - M) rho = c
                    let m_ik = col[i];
                    a[i * n + k] = if i == k { T::one() - m_ik } else { -m_ik };
                }
            }
            let mut rho = c;
            lu_solve(&mut a, &mut rho, n)?;
            rho
        }
        FdmSolver::SourceIteration => {
            let mut rho = vec![T::zero(); n];
            let mut last_delta = T::infinity();
            let mut converged = false;
            for sweep_idx in 0..opts.max_sweeps {
                let f = sweep(problem, mesh, &rho, true);
                let new_rho = mean_of(mesh, &f);
                let delta = rho
                    .iter()
                    .zip(&new_rho)
                    .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
                rho = new_rho;
                if delta < opts.tol {
                    converged = true;
                    break;
                }
                // Stagnation: spectral radius estimate near one.
                if sweep_idx > 10 && delta > last_delta * T::of(0.999999) {
                    let est = delta / last_delta;
                    if est > T::of(0.999999) {
                        return Err(Error::Numerical(format!(
                            "source iteration stagnated; spectral radius estimate {est}"
                        )));
                    }
                }
                last_delta = delta;
            }
            if !converged {
                return Err(Error::Numerical(
                    "source iteration did not converge within the sweep budget".into(),
                ));
            }
            rho
        }
    };
    let f = sweep(problem, mesh, &rho, true);
    Ok(Field {
        axes: vec![
            Axis {
                label: "x",
                nodes: mesh.x.clone(),
                weights: mesh.x_weights(),
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
