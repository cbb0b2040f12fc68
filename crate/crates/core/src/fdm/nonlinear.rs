//! Nonlinear radiation system references: the algebraic limit profile and
//! the kinetic Newton solver.

use super::linalg::lu_solve;
use super::{Axis, Field};
use crate::error::{invalid, Error, Result};
use crate::losses::NonlinearConstants;
use crate::quadrature::QuadratureRule;
use crate::scalar::Scalar;

/// Limit temperature: `kappa T^4 + T = (kappa + 1)(1 - x)` per node,
/// safeguarded Newton on `[0, 1]`.
pub fn nonlinear_limit_solve<T: Scalar>(kappa: T, xs: &[T]) -> Result<Vec<T>> {
    if kappa < T::zero() {
        return Err(invalid("kappa must be nonnegative"));
    }
    xs.iter()
        .map(|&x| {
            let rhs = (kappa + T::one()) * (T::one() - x);
            quartic_root(kappa, rhs)
        })
        .collect()
}

/// Solve `kappa t^4 + t = rhs` for `t in [0, 1]` (monotone, so the root is
/// unique); Newton with bisection safeguard.
fn quartic_root<T: Scalar>(kappa: T, rhs: T) -> Result<T> {
    let f = |t: T| kappa * t * t * t * t + t - rhs;
    let mut lo = T::zero();
    let mut hi = T::one();
    if f(lo) > T::zero() {
        return Ok(T::zero());
    }
    if f(hi) < -T::of(1e-12) {
        return Ok(T::one());
    }
    let mut t = rhs / (kappa + T::one()); // linear-profile seed
    for _ in 0..200 {
        let ft = f(t);
        if ft.abs() < T::of(1e-15) {
            return Ok(t);
        }
        if ft > T::zero() {
            hi = t;
        } else {
            lo = t;
        }
        let df = T::of(4.0) * kappa * t * t * t + T::one();
        let mut next = t - ft / df;
        if !(next > lo && next < hi) {
            next = (lo + hi) * T::of(0.5);
        }
        if (next - t).abs() < T::of(1e-16) {
            return Ok(next);
        }
        t = next;
    }
    Ok(t)
}

#[derive(Debug, Clone)]
pub struct NonlinearFdmOptions<T> {
    /// Sup-norm tolerance on the coupled residual.
    pub tol: T,
    pub max_newton: usize,
}

impl<T: Scalar> Default for NonlinearFdmOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-10),
            max_newton: 60,
        }
    }
}

/// Kinetic solve of the coupled system.
///
/// The intensity is a linear functional of the emission `a c T^4`
/// (absorption-emission transport has no angular coupling), so it is
/// eliminated through a dense response matrix and the remaining semilinear
/// temperature equation is solved by damped Newton. Plain alternation
/// between the two equations contracts like `1 - O(eps^2)` and stalls in
/// the diffusive regime, which is exactly the regime of interest.
pub fn fdm_nonlinear_1d<T: Scalar>(
    consts: &NonlinearConstants<T>,
    epsilon: T,
    n_x: usize,
    v_rule: &QuadratureRule<T>,
    opts: &NonlinearFdmOptions<T>,
) -> Result<(Field<T>, Field<T>)> {
    if n_x < 3 {
        return Err(invalid("need at least three nodes"));
    }
    let eps = epsilon;
    let sigma = consts.sigma;
    let ac = consts.a * consts.c;
    let h = T::one() / T::of_usize(n_x - 1);
    let xs: Vec<T> = (0..n_x).map(|i| h * T::of_usize(i)).collect();
    let nv = v_rule.len();
    let measure = v_rule.measure();

    // One transport sweep: intensity from emission e (per node) and, when
    // `with_data`, the fixed inflow I(0, v>0) = 1, I(1, v<0) = 0.
    //
    // Characteristic integration with a quadratic upwind-biased source
    // reconstruction. The temperature balance lives at O(eps^2); upwinding
    // (O(h/eps) relative error) and even exact integration of a linear
    // source (O(h eps)) both distort it, while the quadratic reconstruction
    // reproduces the `<I> - e = eps^2 e''/(3 sigma^2)` closure on coarse
    // grids.
    let sweep = |e: &[T], with_data: bool| -> Vec<T> {
        let mut intensity = vec![T::zero(); n_x * nv];
        // Kernel moments over one cell: m0 = int k, m1 = int s k,
        // m2 = int s^2 k with k(s) = e^{-s/l}/l and tau = h/l.
        let moments = |tau: T| -> (T, T, T) {
            let a = (-tau).exp();
            let l = h / tau;
            if tau < T::of(1e-3) {
                let t2 = tau * tau;
                let t3 = t2 * tau;
                let t4 = t3 * tau;
                (
                    a,
                    l * (t2 * T::of(0.5) - t3 / T::of(3.0) + t4 * T::of(0.125)),
                    l * l * (t3 / T::of(3.0) - t4 * T::of(0.25)),
                )
            } else {
                (
                    a,
                    l * (T::one() - a * (T::one() + tau)),
                    l * l * (T::of(2.0) - a * (tau * tau + T::of(2.0) * tau + T::of(2.0))),
                )
            }
        };
        for (j, &v) in v_rule.nodes.iter().enumerate() {
            if v > T::zero() {
                let tau = sigma * h / (eps * v);
                let (a, m1, m2) = moments(tau);
                let m0 = T::one() - a;
                intensity[j] = if with_data { T::one() } else { T::zero() };
                for i in 1..n_x {
                    // e(x_i - s) ~ e_i - s d1 + s^2/2 d2 on the upwind cell.
                    // d1 = e'(x_i), one-sided upwind parabola (centered at
                    // the first interior node).
                    let (d1, d2) = if i >= 2 {
                        (
                            (T::of(3.0) * e[i] - T::of(4.0) * e[i - 1] + e[i - 2])
                                / (T::of(2.0) * h),
                            (e[i] - T::of(2.0) * e[i - 1] + e[i - 2]) / (h * h),
                        )
                    } else {
                        (
                            (e[2] - e[0]) / (T::of(2.0) * h),
                            (e[2] - T::of(2.0) * e[1] + e[0]) / (h * h),
                        )
                    };
                    intensity[i * nv + j] = a * intensity[(i - 1) * nv + j] + e[i] * m0
                        - d1 * m1
                        + d2 * m2 * T::of(0.5);
                }
            } else {
                let tau = sigma * h / (eps * (-v));
                let (a, m1, m2) = moments(tau);
                let m0 = T::one() - a;
                intensity[(n_x - 1) * nv + j] = T::zero();
                for i in (0..n_x - 1).rev() {
                    // Marching right to left: d1 = -e'(x_i) so the same
                    // `- d1 m1` form applies to e(x_i + s).
                    let (d1, d2) = if i + 2 < n_x {
                        (
                            (T::of(3.0) * e[i] - T::of(4.0) * e[i + 1] + e[i + 2])
                                / (T::of(2.0) * h),
                            (e[i] - T::of(2.0) * e[i + 1] + e[i + 2]) / (h * h),
                        )
                    } else {
                        (
                            (e[n_x - 3] - e[n_x - 1]) / (T::of(2.0) * h),
                            (e[n_x - 1] - T::of(2.0) * e[n_x - 2] + e[n_x - 3]) / (h * h),
                        )
                    };
                    intensity[i * nv + j] = a * intensity[(i + 1) * nv + j] + e[i] * m0
                        - d1 * m1
                        + d2 * m2 * T::of(0.5);
                }
            }
        }
        intensity
    };
    let mean_of = |intensity: &[T]| -> Vec<T> {
        (0..n_x)
            .map(|i| {
                let mut acc = T::zero();
                for j in 0..nv {
                    acc += v_rule.weights[j] * intensity[i * nv + j];
                }
                acc / measure
            })
            .collect()
    };

    // Response matrix: column k = <I> from a unit emission at node k.
    let mut response = vec![T::zero(); n_x * n_x];
    for k in 0..n_x {
        let mut e = vec![T::zero(); n_x];
        e[k] = T::one();
        let col = mean_of(&sweep(&e, false));
        for i in 0..n_x {
            response[i * n_x + k] = col[i];
        }
    }
    let b_data = mean_of(&sweep(&vec![T::zero(); n_x], true));

    // Newton on interior temperatures; endpoints pinned to 1 and 0.
    let mut temp: Vec<T> = xs.iter().map(|&x| T::one() - x).collect();
    let m = n_x - 2;
    let residual = |temp: &[T]| -> Vec<T> {
        let e: Vec<T> = temp.iter().map(|&t| ac * t * t * t * t).collect();
        let mut mean_i = b_data.clone();
        for i in 0..n_x {
            let mut acc = T::zero();
            for k in 0..n_x {
                acc += response[i * n_x + k] * e[k];
            }
            mean_i[i] += acc;
        }
        (0..m)
            .map(|kk| {
                let i = kk + 1;
                let lap = (temp[i + 1] - T::of(2.0) * temp[i] + temp[i - 1]) / (h * h);
                eps * eps * lap - sigma * (e[i] - mean_i[i])
            })
            .collect()
    };
    let sup = |v: &[T]| v.iter().fold(T::zero(), |a, &x| a.max(x.abs()));

    let mut res = residual(&temp);
    let mut converged = false;
    for _ in 0..opts.max_newton {
        if sup(&res) < opts.tol {
            converged = true;
            break;
        }
        // J[kk][ll] = eps^2 D2 - sigma (I - A) diag(4 a c T^3), interior.
        let mut jac = vec![T::zero(); m * m];
        for kk in 0..m {
            let i = kk + 1;
            jac[kk * m + kk] += -T::of(2.0) * eps * eps / (h * h);
            if kk > 0 {
                jac[kk * m + kk - 1] += eps * eps / (h * h);
            }
            if kk + 1 < m {
                jac[kk * m + kk + 1] += eps * eps / (h * h);
            }
            for ll in 0..m {
                let k = ll + 1;
                let de = T::of(4.0) * ac * temp[k] * temp[k] * temp[k];
                let coupling = if kk == ll { T::one() } else { T::zero() };
                jac[kk * m + ll] -= sigma * (coupling - response[i * n_x + k]) * de;
            }
        }
        let mut step: Vec<T> = res.iter().map(|&r| -r).collect();
        lu_solve(&mut jac, &mut step, m)?;
        // Damped update: halve until the residual does not grow.
        let mut lambda = T::one();
        let base = sup(&res);
        loop {
            let mut trial = temp.clone();
            for kk in 0..m {
                trial[kk + 1] += lambda * step[kk];
            }
            let trial_res = residual(&trial);
            if sup(&trial_res) <= base * (T::one() + T::of(1e-12)) || lambda < T::of(1e-6) {
                temp = trial;
                res = trial_res;
                break;
            }
            lambda *= T::of(0.5);
        }
    }
    if !converged && sup(&res) >= opts.tol {
        return Err(Error::Numerical(format!(
            "coupled Newton iteration stalled; residual {:e}",
            sup(&res)
        )));
    }

    let e: Vec<T> = temp.iter().map(|&t| ac * t * t * t * t).collect();
    let intensity = sweep(&e, true);

    let mut x_weights = vec![h; n_x];
    x_weights[0] = h * T::of(0.5);
    x_weights[n_x - 1] = h * T::of(0.5);
    let x_axis = Axis {
        label: "x",
        nodes: xs,
        weights: x_weights,
    };
    let i_field = Field {
        axes: vec![
            x_axis.clone(),
            Axis {
                label: "v",
                nodes: v_rule.nodes.clone(),
                weights: v_rule.weights.clone(),
            },
        ],
        values: intensity,
    };
    let t_field = Field {
        axes: vec![x_axis],
        values: temp,
    };
    Ok((i_field, t_field))
}
