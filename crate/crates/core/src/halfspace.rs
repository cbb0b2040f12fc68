//! Half-space (Milne) problems, Chandrasekhar H-functions, and the
//! boundary-layer corrector built from them.
//!
//! The half-space problem `v d_z f = L f` on `z in [0, inf)` with inflow
//! data on `v . n < 0` is solved on a truncated slab `[0, Z]` by minimizing
//! a residual + zero-flux + inflow loss over a small network. Its far-field
//! constant feeds the diffusion boundary condition; for isotropic kernels
//! the constant also has a closed form through the H-function, which this
//! module tabulates by damped fixed-point iteration.

use crate::activation::Activation;
use crate::error::{invalid, Error, Result};
use crate::mlp::{
    forward, forward_on_tape, gather_grads, init_params, load_checkpoint, push_net,
    save_checkpoint, MlpSpec, ParamVector,
};
use crate::optim::{
    two_phase_train, AdamConfig, LbfgsConfig, Objective, Observer, StopRule, TracePoint,
};
use crate::quadrature::{gauss_legendre, velocity_average, QuadratureRule};
use crate::scalar::Scalar;
use crate::tape::Tape;
use ndarray::Array2;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

// ---------------------------------------------------------------------------
// Chandrasekhar H-functions
// ---------------------------------------------------------------------------

/// Tabulated H-function on the inflow half of the velocity space.
#[derive(Debug, Clone)]
pub struct HFunctionTable<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    pub values: Vec<T>,
    /// Sup-norm residual of the defining identity at the nodes.
    pub residual: T,
}

impl<T: Scalar> HFunctionTable<T> {
    /// Serialize as two-column CSV `node,value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "node,h")?;
        for (n, v) in self.nodes.iter().zip(&self.values) {
            writeln!(f, "{n},{v}")?;
        }
        Ok(())
    }
}

/// 1D kernel of the defining identity: `1/H(v) = sum_j w_j H_j w_node_j /
/// (2 (v + w_node_j))`.
fn h_kernel_1d<T: Scalar>(v: T, w: T) -> T {
    w / (T::of(2.0) * (v + w))
}

/// Solve the 1D identity by damped fixed-point iteration from `H = 1`.
pub fn chandrasekhar_h_1d<T: Scalar>(n: usize, tol: T, max_iter: usize) -> Result<HFunctionTable<T>> {
    let rule = gauss_legendre(n, T::zero(), T::one())?;
    solve_h(
        rule.nodes.clone(),
        rule.weights.clone(),
        |vi, wj| h_kernel_1d(vi, wj),
        tol,
        max_iter,
    )
}

/// 2D (circle-velocity) identity on the inflow arcs
/// `[0, pi/2] u [3 pi/2, 2 pi]`:
/// `1/H(a) = int H(xi) cos(xi) / (cos a + cos xi) d xi`.
pub fn chandrasekhar_h_2d<T: Scalar>(
    n_per_arc: usize,
    tol: T,
    max_iter: usize,
) -> Result<HFunctionTable<T>> {
    let half_pi = T::PI() * T::of(0.5);
    let arc1 = gauss_legendre(n_per_arc, T::zero(), half_pi)?;
    let arc2 = gauss_legendre(n_per_arc, T::of(3.0) * half_pi, T::of(4.0) * half_pi)?;
    let mut nodes = arc1.nodes.clone();
    nodes.extend(&arc2.nodes);
    let mut weights = arc1.weights.clone();
    weights.extend(&arc2.weights);
    solve_h(
        nodes,
        weights,
        |a, xi| xi.cos() / (a.cos() + xi.cos()),
        tol,
        max_iter,
    )
}

fn solve_h<T: Scalar>(
    nodes: Vec<T>,
    weights: Vec<T>,
    kernel: impl Fn(T, T) -> T,
    tol: T,
    max_iter: usize,
) -> Result<HFunctionTable<T>> {
    if tol <= T::zero() {
        return Err(invalid("H-function tolerance must be positive"));
    }
    let n = nodes.len();
    // Precompute the kernel matrix once.
    let mut k = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] = kernel(nodes[i], nodes[j]) * weights[j];
        }
    }
    let damping = T::of(0.5);
    let mut h = vec![T::one(); n];
    let mut residual = T::infinity();
    for _ in 0..max_iter {
        let mut next = vec![T::zero(); n];
        residual = T::zero();
        for i in 0..n {
            let mut integral = T::zero();
            for j in 0..n {
                integral += k[i * n + j] * h[j];
            }
            let fixed_point = T::one() / integral;
            residual = residual.max((T::one() / h[i] - integral).abs());
            next[i] = (T::one() - damping) * h[i] + damping * fixed_point;
        }
        h = next;
        if residual < tol {
            return Ok(HFunctionTable {
                nodes,
                weights,
                values: h,
                residual,
            });
        }
    }
    Err(Error::Numerical(format!(
        "H-function iteration did not reach tolerance; last residual {residual:e}"
    )))
}

/// Sup-norm residual of the defining identity (recomputed from the table).
pub fn h_identity_residual_1d<T: Scalar>(table: &HFunctionTable<T>) -> T {
    identity_residual(table, |v, w| h_kernel_1d(v, w))
}

pub fn h_identity_residual_2d<T: Scalar>(table: &HFunctionTable<T>) -> T {
    identity_residual(table, |a, xi| xi.cos() / (a.cos() + xi.cos()))
}

fn identity_residual<T: Scalar>(table: &HFunctionTable<T>, kernel: impl Fn(T, T) -> T) -> T {
    let n = table.nodes.len();
    let mut worst = T::zero();
    for i in 0..n {
        let mut integral = T::zero();
        for j in 0..n {
            integral += kernel(table.nodes[i], table.nodes[j]) * table.weights[j] * table.values[j];
        }
        worst = worst.max((T::one() / table.values[i] - integral).abs());
    }
    worst
}

/// Far-field constant of the 1D half-space problem with inflow `phi`:
/// `(sqrt(3)/2) int_0^1 phi(v) H(v) v dv`.
pub fn f_bl_infinity_1d<T: Scalar>(phi: &dyn Fn(T) -> T, table: &HFunctionTable<T>) -> T {
    let mut acc = T::zero();
    for i in 0..table.nodes.len() {
        let v = table.nodes[i];
        acc += table.weights[i] * phi(v) * table.values[i] * v;
    }
    T::of(3.0).sqrt() * T::of(0.5) * acc
}

/// Far-field limit of the 2D half-space problem at one boundary point:
/// `(1/sqrt(pi)) int_{inflow arcs} phi(a) cos(a) H(a) da`.
pub fn f_bl_infinity_2d<T: Scalar>(phi: &dyn Fn(T) -> T, table: &HFunctionTable<T>) -> T {
    let mut acc = T::zero();
    for i in 0..table.nodes.len() {
        let a = table.nodes[i];
        acc += table.weights[i] * phi(a) * a.cos() * table.values[i];
    }
    acc / T::PI().sqrt()
}

/// Outgoing trace of the 1D half-space solution at `v < 0`:
/// `f(0, v) = (1/2) H(|v|) int_0^1 phi(w) H(w) w / (w + |v|) dw`.
///
/// The identity only defines `H` on `[0, 1]`; the trace formula evaluates it
/// at the reflected speed `|v|`.
pub fn reflection_bc_1d<T: Scalar>(
    phi: &dyn Fn(T) -> T,
    table: &HFunctionTable<T>,
    v: T,
) -> Result<T> {
    if v >= T::zero() || v < -T::one() {
        return Err(invalid("reflection trace needs v in [-1, 0)"));
    }
    let mu = v.abs();
    let h_mu = h_interp_1d(table, mu);
    let mut acc = T::zero();
    for i in 0..table.nodes.len() {
        let w = table.nodes[i];
        acc += table.weights[i] * phi(w) * table.values[i] * w / (w + mu);
    }
    Ok(T::of(0.5) * h_mu * acc)
}

/// Outgoing trace of the 2D half-space solution for an inflow arc angle
/// `a` (the trace lives at the specularly reflected angle):
/// `int phi(xi) cos(xi) H(xi) H(a) / (cos a + cos xi) d xi`.
pub fn reflection_bc_2d<T: Scalar>(
    phi: &dyn Fn(T) -> T,
    table: &HFunctionTable<T>,
    alpha: T,
) -> Result<T> {
    if alpha.cos() <= T::zero() {
        return Err(invalid("reflection trace needs an inflow-arc angle"));
    }
    let h_a = h_interp_2d(table, alpha);
    let mut acc = T::zero();
    for i in 0..table.nodes.len() {
        let xi = table.nodes[i];
        acc += table.weights[i] * phi(xi) * xi.cos() * table.values[i]
            / (alpha.cos() + xi.cos());
    }
    Ok(h_a * acc)
}

/// Monotone cubic (Fritsch-Carlson) interpolation.
fn pchip_eval<T: Scalar>(xs: &[T], ys: &[T], x: T) -> T {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    // Slopes of secants.
    let mut d = vec![T::zero(); n - 1];
    for i in 0..n - 1 {
        d[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    }
    // Monotone tangents.
    let mut m = vec![T::zero(); n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for i in 1..n - 1 {
        if d[i - 1] * d[i] <= T::zero() {
            m[i] = T::zero();
        } else {
            let w1 = T::of(2.0) * (xs[i + 1] - xs[i]) + (xs[i] - xs[i - 1]);
            let w2 = (xs[i + 1] - xs[i]) + T::of(2.0) * (xs[i] - xs[i - 1]);
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    let k = xs.partition_point(|&xi| xi <= x).saturating_sub(1);
    let h = xs[k + 1] - xs[k];
    let t = (x - xs[k]) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = T::of(2.0) * t3 - T::of(3.0) * t2 + T::one();
    let h10 = t3 - T::of(2.0) * t2 + t;
    let h01 = -T::of(2.0) * t3 + T::of(3.0) * t2;
    let h11 = t3 - t2;
    h00 * ys[k] + h10 * h * m[k] + h01 * ys[k + 1] + h11 * h * m[k + 1]
}

/// Interpolate a 1D table at `mu in [0, 1]`; `H(0) = 1` is exact and is
/// prepended as an anchor.
fn h_interp_1d<T: Scalar>(table: &HFunctionTable<T>, mu: T) -> T {
    let mut xs = Vec::with_capacity(table.nodes.len() + 1);
    let mut ys = Vec::with_capacity(table.nodes.len() + 1);
    xs.push(T::zero());
    ys.push(T::one());
    xs.extend(&table.nodes);
    ys.extend(&table.values);
    pchip_eval(&xs, &ys, mu)
}

/// Interpolate a 2D table via the even symmetry `H(a) = H(cos a)`: the table
/// is folded onto `t = cos a in [0, 1]`.
fn h_interp_2d<T: Scalar>(table: &HFunctionTable<T>, alpha: T) -> T {
    let mut pairs: Vec<(T, T)> = table
        .nodes
        .iter()
        .zip(&table.values)
        .map(|(&a, &h)| (a.cos(), h))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.dedup_by(|a, b| (a.0 - b.0).abs() < T::of(1e-14));
    let xs: Vec<T> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<T> = pairs.iter().map(|p| p.1).collect();
    pchip_eval(&xs, &ys, alpha.cos())
}

// ---------------------------------------------------------------------------
// Trained half-space solves
// ---------------------------------------------------------------------------

/// Truncated half-space problem: slab `[0, z_max]` with `n_z` left-endpoint
/// grid points, a velocity/angle rule, and `n_boundary` random inflow
/// samples.
#[derive(Clone)]
pub struct HalfSpaceSpec<T> {
    pub z_max: T,
    pub n_z: usize,
    pub v_rule: QuadratureRule<T>,
    pub n_boundary: usize,
    pub inflow: Arc<dyn Fn(T) -> T + Send + Sync>,
    /// True when the velocity variable is an angle on `[0, 2 pi]` (the
    /// transport factor is then `cos a` and the inflow cone `cos a > 0`).
    pub angular: bool,
}

impl<T: Scalar> HalfSpaceSpec<T> {
    pub fn new_1d(z_max: T, n_z: usize, n_v: usize, n_boundary: usize, inflow: Arc<dyn Fn(T) -> T + Send + Sync>) -> Result<Self> {
        Ok(Self {
            z_max,
            n_z,
            v_rule: gauss_legendre(n_v, -T::one(), T::one())?,
            n_boundary,
            inflow,
            angular: false,
        })
    }

    fn transport_factor(&self, v: T) -> T {
        if self.angular {
            v.cos()
        } else {
            v
        }
    }

    fn sample_inflow(&self, seed: u64) -> Vec<T> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..self.n_boundary)
            .map(|_| {
                let u: f64 = rng.random_range(0.0..1.0);
                if self.angular {
                    // cos a > 0: [0, pi/2) u (3pi/2, 2pi)
                    let u = T::of(u);
                    if u < T::of(0.5) {
                        u * T::PI()
                    } else {
                        u * T::PI() + T::PI()
                    }
                } else {
                    T::of(u.max(f64::MIN_POSITIVE))
                }
            })
            .collect()
    }

    /// Sup-norm of the inflow over the cone (tuning constant for the output
    /// activation).
    pub fn inflow_sup(&self) -> T {
        let mut sup = T::zero();
        let n = 4096;
        for i in 0..n {
            let u = T::of_usize(i) / T::of_usize(n - 1);
            let v = if self.angular {
                if u < T::of(0.5) {
                    u * T::PI()
                } else {
                    u * T::PI() + T::PI()
                }
            } else {
                u.max(T::of(1e-12))
            };
            sup = sup.max((self.inflow)(v).abs());
        }
        sup
    }
}

/// Residual + zero-flux + inflow loss on the truncated slab.
pub struct HalfSpaceLoss<'a, T: Scalar> {
    pub spec: &'a HalfSpaceSpec<T>,
    pub net: MlpSpec<T>,
    pub boundary_samples: Vec<T>,
}

impl<'a, T: Scalar> HalfSpaceLoss<'a, T> {
    pub fn eval(&self, theta: &[T], want_grad: bool) -> (T, Vec<T>, [T; 3]) {
        let params = ParamVector {
            data: theta.to_vec(),
        };
        let spec = self.spec;
        let nv = spec.v_rule.len();
        let measure = spec.v_rule.measure();
        let dz = spec.z_max / T::of_usize(spec.n_z);
        let mut total_terms = [T::zero(); 3];
        let mut grad = vec![T::zero(); theta.len()];

        let chunks = super::losses::chunks_for(spec.n_z, nv);
        for chunk in chunks {
            let zs: Vec<T> = chunk.clone().map(|i| dz * T::of_usize(i)).collect();
            let rows = zs.len() * nv;
            let mut tape = Tape::new();
            let mut zv = Array2::zeros((rows, 2));
            let mut tcol = Array2::zeros((rows, 1));
            for (i, &z) in zs.iter().enumerate() {
                for j in 0..nv {
                    let r = i * nv + j;
                    let v = spec.v_rule.nodes[j];
                    zv[(r, 0)] = z;
                    zv[(r, 1)] = v;
                    tcol[(r, 0)] = spec.transport_factor(v);
                }
            }
            let zv_in = tape.constant(zv);
            let tcol = tape.constant(tcol);
            let vw_norm: Arc<Vec<T>> =
                Arc::new(spec.v_rule.weights.iter().map(|&w| w / measure).collect());
            let mut w_int = Vec::with_capacity(rows);
            for _ in &zs {
                for &wv in vw_norm.iter() {
                    w_int.push(dz * wv);
                }
            }
            let w_int = Arc::new(w_int);
            let w_z = Arc::new(vec![dz; zs.len()]);

            let net = push_net(&mut tape, &self.net, &params);
            let f = forward_on_tape(&mut tape, &self.net, &net, zv_in, &[0], 1);
            let vfz = tape.mul(tcol, f.d1[0]);
            let f_mean = tape.block_avg(f.val, nv, vw_norm.clone());
            let f_mean_rows = tape.block_repeat(f_mean, nv);
            let lf = tape.sub(f_mean_rows, f.val);
            let res = tape.sub(vfz, lf);
            let term_res = tape.sum_sq_weighted(res, w_int);
            let vf = tape.mul(tcol, f.val);
            let flux = tape.block_avg(vf, nv, vw_norm);
            let term_flux = tape.sum_sq_weighted(flux, w_z);
            let total = tape.add(term_res, term_flux);
            total_terms[0] += tape.scalar(term_res);
            total_terms[1] += tape.scalar(term_flux);
            if want_grad {
                let grads = tape.backward(total).expect("scalar root");
                for (slot, v) in grad.iter_mut().zip(gather_grads(&grads, &self.net, &net)) {
                    *slot += v;
                }
            }
        }

        // inflow misfit
        let nb = self.boundary_samples.len();
        let mut tape = Tape::new();
        let mut zv = Array2::zeros((nb, 2));
        let mut phi = Array2::zeros((nb, 1));
        for (r, &v) in self.boundary_samples.iter().enumerate() {
            zv[(r, 1)] = v;
            phi[(r, 0)] = (spec.inflow)(v);
        }
        let zv_in = tape.constant(zv);
        let phi = tape.constant(phi);
        let net = push_net(&mut tape, &self.net, &params);
        let f = forward_on_tape(&mut tape, &self.net, &net, zv_in, &[], 0);
        let r = tape.sub(f.val, phi);
        let term_b = tape.sum_sq_weighted(r, Arc::new(vec![T::one() / T::of_usize(nb); nb]));
        total_terms[2] = tape.scalar(term_b);
        if want_grad {
            let grads = tape.backward(term_b).expect("scalar root");
            for (slot, v) in grad.iter_mut().zip(gather_grads(&grads, &self.net, &net)) {
                *slot += v;
            }
        }
        (
            total_terms[0] + total_terms[1] + total_terms[2],
            grad,
            total_terms,
        )
    }
}

impl<'a, T: Scalar> Objective<T> for HalfSpaceLoss<'a, T> {
    fn value_grad(&self, theta: &[T]) -> (T, Vec<T>) {
        let (v, g, _) = self.eval(theta, true);
        (v, g)
    }

    fn value(&self, theta: &[T]) -> T {
        self.eval(theta, false).0
    }
}

/// A trained half-space profile.
#[derive(Debug, Clone)]
pub struct HalfSpaceSolution<T> {
    pub net: MlpSpec<T>,
    pub params: ParamVector<T>,
    pub f_inf: T,
    pub history: Vec<TracePoint<T>>,
    pub final_loss: T,
}

impl<T: Scalar> HalfSpaceSolution<T> {
    pub fn eval(&self, z: T, v: T) -> T {
        forward(&self.params, &self.net, &[z, v]).expect("2-input net")[0]
    }

    /// `<v f(z, .)>` on a rule (zero-flux check).
    pub fn flux(&self, z: T, rule: &QuadratureRule<T>, angular: bool) -> T {
        let samples: Vec<T> = rule
            .nodes
            .iter()
            .map(|&v| {
                let t = if angular { v.cos() } else { v };
                t * self.eval(z, v)
            })
            .collect();
        velocity_average(rule, &samples).expect("matching rule")
    }
}

/// Train the half-space profile with the two-phase schedule.
///
/// The output activation is the scaled sigmoid with `C_a = sup |phi|`; an
/// identically zero inflow short-circuits to the exact zero solution.
pub fn solve_halfspace_1d<T: Scalar>(
    spec: &HalfSpaceSpec<T>,
    n_l: usize,
    n_r: usize,
    adam: &AdamConfig<T>,
    lbfgs: &LbfgsConfig<T>,
    stop: &StopRule<T>,
    seed: u64,
    observer: Option<Observer<'_, T>>,
) -> Result<HalfSpaceSolution<T>> {
    let c_a = spec.inflow_sup();
    if c_a <= T::of(1e-14) {
        let net = MlpSpec::new(vec![2, 1], Activation::Identity)?;
        let params = ParamVector::zeros(&net);
        return Ok(HalfSpaceSolution {
            net,
            params,
            f_inf: T::zero(),
            history: Vec::new(),
            final_loss: T::zero(),
        });
    }
    let net = MlpSpec::uniform(2, n_l, n_r, 1, Activation::ScaledSigmoid(c_a))?;
    let theta0 = init_params(&net, seed);
    let loss = HalfSpaceLoss {
        spec,
        net: net.clone(),
        boundary_samples: spec.sample_inflow(seed ^ 0x5eed_b0a7),
    };
    let result = two_phase_train(&loss, theta0.data, adam, lbfgs, stop, observer)?;
    let params = ParamVector {
        data: result.theta,
    };
    let f_inf = forward(&params, &net, &[spec.z_max, T::zero()])?[0];
    Ok(HalfSpaceSolution {
        net,
        params,
        f_inf,
        history: result.history,
        final_loss: result.final_loss,
    })
}

// ---------------------------------------------------------------------------
// Boundary-layer corrector
// ---------------------------------------------------------------------------

/// Map from physical depth to the stretched half-space variable.
#[derive(Debug, Clone)]
pub enum StretchMap<T> {
    /// `z = scale * (x - x0)`, for constant sigma_s.
    Affine { scale: T, x0: T },
    /// Tabulated cumulative integral `z(x) = (1/eps) int_{x0}^x sigma_s`.
    Table { x: Vec<T>, z: Vec<T> },
}

impl<T: Scalar> StretchMap<T> {
    pub fn constant_sigma(sigma_s: T, eps: T, x0: T) -> Self {
        StretchMap::Affine {
            scale: sigma_s / eps,
            x0,
        }
    }

    /// Cumulative integral tabulated with per-panel Simpson increments
    /// (exact for cubic sigma_s).
    pub fn from_sigma(sigma_s: &dyn Fn(T) -> T, eps: T, x0: T, x1: T, n: usize) -> Self {
        let n = n.max(8);
        let h = (x1 - x0) / T::of_usize(n);
        let mut xs = Vec::with_capacity(n + 1);
        let mut zs = Vec::with_capacity(n + 1);
        xs.push(x0);
        zs.push(T::zero());
        let mut acc = T::zero();
        for i in 0..n {
            let a = x0 + h * T::of_usize(i);
            let b = a + h;
            let m = (a + b) * T::of(0.5);
            acc += (h / T::of(6.0)) * (sigma_s(a) + T::of(4.0) * sigma_s(m) + sigma_s(b));
            xs.push(b);
            zs.push(acc / eps);
        }
        StretchMap::Table { x: xs, z: zs }
    }

    pub fn eval(&self, x: T) -> Result<T> {
        match self {
            StretchMap::Affine { scale, x0 } => {
                if x < *x0 - T::of(1e-12) {
                    return Err(Error::Internal(
                        "stretch map evaluated left of its anchor".into(),
                    ));
                }
                Ok(*scale * (x - *x0))
            }
            StretchMap::Table { x: xs, z: zs } => {
                if x < xs[0] - T::of(1e-12) || x > *xs.last().unwrap() + T::of(1e-12) {
                    return Err(Error::Internal(
                        "stretch map evaluated outside its table".into(),
                    ));
                }
                Ok(pchip_eval(xs, zs, x))
            }
        }
    }
}

/// Corrector `Gamma(x, v) = f_bl(z(x), v) - f_inf`, hard-zero beyond the
/// truncation depth.
#[derive(Debug, Clone)]
pub struct GammaCorrector1d<T> {
    pub net: MlpSpec<T>,
    pub params: ParamVector<T>,
    pub f_inf: T,
    pub stretch: StretchMap<T>,
    pub z_max: T,
}

impl<T: Scalar> GammaCorrector1d<T> {
    pub fn from_solution(
        solution: &HalfSpaceSolution<T>,
        stretch: StretchMap<T>,
        z_max: T,
    ) -> Self {
        Self {
            net: solution.net.clone(),
            params: solution.params.clone(),
            f_inf: solution.f_inf,
            stretch,
            z_max,
        }
    }

    /// Identically zero corrector (layer disabled).
    pub fn zero(eps: T) -> Self {
        let net = MlpSpec::new(vec![2, 1], Activation::Identity).expect("static spec");
        Self {
            net: net.clone(),
            params: ParamVector::zeros(&net),
            f_inf: T::zero(),
            stretch: StretchMap::constant_sigma(T::one(), eps, T::zero()),
            z_max: T::of(10.0),
        }
    }

    pub fn eval(&self, x: T, v: T) -> Result<T> {
        let z = self.stretch.eval(x)?;
        if z >= self.z_max {
            return Ok(T::zero());
        }
        Ok(forward(&self.params, &self.net, &[z, v])?[0] - self.f_inf)
    }
}

/// 2D corrector: one trained profile per `y_j`, piecewise linear between
/// nodes; `d Gamma / dy` by centered differences of the nodal profiles.
#[derive(Debug, Clone)]
pub struct GammaCorrector2d<T> {
    pub y_grid: Vec<T>,
    pub nets: Vec<(MlpSpec<T>, ParamVector<T>)>,
    pub f_inf: Vec<T>,
    pub stretch: StretchMap<T>,
    pub z_max: T,
}

impl<T: Scalar> GammaCorrector2d<T> {
    fn node_gamma(&self, j: usize, z: T, alpha: T) -> Result<T> {
        let (spec, params) = &self.nets[j];
        Ok(forward(params, spec, &[z, alpha])?[0] - self.f_inf[j])
    }

    fn bracket(&self, y: T) -> (usize, usize, T) {
        let n = self.y_grid.len();
        if y <= self.y_grid[0] {
            return (0, 0, T::zero());
        }
        if y >= self.y_grid[n - 1] {
            return (n - 1, n - 1, T::zero());
        }
        let k = self.y_grid.partition_point(|&yj| yj <= y) - 1;
        let t = (y - self.y_grid[k]) / (self.y_grid[k + 1] - self.y_grid[k]);
        (k, k + 1, t)
    }

    pub fn eval(&self, x: T, y: T, alpha: T) -> Result<T> {
        let z = self.stretch.eval(x)?;
        if z >= self.z_max {
            return Ok(T::zero());
        }
        let (j0, j1, t) = self.bracket(y);
        let g0 = self.node_gamma(j0, z, alpha)?;
        if j0 == j1 {
            return Ok(g0);
        }
        let g1 = self.node_gamma(j1, z, alpha)?;
        Ok(g0 + t * (g1 - g0))
    }

    /// Nodal `dGamma/dy` by centered differences (one-sided at the edges),
    /// interpolated linearly between nodes.
    pub fn eval_dy(&self, x: T, y: T, alpha: T) -> Result<T> {
        let z = self.stretch.eval(x)?;
        if z >= self.z_max {
            return Ok(T::zero());
        }
        let n = self.y_grid.len();
        let nodal = |j: usize| -> Result<T> {
            if j == 0 {
                let g0 = self.node_gamma(0, z, alpha)?;
                let g1 = self.node_gamma(1, z, alpha)?;
                Ok((g1 - g0) / (self.y_grid[1] - self.y_grid[0]))
            } else if j == n - 1 {
                let g0 = self.node_gamma(n - 2, z, alpha)?;
                let g1 = self.node_gamma(n - 1, z, alpha)?;
                Ok((g1 - g0) / (self.y_grid[n - 1] - self.y_grid[n - 2]))
            } else {
                let gm = self.node_gamma(j - 1, z, alpha)?;
                let gp = self.node_gamma(j + 1, z, alpha)?;
                Ok((gp - gm) / (self.y_grid[j + 1] - self.y_grid[j - 1]))
            }
        };
        let (j0, j1, t) = self.bracket(y);
        let d0 = nodal(j0)?;
        if j0 == j1 {
            return Ok(d0);
        }
        let d1 = nodal(j1)?;
        Ok(d0 + t * (d1 - d0))
    }
}

/// Train one half-space profile per `y_j`. `inflow(y, v)` supplies the data.
#[allow(clippy::too_many_arguments)]
pub fn solve_halfspace_2d<T: Scalar>(
    z_max: T,
    n_z: usize,
    n_alpha: usize,
    n_boundary: usize,
    y_grid: Vec<T>,
    inflow: Arc<dyn Fn(T, T) -> T + Send + Sync>,
    n_l: usize,
    n_r: usize,
    adam: &AdamConfig<T>,
    lbfgs: &LbfgsConfig<T>,
    stop: &StopRule<T>,
    seed: u64,
    stretch: StretchMap<T>,
) -> Result<GammaCorrector2d<T>> {
    let alpha_rule = gauss_legendre(n_alpha, T::zero(), T::of(2.0) * T::PI())?;
    let mut nets = Vec::with_capacity(y_grid.len());
    let mut f_inf = Vec::with_capacity(y_grid.len());
    for (j, &y) in y_grid.iter().enumerate() {
        let inflow = inflow.clone();
        let spec = HalfSpaceSpec {
            z_max,
            n_z,
            v_rule: alpha_rule.clone(),
            n_boundary,
            inflow: Arc::new(move |a| inflow(y, a)),
            angular: true,
        };
        let sol = solve_halfspace_1d(
            &spec,
            n_l,
            n_r,
            adam,
            lbfgs,
            stop,
            seed.wrapping_add(j as u64),
            None,
        )
        .map_err(|e| Error::Numerical(format!("half-space solve at y index {j} failed: {e}")))?;
        nets.push((sol.net, sol.params));
        f_inf.push(sol.f_inf);
    }
    Ok(GammaCorrector2d {
        y_grid,
        nets,
        f_inf,
        stretch,
        z_max,
    })
}

// ---------------------------------------------------------------------------
// Corrector checkpoints
// ---------------------------------------------------------------------------

const CORRECTOR_MAGIC: &str = "rte-corrector-v1";

/// Write the corrector as `<base>.meta` plus `<base>.net` next to it.
pub fn save_corrector_1d<T: Scalar>(base: &Path, corr: &GammaCorrector1d<T>, seed: u64) -> Result<()> {
    let net_path = base.with_extension("net");
    save_checkpoint(&net_path, &corr.net, &corr.params, seed)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(base.with_extension("meta"))?);
    writeln!(f, "{CORRECTOR_MAGIC}")?;
    writeln!(f, "dim 1")?;
    writeln!(f, "z_max {}", corr.z_max)?;
    writeln!(f, "f_inf {}", corr.f_inf)?;
    match &corr.stretch {
        StretchMap::Affine { scale, x0 } => writeln!(f, "stretch affine {scale} {x0}")?,
        StretchMap::Table { x, z } => {
            writeln!(f, "stretch table {}", x.len())?;
            for (xi, zi) in x.iter().zip(z) {
                writeln!(f, "{xi} {zi}")?;
            }
        }
    }
    writeln!(
        f,
        "net {}",
        net_path.file_name().unwrap().to_string_lossy()
    )?;
    Ok(())
}

pub fn load_corrector_1d<T: Scalar>(base: &Path) -> Result<GammaCorrector1d<T>> {
    let f = std::io::BufReader::new(std::fs::File::open(base.with_extension("meta"))?);
    let mut lines = f.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse(format!("corrector meta truncated before {what}")))?
            .map_err(Error::Io)
    };
    if next("magic")? != CORRECTOR_MAGIC {
        return Err(Error::Parse("not a corrector checkpoint".into()));
    }
    if next("dim")? != "dim 1" {
        return Err(Error::Parse("expected a 1D corrector".into()));
    }
    let z_max: T = parse_tail(&next("z_max")?, "z_max")?;
    let f_inf: T = parse_tail(&next("f_inf")?, "f_inf")?;
    let stretch_line = next("stretch")?;
    let parts: Vec<&str> = stretch_line.split_whitespace().collect();
    let stretch = match parts.as_slice() {
        ["stretch", "affine", scale, x0] => StretchMap::Affine {
            scale: scale
                .parse()
                .map_err(|_| Error::Parse("bad stretch scale".into()))?,
            x0: x0.parse().map_err(|_| Error::Parse("bad stretch x0".into()))?,
        },
        ["stretch", "table", n] => {
            let n: usize = n.parse().map_err(|_| Error::Parse("bad table len".into()))?;
            let mut xs = Vec::with_capacity(n);
            let mut zs = Vec::with_capacity(n);
            for _ in 0..n {
                let line = next("table row")?;
                let mut it = line.split_whitespace();
                xs.push(
                    it.next()
                        .ok_or_else(|| Error::Parse("bad table row".into()))?
                        .parse()
                        .map_err(|_| Error::Parse("bad table x".into()))?,
                );
                zs.push(
                    it.next()
                        .ok_or_else(|| Error::Parse("bad table row".into()))?
                        .parse()
                        .map_err(|_| Error::Parse("bad table z".into()))?,
                );
            }
            StretchMap::Table { x: xs, z: zs }
        }
        _ => return Err(Error::Parse("bad stretch header".into())),
    };
    let net_line = next("net")?;
    let net_name = net_line
        .strip_prefix("net ")
        .ok_or_else(|| Error::Parse("missing net reference".into()))?;
    let net_path = base
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(net_name);
    let (net, params, _) = load_checkpoint::<T>(&net_path)?;
    Ok(GammaCorrector1d {
        net,
        params,
        f_inf,
        stretch,
        z_max,
    })
}

/// Write a 2D corrector as `<base>.meta` plus `<base>.net<j>` per profile.
pub fn save_corrector_2d<T: Scalar>(base: &Path, corr: &GammaCorrector2d<T>, seed: u64) -> Result<()> {
    for (j, (spec, params)) in corr.nets.iter().enumerate() {
        save_checkpoint(&base.with_extension(format!("net{j}")), spec, params, seed)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(base.with_extension("meta"))?);
    writeln!(f, "{CORRECTOR_MAGIC}")?;
    writeln!(f, "dim 2")?;
    writeln!(f, "z_max {}", corr.z_max)?;
    write!(f, "y_grid")?;
    for y in &corr.y_grid {
        write!(f, " {y}")?;
    }
    writeln!(f)?;
    write!(f, "f_inf")?;
    for v in &corr.f_inf {
        write!(f, " {v}")?;
    }
    writeln!(f)?;
    match &corr.stretch {
        StretchMap::Affine { scale, x0 } => writeln!(f, "stretch affine {scale} {x0}")?,
        StretchMap::Table { x, z } => {
            writeln!(f, "stretch table {}", x.len())?;
            for (xi, zi) in x.iter().zip(z) {
                writeln!(f, "{xi} {zi}")?;
            }
        }
    }
    Ok(())
}

pub fn load_corrector_2d<T: Scalar>(base: &Path) -> Result<GammaCorrector2d<T>> {
    let f = std::io::BufReader::new(std::fs::File::open(base.with_extension("meta"))?);
    let mut lines = f.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse(format!("corrector meta truncated before {what}")))?
            .map_err(Error::Io)
    };
    if next("magic")? != CORRECTOR_MAGIC {
        return Err(Error::Parse("not a corrector checkpoint".into()));
    }
    if next("dim")? != "dim 2" {
        return Err(Error::Parse("expected a 2D corrector".into()));
    }
    let z_max: T = parse_tail(&next("z_max")?, "z_max")?;
    let y_line = next("y_grid")?;
    let y_grid: Vec<T> = y_line
        .strip_prefix("y_grid")
        .ok_or_else(|| Error::Parse("missing y_grid".into()))?
        .split_whitespace()
        .map(|p| p.parse().map_err(|_| Error::Parse("bad y value".into())))
        .collect::<Result<_>>()?;
    let f_line = next("f_inf")?;
    let f_inf: Vec<T> = f_line
        .strip_prefix("f_inf")
        .ok_or_else(|| Error::Parse("missing f_inf".into()))?
        .split_whitespace()
        .map(|p| p.parse().map_err(|_| Error::Parse("bad f_inf value".into())))
        .collect::<Result<_>>()?;
    let stretch_line = next("stretch")?;
    let parts: Vec<&str> = stretch_line.split_whitespace().collect();
    let stretch = match parts.as_slice() {
        ["stretch", "affine", scale, x0] => StretchMap::Affine {
            scale: scale
                .parse()
                .map_err(|_| Error::Parse("bad stretch scale".into()))?,
            x0: x0.parse().map_err(|_| Error::Parse("bad stretch x0".into()))?,
        },
        ["stretch", "table", n] => {
            let n: usize = n.parse().map_err(|_| Error::Parse("bad table len".into()))?;
            let mut xs = Vec::with_capacity(n);
            let mut zs = Vec::with_capacity(n);
            for _ in 0..n {
                let line = next("table row")?;
                let mut it = line.split_whitespace();
                xs.push(
                    it.next()
                        .ok_or_else(|| Error::Parse("bad table row".into()))?
                        .parse()
                        .map_err(|_| Error::Parse("bad table x".into()))?,
                );
                zs.push(
                    it.next()
                        .ok_or_else(|| Error::Parse("bad table row".into()))?
                        .parse()
                        .map_err(|_| Error::Parse("bad table z".into()))?,
                );
            }
            StretchMap::Table { x: xs, z: zs }
        }
        _ => return Err(Error::Parse("bad stretch header".into())),
    };
    let mut nets = Vec::with_capacity(y_grid.len());
    for j in 0..y_grid.len() {
        let (spec, params, _) = load_checkpoint::<T>(&base.with_extension(format!("net{j}")))?;
        nets.push((spec, params));
    }
    if nets.len() != f_inf.len() {
        return Err(Error::Parse("profile count mismatch".into()));
    }
    Ok(GammaCorrector2d {
        y_grid,
        nets,
        f_inf,
        stretch,
        z_max,
    })
}

fn parse_tail<T: Scalar>(line: &str, key: &str) -> Result<T> {
    line.strip_prefix(key)
        .map(str::trim)
        .ok_or_else(|| Error::Parse(format!("missing {key}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad {key}")))
}
