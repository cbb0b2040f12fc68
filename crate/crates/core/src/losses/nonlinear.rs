//! Loss for the nonlinear radiation system coupling intensity and
//! temperature:
//!
//! ```text
//! eps v d_x I = sigma (a c T^4 - I)
//! eps^2 d_xx T = sigma (a c T^4 - <I>)
//! ```
//!
//! with `I = rho + eps g`, `<g> = 0`. Terms: `<v d_x g> - d_xx T`;
//! `v d_x(rho + eps g) - eps d_xx T + sigma g`;
//! `eps^2 d_xx T - sigma a c T^4 + sigma rho`; temperature endpoint misfits
//! `(T(0) - 1)^2 + T(1)^2`; intensity inflow misfits on both faces.
//! The temperature network is evaluated with order-2 jets, and parameter
//! gradients flow through `d_xx T`.

use super::common::{BoundaryBatch, LossBreakdown};
use crate::mlp::{forward_on_tape, gather_grads, push_net, MlpSpec, ParamVector};
use crate::optim::Objective;
use crate::problem::{ProblemSpec, TrainingSet};
use crate::scalar::Scalar;
use crate::tape::Tape;
use ndarray::Array2;
use std::sync::Arc;

#[derive(Debug, Clone, Copy)]
pub struct NonlinearConstants<T> {
    pub a: T,
    pub c: T,
    pub sigma: T,
}

impl<T: Scalar> Default for NonlinearConstants<T> {
    fn default() -> Self {
        Self {
            a: T::one(),
            c: T::one(),
            sigma: T::one(),
        }
    }
}

impl<T: Scalar> NonlinearConstants<T> {
    /// `kappa = a c / (3 sigma)`, the coefficient of the limiting relation.
    pub fn kappa(&self) -> T {
        self.a * self.c / (T::of(3.0) * self.sigma)
    }

    /// Problem shell used to build training sets and boundary batches:
    /// inflow `I(0, v>0) = 1`, `I(1, v<0) = 0`.
    pub fn problem_shell(&self, epsilon: T) -> ProblemSpec<T> {
        ProblemSpec::homogeneous_1d(epsilon)
    }
}

/// Trainable nonlinear loss; parameter layout `[rho | g | T]`.
pub struct NonlinearLoss<'a, T: Scalar> {
    pub trainset: &'a TrainingSet<T>,
    pub rho_spec: MlpSpec<T>,
    pub g_spec: MlpSpec<T>,
    pub t_spec: MlpSpec<T>,
    pub consts: NonlinearConstants<T>,
    pub epsilon: T,
}

impl<'a, T: Scalar> NonlinearLoss<'a, T> {
    pub fn param_count(&self) -> usize {
        self.rho_spec.param_count() + self.g_spec.param_count() + self.t_spec.param_count()
    }

    pub fn eval(&self, theta: &[T], want_grad: bool) -> (LossBreakdown<T>, Vec<T>) {
        let n1 = self.rho_spec.param_count();
        let n2 = n1 + self.g_spec.param_count();
        let rho_params = ParamVector {
            data: theta[..n1].to_vec(),
        };
        let g_params = ParamVector {
            data: theta[n1..n2].to_vec(),
        };
        let t_params = ParamVector {
            data: theta[n2..].to_vec(),
        };
        let eps = self.epsilon;
        let sigma = self.consts.sigma;
        let ac = self.consts.a * self.consts.c;
        let x_rule = &self.trainset.x_rule;
        let v_rule = &self.trainset.v_rule;
        let nx = x_rule.len();
        let nv = v_rule.len();
        let rows = nx * nv;
        let measure = v_rule.measure();

        let mut tape = Tape::new();
        let x_in = tape.constant(Array2::from_shape_vec((nx, 1), x_rule.nodes.clone()).unwrap());
        let mut xv = Array2::zeros((rows, 2));
        let mut vcol = Array2::zeros((rows, 1));
        for i in 0..nx {
            for j in 0..nv {
                let r = i * nv + j;
                xv[(r, 0)] = x_rule.nodes[i];
                xv[(r, 1)] = v_rule.nodes[j];
                vcol[(r, 0)] = v_rule.nodes[j];
            }
        }
        let xv_in = tape.constant(xv);
        let vcol = tape.constant(vcol);
        let vw_norm: Arc<Vec<T>> = Arc::new(v_rule.weights.iter().map(|&w| w / measure).collect());
        let w_x: Arc<Vec<T>> = Arc::new(x_rule.weights.clone());
        let mut w_int = Vec::with_capacity(rows);
        for &wx in x_rule.weights.iter() {
            for &wv in vw_norm.iter() {
                w_int.push(wx * wv);
            }
        }
        let w_int = Arc::new(w_int);

        let rho_net = push_net(&mut tape, &self.rho_spec, &rho_params);
        let g_net = push_net(&mut tape, &self.g_spec, &g_params);
        let t_net = push_net(&mut tape, &self.t_spec, &t_params);
        let rho = forward_on_tape(&mut tape, &self.rho_spec, &rho_net, x_in, &[0], 1);
        let g = forward_on_tape(&mut tape, &self.g_spec, &g_net, xv_in, &[0], 1);
        let t = forward_on_tape(&mut tape, &self.t_spec, &t_net, x_in, &[0], 2);
        let t_xx = t.d2[0];

        // <v d_x g> - d_xx T
        let v_gx = tape.mul(vcol, g.d1[0]);
        let avg_v_gx = tape.block_avg(v_gx, nv, vw_norm.clone());
        let macro_res = tape.sub(avg_v_gx, t_xx);
        let term_macro = tape.sum_sq_weighted(macro_res, w_x.clone());

        // v d_x(rho + eps g) - eps d_xx T + sigma g
        let rho_dx_rows = tape.block_repeat(rho.d1[0], nv);
        let grad_i = tape.add_scaled(rho_dx_rows, eps, g.d1[0]);
        let v_grad = tape.mul(vcol, grad_i);
        let t_xx_rows = tape.block_repeat(t_xx, nv);
        let r1 = tape.add_scaled(v_grad, -eps, t_xx_rows);
        let micro = tape.add_scaled(r1, sigma, g.val);
        let term_micro = tape.sum_sq_weighted(micro, w_int);

        // eps^2 d_xx T - sigma a c T^4 + sigma rho
        let t2 = tape.mul(t.val, t.val);
        let t4 = tape.mul(t2, t2);
        let r2 = tape.scale(t_xx, eps * eps);
        let r3 = tape.add_scaled(r2, -(sigma * ac), t4);
        let temp_res = tape.add_scaled(r3, sigma, rho.val);
        let term_temp = tape.sum_sq_weighted(temp_res, w_x);

        // (T(0) - 1)^2 + T(1)^2
        let ends = tape.constant(Array2::from_shape_vec((2, 1), vec![T::zero(), T::one()]).unwrap());
        let t_ends = forward_on_tape(&mut tape, &self.t_spec, &t_net, ends, &[], 0);
        let target = tape.constant(Array2::from_shape_vec((2, 1), vec![T::one(), T::zero()]).unwrap());
        let t_misfit = tape.sub(t_ends.val, target);
        let term_t_bc = tape.sum_sq_weighted(t_misfit, Arc::new(vec![T::one(), T::one()]));

        let mut terms = vec![
            ("macro_residual".to_string(), tape.scalar(term_macro)),
            ("micro_residual".to_string(), tape.scalar(term_micro)),
            ("temperature_residual".to_string(), tape.scalar(term_temp)),
            ("boundary_temperature".to_string(), tape.scalar(term_t_bc)),
        ];
        let mut total = tape.add(term_macro, term_micro);
        total = tape.add(total, term_temp);
        total = tape.add(total, term_t_bc);

        let shell = self.consts.problem_shell(eps);
        for face in &self.trainset.faces {
            let batch = BoundaryBatch::build_1d(&shell, face);
            let x_face = tape.constant(Array2::from_shape_vec((1, 1), vec![face.fixed]).unwrap());
            let rho_head = forward_on_tape(&mut tape, &self.rho_spec, &rho_net, x_face, &[], 0);
            let rho_rows = tape.block_repeat(rho_head.val, batch.len());
            let kin = tape.constant(batch.kinetic_input());
            let g_head = forward_on_tape(&mut tape, &self.g_spec, &g_net, kin, &[], 0);
            let r = tape.add_scaled(rho_rows, eps, g_head.val);
            let phi = tape.constant(
                Array2::from_shape_vec((batch.phi.len(), 1), batch.phi.clone()).unwrap(),
            );
            let r = tape.sub(r, phi);
            let term = tape.sum_sq_weighted(r, batch.weights.clone());
            terms.push((
                format!("boundary_{}", face.face.label()),
                tape.scalar(term),
            ));
            total = tape.add(total, term);
        }

        let grad = if want_grad {
            let grads = tape.backward(total).expect("scalar root");
            let mut flat = gather_grads(&grads, &self.rho_spec, &rho_net);
            flat.extend(gather_grads(&grads, &self.g_spec, &g_net));
            flat.extend(gather_grads(&grads, &self.t_spec, &t_net));
            flat
        } else {
            vec![T::zero(); theta.len()]
        };
        (LossBreakdown::from_terms(terms), grad)
    }
}

impl<'a, T: Scalar> Objective<T> for NonlinearLoss<'a, T> {
    fn value_grad(&self, theta: &[T]) -> (T, Vec<T>) {
        let (bd, grad) = self.eval(theta, true);
        (bd.total, grad)
    }

    fn value(&self, theta: &[T]) -> T {
        self.eval(theta, false).0.total
    }
}

/// Closed-form candidate evaluation: `rho_fn(x) -> (value, dx)`,
/// `g_fn(x, v) -> (value, dx)`, `t_fn(x) -> (value, dx, dxx)`.
pub fn nonlinear_loss<T: Scalar>(
    trainset: &TrainingSet<T>,
    rho_fn: &dyn Fn(T) -> (T, T),
    g_fn: &dyn Fn(T, T) -> (T, T),
    t_fn: &dyn Fn(T) -> (T, T, T),
    consts: &NonlinearConstants<T>,
    epsilon: T,
) -> LossBreakdown<T> {
    let eps = epsilon;
    let sigma = consts.sigma;
    let ac = consts.a * consts.c;
    let x_rule = &trainset.x_rule;
    let v_rule = &trainset.v_rule;
    let measure = v_rule.measure();
    let mut macro_sum = T::zero();
    let mut micro_sum = T::zero();
    let mut temp_sum = T::zero();
    for (i, &x) in x_rule.nodes.iter().enumerate() {
        let (rv, rdx) = rho_fn(x);
        let (tv, _tdx, tdxx) = t_fn(x);
        let mut avg = T::zero();
        let mut micro_acc = T::zero();
        for (j, &v) in v_rule.nodes.iter().enumerate() {
            let (gv, gdx) = g_fn(x, v);
            avg += v_rule.weights[j] / measure * v * gdx;
            let micro = v * (rdx + eps * gdx) - eps * tdxx + sigma * gv;
            micro_acc += v_rule.weights[j] / measure * micro * micro;
        }
        let m = avg - tdxx;
        macro_sum += x_rule.weights[i] * m * m;
        micro_sum += x_rule.weights[i] * micro_acc;
        let tr = eps * eps * tdxx - sigma * ac * tv * tv * tv * tv + sigma * rv;
        temp_sum += x_rule.weights[i] * tr * tr;
    }
    let t0 = t_fn(T::zero()).0 - T::one();
    let t1 = t_fn(T::one()).0;
    let mut terms = vec![
        ("macro_residual".to_string(), macro_sum),
        ("micro_residual".to_string(), micro_sum),
        ("temperature_residual".to_string(), temp_sum),
        ("boundary_temperature".to_string(), t0 * t0 + t1 * t1),
    ];
    let shell = consts.problem_shell(eps);
    for face in &trainset.faces {
        let batch = BoundaryBatch::build_1d(&shell, face);
        let mut acc = T::zero();
        for (r, &v) in batch.rows_vel.iter().enumerate() {
            let misfit = rho_fn(face.fixed).0 + eps * g_fn(face.fixed, v).0 - batch.phi[r];
            acc += batch.weights[r] * misfit * misfit;
        }
        terms.push((format!("boundary_{}", face.face.label()), acc));
    }
    LossBreakdown::from_terms(terms)
}
