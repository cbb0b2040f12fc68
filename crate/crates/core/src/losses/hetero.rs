//! Loss for the heterogeneous-scale problem `eps(x) v d_x f = <f> - f`
//! with decomposition `f = rho(x) + eps(x) g(x, v)`.
//!
//! The space derivative of the product expands analytically:
//! `d_x(eps g) = eps' g + eps d_x g`.

use super::common::{BoundaryBatch, LossBreakdown};
use crate::mlp::{forward_on_tape, gather_grads, push_net, MlpSpec, ParamVector};
use crate::optim::Objective;
use crate::problem::{ProblemSpec, TrainingSet};
use crate::scalar::Scalar;
use crate::tape::Tape;
use ndarray::Array2;
use std::sync::Arc;

/// `eps(x) = (1 + e^{-a(x-1/2)}) / (b + 1 + e^{-a(x-1/2)})`, the smooth
/// scale profile of the heterogeneous example; `phi_left` is the constant
/// left inflow.
#[derive(Debug, Clone, Copy)]
pub struct HeteroEpsProblem<T> {
    pub a: T,
    pub b: T,
    pub phi_left: T,
}

impl<T: Scalar> Default for HeteroEpsProblem<T> {
    fn default() -> Self {
        Self {
            a: T::of(10.0),
            b: T::of(20.0),
            phi_left: T::of(5.0),
        }
    }
}

impl<T: Scalar> HeteroEpsProblem<T> {
    pub fn eps(&self, x: T) -> T {
        let e = (-self.a * (x - T::of(0.5))).exp();
        (T::one() + e) / (self.b + T::one() + e)
    }

    pub fn deps(&self, x: T) -> T {
        let e = (-self.a * (x - T::of(0.5))).exp();
        let denom = self.b + T::one() + e;
        -self.a * e * self.b / (denom * denom)
    }

    /// Equivalent fixed-scale form `v d_x f = sigma(x)(<f> - f)` with
    /// `sigma = 1/eps`; used by the finite-difference reference.
    pub fn equivalent_problem(&self) -> ProblemSpec<T> {
        let hp = *self;
        let phi = self.phi_left;
        ProblemSpec {
            epsilon: T::one(),
            sigma_s: Arc::new(move |p: &[T]| T::one() / hp.eps(p[0])),
            inflow: Arc::new(move |face, _, _| match face {
                crate::problem::Face::XLow => phi,
                _ => T::zero(),
            }),
            ..ProblemSpec::homogeneous_1d(T::one())
        }
    }
}

/// Trainable loss for the heterogeneous-scale decomposition. Parameter
/// layout `[rho | g]`.
pub struct HeteroEpsLoss<'a, T: Scalar> {
    pub hp: HeteroEpsProblem<T>,
    pub trainset: &'a TrainingSet<T>,
    pub rho_spec: MlpSpec<T>,
    pub g_spec: MlpSpec<T>,
}

impl<'a, T: Scalar> HeteroEpsLoss<'a, T> {
    pub fn param_count(&self) -> usize {
        self.rho_spec.param_count() + self.g_spec.param_count()
    }

    pub fn eval(&self, theta: &[T], want_grad: bool) -> (LossBreakdown<T>, Vec<T>) {
        let nrho = self.rho_spec.param_count();
        let (rho_theta, g_theta) = theta.split_at(nrho);
        let rho_params = ParamVector {
            data: rho_theta.to_vec(),
        };
        let g_params = ParamVector {
            data: g_theta.to_vec(),
        };
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
        let mut eps_rows = Array2::zeros((rows, 1));
        let mut deps_rows = Array2::zeros((rows, 1));
        for i in 0..nx {
            let x = x_rule.nodes[i];
            let (e, de) = (self.hp.eps(x), self.hp.deps(x));
            for j in 0..nv {
                let r = i * nv + j;
                xv[(r, 0)] = x;
                xv[(r, 1)] = v_rule.nodes[j];
                vcol[(r, 0)] = v_rule.nodes[j];
                eps_rows[(r, 0)] = e;
                deps_rows[(r, 0)] = de;
            }
        }
        let xv_in = tape.constant(xv);
        let vcol = tape.constant(vcol);
        let eps_rows = tape.constant(eps_rows);
        let deps_rows = tape.constant(deps_rows);
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
        let rho = forward_on_tape(&mut tape, &self.rho_spec, &rho_net, x_in, &[0], 1);
        let g = forward_on_tape(&mut tape, &self.g_spec, &g_net, xv_in, &[0], 1);

        // d_x(eps g) = eps' g + eps g_x
        let t1 = tape.mul(deps_rows, g.val);
        let t2 = tape.mul(eps_rows, g.d1[0]);
        let d_eps_g = tape.add(t1, t2);
        let v_d = tape.mul(vcol, d_eps_g);
        let macro_res = tape.block_avg(v_d, nv, vw_norm.clone());
        let term_macro = tape.sum_sq_weighted(macro_res, w_x);

        let rho_dx_rows = tape.block_repeat(rho.d1[0], nv);
        let grad_f = tape.add(rho_dx_rows, d_eps_g);
        let v_grad = tape.mul(vcol, grad_f);
        let micro = tape.add(v_grad, g.val);
        let term_micro = tape.sum_sq_weighted(micro, w_int);

        let mut terms = vec![
            ("macro_residual".to_string(), tape.scalar(term_macro)),
            ("micro_residual".to_string(), tape.scalar(term_micro)),
        ];
        let mut total = tape.add(term_macro, term_micro);

        // faces carry eps evaluated at the endpoint
        let equivalent = self.hp.equivalent_problem();
        for face in &self.trainset.faces {
            let batch = BoundaryBatch::build_1d(&equivalent, face);
            let eface = self.hp.eps(face.fixed);
            let x_face = tape.constant(Array2::from_shape_vec((1, 1), vec![face.fixed]).unwrap());
            let rho_head = forward_on_tape(&mut tape, &self.rho_spec, &rho_net, x_face, &[], 0);
            let rho_rows = tape.block_repeat(rho_head.val, batch.len());
            let kin = tape.constant(batch.kinetic_input());
            let g_head = forward_on_tape(&mut tape, &self.g_spec, &g_net, kin, &[], 0);
            let r = tape.add_scaled(rho_rows, eface, g_head.val);
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
            flat
        } else {
            vec![T::zero(); theta.len()]
        };
        (LossBreakdown::from_terms(terms), grad)
    }
}

impl<'a, T: Scalar> Objective<T> for HeteroEpsLoss<'a, T> {
    fn value_grad(&self, theta: &[T]) -> (T, Vec<T>) {
        let (bd, grad) = self.eval(theta, true);
        (bd.total, grad)
    }

    fn value(&self, theta: &[T]) -> T {
        self.eval(theta, false).0.total
    }
}

/// One-shot candidate evaluation: `rho_fn(x) -> (value, dx)`,
/// `g_fn(x, v) -> (value, dx)`.
pub fn hetero_eps_loss<T: Scalar>(
    hp: &HeteroEpsProblem<T>,
    trainset: &TrainingSet<T>,
    rho_fn: &dyn Fn(T) -> (T, T),
    g_fn: &dyn Fn(T, T) -> (T, T),
) -> LossBreakdown<T> {
    let x_rule = &trainset.x_rule;
    let v_rule = &trainset.v_rule;
    let measure = v_rule.measure();
    let _nv = v_rule.len();
    let mut terms: Vec<(String, T)> = Vec::new();

    let mut macro_sum = T::zero();
    let mut micro_sum = T::zero();
    for (i, &x) in x_rule.nodes.iter().enumerate() {
        let (e, de) = (hp.eps(x), hp.deps(x));
        let (_rv, rdx) = rho_fn(x);
        let mut avg = T::zero();
        let mut micro_acc = T::zero();
        for (j, &v) in v_rule.nodes.iter().enumerate() {
            let (gv, gdx) = g_fn(x, v);
            let d_eps_g = de * gv + e * gdx;
            avg += v_rule.weights[j] / measure * v * d_eps_g;
            let micro = v * (rdx + d_eps_g) + gv;
            micro_acc += v_rule.weights[j] / measure * micro * micro;
        }
        macro_sum += x_rule.weights[i] * avg * avg;
        micro_sum += x_rule.weights[i] * micro_acc;
    }
    terms.push(("macro_residual".to_string(), macro_sum));
    terms.push(("micro_residual".to_string(), micro_sum));

    for face in &trainset.faces {
        let e = hp.eps(face.fixed);
        let phi = if face.face == crate::problem::Face::XLow {
            hp.phi_left
        } else {
            T::zero()
        };
        let nb = face.v_samples.len();
        let mut acc = T::zero();
        for &v in &face.v_samples {
            let r = rho_fn(face.fixed).0 + e * g_fn(face.fixed, v).0 - phi;
            acc += r * r;
        }
        terms.push((
            format!("boundary_{}", face.face.label()),
            face.b_weight * acc / T::of_usize(nb),
        ));
    }
    LossBreakdown::from_terms(terms)
}
