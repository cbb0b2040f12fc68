//! Plain residual loss: PDE misfit plus boundary misfit, no decomposition.
//!
//! Residual `eps v d_x f - sigma_s L f + eps^2 sigma_a f - eps^2 G(x, v)`.
//! At small eps, velocity-independent functions matching the boundary data
//! drive this loss to O(eps^2) while staying O(1) away from the solution;
//! the macro-micro loss exists to fix that.

use super::common::{spatial_chunks, BoundaryBatch, Interior1d, LossBreakdown, MAX_CHUNK_ROWS};
use crate::mlp::{forward_on_tape, gather_grads, push_net, MlpSpec, ParamVector};
use crate::optim::Objective;
use crate::problem::{ProblemSpec, TrainingSet};
use crate::scalar::Scalar;
use crate::tape::{NodeId, Tape};
use ndarray::Array2;

fn interior_term<T: Scalar>(
    tape: &mut Tape<T>,
    ctx: &Interior1d<T>,
    f_val: NodeId,
    f_dx: NodeId,
    eps: T,
) -> NodeId {
    let nv = ctx.nv;
    let vfx = tape.mul(ctx.vcol, f_dx);
    let f_mean = tape.block_avg(f_val, nv, ctx.vw_norm.clone());
    let f_mean_rows = tape.block_repeat(f_mean, nv);
    let lf = tape.sub(f_mean_rows, f_val);
    let ss_lf = tape.mul(ctx.ss_rows, lf);
    let r1 = tape.scale(vfx, eps);
    let r2 = tape.sub(r1, ss_lf);
    let sa_f = tape.mul(ctx.sa_rows, f_val);
    let r3 = tape.add_scaled(r2, eps * eps, sa_f);
    // full source: fluctuation + mean
    let gbar_rows = tape.block_repeat(ctx.gbar_x, nv);
    let g_full = tape.add(ctx.gfluc_rows, gbar_rows);
    let r4 = tape.add_scaled(r3, -(eps * eps), g_full);
    tape.sum_sq_weighted(r4, ctx.w_int.clone())
}

fn boundary_term<T: Scalar>(
    tape: &mut Tape<T>,
    f_vals: NodeId,
    batch: &BoundaryBatch<T>,
) -> NodeId {
    let phi = tape.constant(
        Array2::from_shape_vec((batch.phi.len(), 1), batch.phi.clone()).unwrap(),
    );
    let r = tape.sub(f_vals, phi);
    tape.sum_sq_weighted(r, batch.weights.clone())
}

/// Trainable plain residual loss on a 1D problem.
pub struct VanillaLoss1d<'a, T: Scalar> {
    pub problem: &'a ProblemSpec<T>,
    pub trainset: &'a TrainingSet<T>,
    pub f_spec: MlpSpec<T>,
}

impl<'a, T: Scalar> VanillaLoss1d<'a, T> {
    pub fn eval(&self, theta: &[T], want_grad: bool) -> (LossBreakdown<T>, Vec<T>) {
        let params = ParamVector {
            data: theta.to_vec(),
        };
        let eps = self.problem.epsilon;
        let nx = self.trainset.x_rule.len();
        let nv = self.trainset.v_rule.len();
        let mut terms: Vec<(String, T)> = Vec::new();
        let mut grad = vec![T::zero(); theta.len()];

        for chunk in spatial_chunks(nx, nv, MAX_CHUNK_ROWS) {
            let xs = &self.trainset.x_rule.nodes[chunk.clone()];
            let xw = &self.trainset.x_rule.weights[chunk.clone()];
            let mut tape = Tape::new();
            let ctx = Interior1d::build(&mut tape, self.problem, xs, xw, &self.trainset.v_rule);
            let net = push_net(&mut tape, &self.f_spec, &params);
            let f = forward_on_tape(&mut tape, &self.f_spec, &net, ctx.xv_in, &[0], 1);
            let term = interior_term(&mut tape, &ctx, f.val, f.d1[0], eps);
            push_term(&mut terms, "pde_residual", tape.scalar(term));
            if want_grad {
                let grads = tape.backward(term).expect("scalar root");
                for (slot, v) in grad.iter_mut().zip(gather_grads(&grads, &self.f_spec, &net)) {
                    *slot += v;
                }
            }
        }

        for face in &self.trainset.faces {
            let batch = BoundaryBatch::build_1d(self.problem, face);
            let mut tape = Tape::new();
            let net = push_net(&mut tape, &self.f_spec, &params);
            let kin = tape.constant(batch.kinetic_input());
            let f = forward_on_tape(&mut tape, &self.f_spec, &net, kin, &[], 0);
            let term = boundary_term(&mut tape, f.val, &batch);
            push_term(
                &mut terms,
                &format!("boundary_{}", face.face.label()),
                tape.scalar(term),
            );
            if want_grad {
                let grads = tape.backward(term).expect("scalar root");
                for (slot, v) in grad.iter_mut().zip(gather_grads(&grads, &self.f_spec, &net)) {
                    *slot += v;
                }
            }
        }
        (LossBreakdown::from_terms(terms), grad)
    }
}

fn push_term<T: Scalar>(terms: &mut Vec<(String, T)>, name: &str, value: T) {
    match terms.iter_mut().find(|(n, _)| n == name) {
        Some(slot) => slot.1 += value,
        None => terms.push((name.to_string(), value)),
    }
}

impl<'a, T: Scalar> Objective<T> for VanillaLoss1d<'a, T> {
    fn value_grad(&self, theta: &[T]) -> (T, Vec<T>) {
        let (bd, grad) = self.eval(theta, true);
        (bd.total, grad)
    }

    fn value(&self, theta: &[T]) -> T {
        self.eval(theta, false).0.total
    }
}

/// One-shot evaluation for a trained network.
pub fn vanilla_loss<T: Scalar>(
    problem: &ProblemSpec<T>,
    trainset: &TrainingSet<T>,
    f: (&MlpSpec<T>, &ParamVector<T>),
) -> LossBreakdown<T> {
    let loss = VanillaLoss1d {
        problem,
        trainset,
        f_spec: f.0.clone(),
    };
    loss.eval(&f.1.data, false).0
}

/// Closed-form candidate evaluation: `f_fn(x, v) -> (value, d/dx)`.
pub fn vanilla_loss_fields<T: Scalar>(
    problem: &ProblemSpec<T>,
    trainset: &TrainingSet<T>,
    f_fn: &dyn Fn(T, T) -> (T, T),
) -> LossBreakdown<T> {
    let nx = trainset.x_rule.len();
    let nv = trainset.v_rule.len();
    let mut tape = Tape::new();
    let ctx = Interior1d::build(
        &mut tape,
        problem,
        &trainset.x_rule.nodes,
        &trainset.x_rule.weights,
        &trainset.v_rule,
    );
    let mut fv = Array2::zeros((nx * nv, 1));
    let mut fd = Array2::zeros((nx * nv, 1));
    for (i, &x) in trainset.x_rule.nodes.iter().enumerate() {
        for (j, &v) in trainset.v_rule.nodes.iter().enumerate() {
            let (val, dx) = f_fn(x, v);
            fv[(i * nv + j, 0)] = val;
            fd[(i * nv + j, 0)] = dx;
        }
    }
    let f_val = tape.constant(fv);
    let f_dx = tape.constant(fd);
    let term = interior_term(&mut tape, &ctx, f_val, f_dx, problem.epsilon);
    let mut terms = vec![("pde_residual".to_string(), tape.scalar(term))];
    for face in &trainset.faces {
        let batch = BoundaryBatch::build_1d(problem, face);
        let n = batch.len();
        let mut fv = Array2::zeros((n, 1));
        for (r, &v) in batch.rows_vel.iter().enumerate() {
            fv[(r, 0)] = f_fn(face.fixed, v).0;
        }
        let fv = tape.constant(fv);
        let term = boundary_term(&mut tape, fv, &batch);
        terms.push((
            format!("boundary_{}", face.face.label()),
            tape.scalar(term),
        ));
    }
    LossBreakdown::from_terms(terms)
}
