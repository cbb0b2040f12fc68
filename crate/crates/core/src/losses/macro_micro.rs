//! Macro-micro decomposition losses, with and without a boundary-layer
//! corrector.
//!
//! The decomposition writes `f = rho(x) + eps g(x, v)` with `<g> = 0`; with
//! a corrector it writes `f = rho~ + eps g + Gamma`. Residual terms:
//!
//! * macro: `<v . grad g> + sigma_a (rho [+ <Gamma>]) - <G>`
//! * mean constraint (optional): `<g>`
//! * micro: `v . grad(rho + eps g) - eps <v . grad g> - sigma_s L g
//!   + eps^2 sigma_a g + eps sigma_a (Gamma - <Gamma>) - eps (G - <G>)`,
//!   plus in 2D the corrector transport `sin a dGamma/dy - <sin a dGamma/dy>`
//! * boundary: `rho + eps g [+ Gamma] - phi` per face.
//!
//! With the corrector off, every term reduces exactly to the plain
//! macro-micro loss. The micro form keeps the averaged-transport terms on
//! the left (substituting the macro relation recovers the fully reduced
//! system), so scalings stay uniform in eps and exact solutions annihilate
//! all terms.

use super::common::{
    spatial_chunks, BoundaryBatch, GammaSamples1d, GammaSamples2d, Interior1d, Interior2d,
    LossBreakdown, MAX_CHUNK_ROWS,
};
use crate::mlp::{forward_on_tape, gather_grads, push_net, MlpSpec, ParamVector};
use crate::optim::Objective;
use crate::problem::{ProblemSpec, TrainingSet};
use crate::scalar::Scalar;
use crate::scattering::DiscreteScattering;
use crate::tape::{NodeId, Tape};
use ndarray::Array2;
use std::sync::Arc;

/// Corrector constants restricted to one chunk.
struct GammaChunk<'a, T> {
    rows: &'a [T],
    avg: &'a [T],
    dy_rows: Option<&'a [T]>,
    avg_sin_dy: Option<&'a [T]>,
}

/// Interior macro/mean/micro term nodes for a 1D chunk.
#[allow(clippy::too_many_arguments)]
fn interior_terms_1d<T: Scalar>(
    tape: &mut Tape<T>,
    ctx: &Interior1d<T>,
    rho: (NodeId, NodeId),
    g: (NodeId, NodeId),
    eps: T,
    mean_penalty: bool,
    gamma: Option<GammaChunk<'_, T>>,
) -> Vec<(String, NodeId)> {
    let (rho_val, rho_dx) = rho;
    let (g_val, g_dx) = g;
    let nv = ctx.nv;
    let mut terms = Vec::new();

    let vg = tape.mul(ctx.vcol, g_dx);
    let avg_vg = tape.block_avg(vg, nv, ctx.vw_norm.clone());
    let sa_rho = tape.mul(ctx.sa_x, rho_val);
    let mut macro_res = tape.add(avg_vg, sa_rho);
    if let Some(gm) = &gamma {
        // + sigma_a <Gamma>
        let sa_gavg: Vec<T> = ctx_sa_values(tape, ctx.sa_x)
            .iter()
            .zip(gm.avg)
            .map(|(&sa, &ga)| sa * ga)
            .collect();
        let c = tape.constant(Array2::from_shape_vec((gm.avg.len(), 1), sa_gavg).unwrap());
        macro_res = tape.add(macro_res, c);
    }
    let macro_res = tape.sub(macro_res, ctx.gbar_x);
    terms.push((
        "macro_residual".to_string(),
        tape.sum_sq_weighted(macro_res, ctx.w_x.clone()),
    ));

    if mean_penalty {
        let avg_g = tape.block_avg(g_val, nv, ctx.vw_norm.clone());
        terms.push((
            "mean_constraint".to_string(),
            tape.sum_sq_weighted(avg_g, ctx.w_x.clone()),
        ));
    }

    let rho_dx_rows = tape.block_repeat(rho_dx, nv);
    let grad_f = tape.add_scaled(rho_dx_rows, eps, g_dx);
    let vgrad = tape.mul(ctx.vcol, grad_f);
    let avg_rows = tape.block_repeat(avg_vg, nv);
    let r1 = tape.add_scaled(vgrad, -eps, avg_rows);
    // isotropic L g = <g> - g (1D problems are isotropic)
    let g_mean = tape.block_avg(g_val, nv, ctx.vw_norm.clone());
    let g_mean_rows = tape.block_repeat(g_mean, nv);
    let lg = tape.sub(g_mean_rows, g_val);
    let ss_lg = tape.mul(ctx.ss_rows, lg);
    let r2 = tape.sub(r1, ss_lg);
    let sa_g = tape.mul(ctx.sa_rows, g_val);
    let r3 = tape.add_scaled(r2, eps * eps, sa_g);
    let mut micro = tape.add_scaled(r3, -eps, ctx.gfluc_rows);
    if let Some(gm) = &gamma {
        // + eps sigma_a (Gamma - <Gamma>)
        let nx = gm.avg.len();
        let sa = ctx_sa_values(tape, ctx.sa_x);
        let mut fluc = vec![T::zero(); nx * nv];
        for i in 0..nx {
            for j in 0..nv {
                fluc[i * nv + j] = sa[i] * (gm.rows[i * nv + j] - gm.avg[i]);
            }
        }
        let c = tape.constant(Array2::from_shape_vec((nx * nv, 1), fluc).unwrap());
        micro = tape.add_scaled(micro, eps, c);
    }
    terms.push((
        "micro_residual".to_string(),
        tape.sum_sq_weighted(micro, ctx.w_int.clone()),
    ));
    terms
}

fn ctx_sa_values<T: Scalar>(tape: &Tape<T>, sa_x: NodeId) -> Vec<T> {
    tape.value(sa_x).iter().copied().collect()
}

/// Interior terms for a 2D chunk.
#[allow(clippy::too_many_arguments)]
fn interior_terms_2d<T: Scalar>(
    tape: &mut Tape<T>,
    ctx: &Interior2d<T>,
    rho: (NodeId, NodeId, NodeId),
    g: (NodeId, NodeId, NodeId),
    eps: T,
    mean_penalty: bool,
    gamma: Option<GammaChunk<'_, T>>,
) -> Vec<(String, NodeId)> {
    let (rho_val, rho_dx, rho_dy) = rho;
    let (g_val, g_dx, g_dy) = g;
    let nv = ctx.nv;
    let mut terms = Vec::new();

    let vgx = tape.mul(ctx.cos_col, g_dx);
    let vgy = tape.mul(ctx.sin_col, g_dy);
    let vg = tape.add(vgx, vgy);
    let avg_vg = tape.block_avg(vg, nv, ctx.vw_norm.clone());
    let sa_rho = tape.mul(ctx.sa_s, rho_val);
    let mut macro_res = tape.add(avg_vg, sa_rho);
    if let Some(gm) = &gamma {
        let sa = ctx_sa_values(tape, ctx.sa_s);
        let extra: Vec<T> = sa
            .iter()
            .zip(gm.avg)
            .zip(gm.avg_sin_dy.expect("2D corrector has dy averages"))
            .map(|((&sa, &ga), &sdy)| sa * ga + sdy / eps)
            .collect();
        let c = tape.constant(Array2::from_shape_vec((extra.len(), 1), extra).unwrap());
        macro_res = tape.add(macro_res, c);
    }
    let macro_res = tape.sub(macro_res, ctx.gbar_s);
    terms.push((
        "macro_residual".to_string(),
        tape.sum_sq_weighted(macro_res, ctx.w_s.clone()),
    ));

    if mean_penalty {
        let avg_g = tape.block_avg(g_val, nv, ctx.vw_norm.clone());
        terms.push((
            "mean_constraint".to_string(),
            tape.sum_sq_weighted(avg_g, ctx.w_s.clone()),
        ));
    }

    let rho_dx_rows = tape.block_repeat(rho_dx, nv);
    let rho_dy_rows = tape.block_repeat(rho_dy, nv);
    let gfx = tape.add_scaled(rho_dx_rows, eps, g_dx);
    let gfy = tape.add_scaled(rho_dy_rows, eps, g_dy);
    let vx = tape.mul(ctx.cos_col, gfx);
    let vy = tape.mul(ctx.sin_col, gfy);
    let vgrad = tape.add(vx, vy);
    let avg_rows = tape.block_repeat(avg_vg, nv);
    let mut r = tape.add_scaled(vgrad, -eps, avg_rows);
    let lg = tape.block_mat(g_val, ctx.l_matrix.clone());
    let ss_lg = tape.mul(ctx.ss_rows, lg);
    r = tape.sub(r, ss_lg);
    let sa_g = tape.mul(ctx.sa_rows, g_val);
    r = tape.add_scaled(r, eps * eps, sa_g);
    r = tape.add_scaled(r, -eps, ctx.gfluc_rows);
    if let Some(gm) = &gamma {
        // corrector transport fluctuation and absorption fluctuation
        let ns = gm.avg.len();
        let sa = ctx_sa_values(tape, ctx.sa_s);
        let dy = gm.dy_rows.expect("2D corrector has dy rows");
        let sdy = gm.avg_sin_dy.expect("2D corrector has dy averages");
        let mut extra = vec![T::zero(); ns * nv];
        for i in 0..ns {
            for j in 0..nv {
                let ridx = i * nv + j;
                let sin_a = tape.value(ctx.sin_col)[(ridx, 0)];
                extra[ridx] = sin_a * dy[ridx] - sdy[i]
                    + eps * sa[i] * (gm.rows[ridx] - gm.avg[i]);
            }
        }
        let c = tape.constant(Array2::from_shape_vec((ns * nv, 1), extra).unwrap());
        r = tape.add(r, c);
    }
    terms.push((
        "micro_residual".to_string(),
        tape.sum_sq_weighted(r, ctx.w_int.clone()),
    ));
    terms
}

/// Boundary misfit `rho + eps g [+ Gamma] - phi` as a weighted sum of
/// squares.
fn boundary_term<T: Scalar>(
    tape: &mut Tape<T>,
    rho_vals: NodeId,
    g_vals: NodeId,
    gamma: Option<&[T]>,
    batch: &BoundaryBatch<T>,
    eps: T,
) -> NodeId {
    let mut r = tape.add_scaled(rho_vals, eps, g_vals);
    if let Some(gv) = gamma {
        let c = tape.constant(Array2::from_shape_vec((gv.len(), 1), gv.to_vec()).unwrap());
        r = tape.add(r, c);
    }
    let phi = tape.constant(
        Array2::from_shape_vec((batch.phi.len(), 1), batch.phi.clone()).unwrap(),
    );
    let r = tape.sub(r, phi);
    tape.sum_sq_weighted(r, batch.weights.clone())
}

/// Trainable macro-micro loss on a 1D problem, optionally with a frozen
/// boundary-layer corrector. Parameter layout: `[rho | g]`.
pub struct MacroMicroLoss1d<'a, T: Scalar> {
    pub problem: &'a ProblemSpec<T>,
    pub trainset: &'a TrainingSet<T>,
    pub rho_spec: MlpSpec<T>,
    pub g_spec: MlpSpec<T>,
    pub mean_penalty: bool,
    pub gamma: Option<&'a GammaSamples1d<T>>,
}

impl<'a, T: Scalar> MacroMicroLoss1d<'a, T> {
    pub fn param_count(&self) -> usize {
        self.rho_spec.param_count() + self.g_spec.param_count()
    }

    pub fn split_params<'t>(&self, theta: &'t [T]) -> (&'t [T], &'t [T]) {
        theta.split_at(self.rho_spec.param_count())
    }

    pub fn eval(&self, theta: &[T], want_grad: bool) -> (LossBreakdown<T>, Vec<T>) {
        let (rho_theta, g_theta) = self.split_params(theta);
        let rho_params = ParamVector {
            data: rho_theta.to_vec(),
        };
        let g_params = ParamVector {
            data: g_theta.to_vec(),
        };
        let nx = self.trainset.x_rule.len();
        let nv = self.trainset.v_rule.len();
        let eps = self.problem.epsilon;
        let mut breakdown = LossBreakdown::<T>::empty();
        let mut grad = vec![T::zero(); theta.len()];
        let nrho = self.rho_spec.param_count();

        for chunk in spatial_chunks(nx, nv, MAX_CHUNK_ROWS) {
            let xs = &self.trainset.x_rule.nodes[chunk.clone()];
            let xw = &self.trainset.x_rule.weights[chunk.clone()];
            let mut tape = Tape::new();
            let ctx = Interior1d::build(&mut tape, self.problem, xs, xw, &self.trainset.v_rule);
            let rho_net = push_net(&mut tape, &self.rho_spec, &rho_params);
            let g_net = push_net(&mut tape, &self.g_spec, &g_params);
            let rho = forward_on_tape(&mut tape, &self.rho_spec, &rho_net, ctx.x_in, &[0], 1);
            let g = forward_on_tape(&mut tape, &self.g_spec, &g_net, ctx.xv_in, &[0], 1);
            let gm = self.gamma.map(|gs| GammaChunk {
                rows: &gs.rows[chunk.start * nv..chunk.end * nv],
                avg: &gs.avg_x[chunk.clone()],
                dy_rows: None,
                avg_sin_dy: None,
            });
            let terms = interior_terms_1d(
                &mut tape,
                &ctx,
                (rho.val, rho.d1[0]),
                (g.val, g.d1[0]),
                eps,
                self.mean_penalty,
                gm,
            );
            accumulate_chunk(
                &mut tape,
                terms,
                &mut breakdown,
                want_grad.then_some((&mut grad, nrho)),
                &self.rho_spec,
                &rho_net,
                &self.g_spec,
                &g_net,
            );
        }

        for (fi, face) in self.trainset.faces.iter().enumerate() {
            let batch = BoundaryBatch::build_1d(self.problem, face);
            let mut tape = Tape::new();
            let rho_net = push_net(&mut tape, &self.rho_spec, &rho_params);
            let g_net = push_net(&mut tape, &self.g_spec, &g_params);
            let x_face = tape.constant(Array2::from_shape_vec((1, 1), vec![face.fixed]).unwrap());
            let rho_head = forward_on_tape(&mut tape, &self.rho_spec, &rho_net, x_face, &[], 0);
            let rho_rows = tape.block_repeat(rho_head.val, batch.len());
            let kin = batch.kinetic_input();
            let kin_id = tape.constant(kin);
            let g_head = forward_on_tape(&mut tape, &self.g_spec, &g_net, kin_id, &[], 0);
            let gamma_vals = self.gamma.map(|gs| gs.boundary[fi].as_slice());
            let term = boundary_term(&mut tape, rho_rows, g_head.val, gamma_vals, &batch, eps);
            accumulate_chunk(
                &mut tape,
                vec![(format!("boundary_{}", face.face.label()), term)],
                &mut breakdown,
                want_grad.then_some((&mut grad, nrho)),
                &self.rho_spec,
                &rho_net,
                &self.g_spec,
                &g_net,
            );
        }
        (breakdown, grad)
    }
}

/// Sum term nodes into the breakdown and, when requested, add this tape's
/// parameter gradients into the flat gradient (rho block then g block).
#[allow(clippy::too_many_arguments)]
fn accumulate_chunk<T: Scalar>(
    tape: &mut Tape<T>,
    terms: Vec<(String, NodeId)>,
    breakdown: &mut LossBreakdown<T>,
    grad: Option<(&mut Vec<T>, usize)>,
    rho_spec: &MlpSpec<T>,
    rho_net: &crate::mlp::TapeNet,
    g_spec: &MlpSpec<T>,
    g_net: &crate::mlp::TapeNet,
) {
    let mut named = Vec::with_capacity(terms.len());
    let mut total: Option<NodeId> = None;
    for (name, id) in terms {
        named.push((name, tape.scalar(id)));
        total = Some(match total {
            None => id,
            Some(t) => tape.add(t, id),
        });
    }
    let chunk_bd = LossBreakdown::from_terms(named);
    merge_terms(breakdown, chunk_bd);
    if let (Some((grad, nrho)), Some(total)) = (grad, total) {
        let grads = tape.backward(total).expect("scalar loss root");
        let g_rho = gather_grads(&grads, rho_spec, rho_net);
        let g_g = gather_grads(&grads, g_spec, g_net);
        for (slot, v) in grad[..nrho].iter_mut().zip(&g_rho) {
            *slot += *v;
        }
        for (slot, v) in grad[nrho..].iter_mut().zip(&g_g) {
            *slot += *v;
        }
    }
}

/// Merge chunk terms by name (terms may repeat across chunks).
fn merge_terms<T: Scalar>(into: &mut LossBreakdown<T>, from: LossBreakdown<T>) {
    for (name, v) in from.terms {
        match into.terms.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 += v,
            None => into.terms.push((name, v)),
        }
        into.total += v;
    }
}

impl<'a, T: Scalar> Objective<T> for MacroMicroLoss1d<'a, T> {
    fn value_grad(&self, theta: &[T]) -> (T, Vec<T>) {
        let (bd, grad) = self.eval(theta, true);
        (bd.total, grad)
    }

    fn value(&self, theta: &[T]) -> T {
        self.eval(theta, false).0.total
    }
}

/// One-shot evaluation for trained networks (plain macro-micro).
pub fn macro_micro_loss<T: Scalar>(
    problem: &ProblemSpec<T>,
    trainset: &TrainingSet<T>,
    rho: (&MlpSpec<T>, &ParamVector<T>),
    g: (&MlpSpec<T>, &ParamVector<T>),
    mean_penalty: bool,
) -> LossBreakdown<T> {
    let loss = MacroMicroLoss1d {
        problem,
        trainset,
        rho_spec: rho.0.clone(),
        g_spec: g.0.clone(),
        mean_penalty,
        gamma: None,
    };
    let mut theta = rho.1.data.clone();
    theta.extend_from_slice(&g.1.data);
    loss.eval(&theta, false).0
}

/// Boundary-layer-corrected loss for trained networks.
pub fn bl_corrected_loss_1d<T: Scalar>(
    problem: &ProblemSpec<T>,
    trainset: &TrainingSet<T>,
    rho: (&MlpSpec<T>, &ParamVector<T>),
    g: (&MlpSpec<T>, &ParamVector<T>),
    gamma: &GammaSamples1d<T>,
) -> LossBreakdown<T> {
    let loss = MacroMicroLoss1d {
        problem,
        trainset,
        rho_spec: rho.0.clone(),
        g_spec: g.0.clone(),
        mean_penalty: false,
        gamma: Some(gamma),
    };
    let mut theta = rho.1.data.clone();
    theta.extend_from_slice(&g.1.data);
    loss.eval(&theta, false).0
}

/// Closed-form candidate evaluation: `rho_fn(x) -> (value, d/dx)`,
/// `g_fn(x, v) -> (value, d/dx)`.
pub fn macro_micro_loss_fields<T: Scalar>(
    problem: &ProblemSpec<T>,
    trainset: &TrainingSet<T>,
    rho_fn: &dyn Fn(T) -> (T, T),
    g_fn: &dyn Fn(T, T) -> (T, T),
    mean_penalty: bool,
    gamma: Option<&GammaSamples1d<T>>,
) -> LossBreakdown<T> {
    let nx = trainset.x_rule.len();
    let nv = trainset.v_rule.len();
    let eps = problem.epsilon;
    let mut tape = Tape::new();
    let ctx = Interior1d::build(
        &mut tape,
        problem,
        &trainset.x_rule.nodes,
        &trainset.x_rule.weights,
        &trainset.v_rule,
    );
    let mut rho_v = Array2::zeros((nx, 1));
    let mut rho_d = Array2::zeros((nx, 1));
    for (i, &x) in trainset.x_rule.nodes.iter().enumerate() {
        let (v, d) = rho_fn(x);
        rho_v[(i, 0)] = v;
        rho_d[(i, 0)] = d;
    }
    let mut g_v = Array2::zeros((nx * nv, 1));
    let mut g_d = Array2::zeros((nx * nv, 1));
    for (i, &x) in trainset.x_rule.nodes.iter().enumerate() {
        for (j, &v) in trainset.v_rule.nodes.iter().enumerate() {
            let (val, d) = g_fn(x, v);
            g_v[(i * nv + j, 0)] = val;
            g_d[(i * nv + j, 0)] = d;
        }
    }
    let rho_val = tape.constant(rho_v);
    let rho_dx = tape.constant(rho_d);
    let g_val = tape.constant(g_v);
    let g_dx = tape.constant(g_d);
    let gm = gamma.map(|gs| GammaChunk {
        rows: &gs.rows,
        avg: &gs.avg_x,
        dy_rows: None,
        avg_sin_dy: None,
    });
    let mut named: Vec<(String, T)> = interior_terms_1d(
        &mut tape,
        &ctx,
        (rho_val, rho_dx),
        (g_val, g_dx),
        eps,
        mean_penalty,
        gm,
    )
    .into_iter()
    .map(|(n, id)| (n, tape.scalar(id)))
    .collect();

    for (fi, face) in trainset.faces.iter().enumerate() {
        let batch = BoundaryBatch::build_1d(problem, face);
        let n = batch.len();
        let mut rv = Array2::zeros((n, 1));
        let mut gv = Array2::zeros((n, 1));
        for (r, &v) in batch.rows_vel.iter().enumerate() {
            rv[(r, 0)] = rho_fn(face.fixed).0;
            gv[(r, 0)] = g_fn(face.fixed, v).0;
        }
        let rv = tape.constant(rv);
        let gv = tape.constant(gv);
        let gamma_vals = gamma.map(|gs| gs.boundary[fi].as_slice());
        let term = boundary_term(&mut tape, rv, gv, gamma_vals, &batch, eps);
        named.push((
            format!("boundary_{}", face.face.label()),
            tape.scalar(term),
        ));
    }
    LossBreakdown::from_terms(named)
}

/// Trainable macro-micro loss on a 2D problem, optionally corrected.
pub struct MacroMicroLoss2d<'a, T: Scalar> {
    pub problem: &'a ProblemSpec<T>,
    pub trainset: &'a TrainingSet<T>,
    pub rho_spec: MlpSpec<T>,
    pub g_spec: MlpSpec<T>,
    pub mean_penalty: bool,
    pub gamma: Option<&'a GammaSamples2d<T>>,
}

impl<'a, T: Scalar> MacroMicroLoss2d<'a, T> {
    pub fn param_count(&self) -> usize {
        self.rho_spec.param_count() + self.g_spec.param_count()
    }

    fn spatial_points(&self) -> (Vec<(T, T)>, Vec<T>) {
        let y_rule = self.trainset.y_rule.as_ref().expect("2D training set");
        let mut pts = Vec::new();
        let mut w = Vec::new();
        for (ix, &x) in self.trainset.x_rule.nodes.iter().enumerate() {
            for (iy, &y) in y_rule.nodes.iter().enumerate() {
                pts.push((x, y));
                w.push(self.trainset.x_rule.weights[ix] * y_rule.weights[iy]);
            }
        }
        (pts, w)
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
        let eps = self.problem.epsilon;
        let nv = self.trainset.v_rule.len();
        let (points, weights) = self.spatial_points();
        let scat = DiscreteScattering::new(self.problem.kernel, self.trainset.v_rule.clone())
            .expect("validated kernel");
        let l_matrix = Arc::new(scat.operator_matrix());

        let mut breakdown = LossBreakdown::<T>::empty();
        let mut grad = vec![T::zero(); theta.len()];
        for chunk in spatial_chunks(points.len(), nv, MAX_CHUNK_ROWS) {
            let mut tape = Tape::new();
            let ctx = Interior2d::build(
                &mut tape,
                self.problem,
                &points[chunk.clone()],
                &weights[chunk.clone()],
                &self.trainset.v_rule,
                l_matrix.clone(),
            );
            let rho_net = push_net(&mut tape, &self.rho_spec, &rho_params);
            let g_net = push_net(&mut tape, &self.g_spec, &g_params);
            let rho = forward_on_tape(&mut tape, &self.rho_spec, &rho_net, ctx.s_in, &[0, 1], 1);
            let g = forward_on_tape(&mut tape, &self.g_spec, &g_net, ctx.sv_in, &[0, 1], 1);
            let gm = self.gamma.map(|gs| GammaChunk {
                rows: &gs.rows[chunk.start * nv..chunk.end * nv],
                avg: &gs.avg_s[chunk.clone()],
                dy_rows: Some(&gs.dy_rows[chunk.start * nv..chunk.end * nv]),
                avg_sin_dy: Some(&gs.avg_sin_dy[chunk.clone()]),
            });
            let terms = interior_terms_2d(
                &mut tape,
                &ctx,
                (rho.val, rho.d1[0], rho.d1[1]),
                (g.val, g.d1[0], g.d1[1]),
                eps,
                self.mean_penalty,
                gm,
            );
            accumulate_chunk(
                &mut tape,
                terms,
                &mut breakdown,
                want_grad.then_some((&mut grad, nrho)),
                &self.rho_spec,
                &rho_net,
                &self.g_spec,
                &g_net,
            );
        }

        for (fi, face) in self.trainset.faces.iter().enumerate() {
            let batch = BoundaryBatch::build_2d(self.problem, face);
            let nvb = face.v_samples.len();
            let mut tape = Tape::new();
            let rho_net = push_net(&mut tape, &self.rho_spec, &rho_params);
            let g_net = push_net(&mut tape, &self.g_spec, &g_params);
            // unique spatial points, then repeated per sampled angle
            let spatial = face.spatial.as_ref().unwrap();
            let mut sp = Array2::zeros((spatial.len(), 2));
            for (i, &s) in spatial.nodes.iter().enumerate() {
                let p = match face.face {
                    crate::problem::Face::XLow | crate::problem::Face::XHigh => (face.fixed, s),
                    _ => (s, face.fixed),
                };
                sp[(i, 0)] = p.0;
                sp[(i, 1)] = p.1;
            }
            let sp = tape.constant(sp);
            let rho_head = forward_on_tape(&mut tape, &self.rho_spec, &rho_net, sp, &[], 0);
            let rho_rows = tape.block_repeat(rho_head.val, nvb);
            let kin = tape.constant(batch.kinetic_input());
            let g_head = forward_on_tape(&mut tape, &self.g_spec, &g_net, kin, &[], 0);
            let gamma_vals = self.gamma.map(|gs| gs.boundary[fi].as_slice());
            let term = boundary_term(&mut tape, rho_rows, g_head.val, gamma_vals, &batch, eps);
            accumulate_chunk(
                &mut tape,
                vec![(format!("boundary_{}", face.face.label()), term)],
                &mut breakdown,
                want_grad.then_some((&mut grad, nrho)),
                &self.rho_spec,
                &rho_net,
                &self.g_spec,
                &g_net,
            );
        }
        (breakdown, grad)
    }
}

impl<'a, T: Scalar> Objective<T> for MacroMicroLoss2d<'a, T> {
    fn value_grad(&self, theta: &[T]) -> (T, Vec<T>) {
        let (bd, grad) = self.eval(theta, true);
        (bd.total, grad)
    }

    fn value(&self, theta: &[T]) -> T {
        self.eval(theta, false).0.total
    }
}

/// One-shot evaluation for trained networks (2D).
pub fn macro_micro_loss_2d<T: Scalar>(
    problem: &ProblemSpec<T>,
    trainset: &TrainingSet<T>,
    rho: (&MlpSpec<T>, &ParamVector<T>),
    g: (&MlpSpec<T>, &ParamVector<T>),
    mean_penalty: bool,
) -> LossBreakdown<T> {
    let loss = MacroMicroLoss2d {
        problem,
        trainset,
        rho_spec: rho.0.clone(),
        g_spec: g.0.clone(),
        mean_penalty,
        gamma: None,
    };
    let mut theta = rho.1.data.clone();
    theta.extend_from_slice(&g.1.data);
    loss.eval(&theta, false).0
}

/// Corrected 2D loss for trained networks.
pub fn bl_corrected_loss_2d<T: Scalar>(
    problem: &ProblemSpec<T>,
    trainset: &TrainingSet<T>,
    rho: (&MlpSpec<T>, &ParamVector<T>),
    g: (&MlpSpec<T>, &ParamVector<T>),
    gamma: &GammaSamples2d<T>,
) -> LossBreakdown<T> {
    let loss = MacroMicroLoss2d {
        problem,
        trainset,
        rho_spec: rho.0.clone(),
        g_spec: g.0.clone(),
        mean_penalty: false,
        gamma: Some(gamma),
    };
    let mut theta = rho.1.data.clone();
    theta.extend_from_slice(&g.1.data);
    loss.eval(&theta, false).0
}

/// Closed-form candidate evaluation in 2D: `rho_fn(x, y) -> (value, dx, dy)`,
/// `g_fn(x, y, a) -> (value, dx, dy)`.
pub fn macro_micro_loss_fields_2d<T: Scalar>(
    problem: &ProblemSpec<T>,
    trainset: &TrainingSet<T>,
    rho_fn: &dyn Fn(T, T) -> (T, T, T),
    g_fn: &dyn Fn(T, T, T) -> (T, T, T),
    mean_penalty: bool,
    gamma: Option<&GammaSamples2d<T>>,
) -> LossBreakdown<T> {
    let y_rule = trainset.y_rule.as_ref().expect("2D training set");
    let nv = trainset.v_rule.len();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (ix, &x) in trainset.x_rule.nodes.iter().enumerate() {
        for (iy, &y) in y_rule.nodes.iter().enumerate() {
            points.push((x, y));
            weights.push(trainset.x_rule.weights[ix] * y_rule.weights[iy]);
        }
    }
    let scat = DiscreteScattering::new(problem.kernel, trainset.v_rule.clone())
        .expect("validated kernel");
    let l_matrix = Arc::new(scat.operator_matrix());
    let mut tape = Tape::new();
    let ctx = Interior2d::build(
        &mut tape,
        problem,
        &points,
        &weights,
        &trainset.v_rule,
        l_matrix,
    );
    let ns = points.len();
    let mut rv = Array2::zeros((ns, 1));
    let mut rdx = Array2::zeros((ns, 1));
    let mut rdy = Array2::zeros((ns, 1));
    for (i, &(x, y)) in points.iter().enumerate() {
        let (v, dx, dy) = rho_fn(x, y);
        rv[(i, 0)] = v;
        rdx[(i, 0)] = dx;
        rdy[(i, 0)] = dy;
    }
    let mut gv = Array2::zeros((ns * nv, 1));
    let mut gdx = Array2::zeros((ns * nv, 1));
    let mut gdy = Array2::zeros((ns * nv, 1));
    for (i, &(x, y)) in points.iter().enumerate() {
        for (j, &a) in trainset.v_rule.nodes.iter().enumerate() {
            let (v, dx, dy) = g_fn(x, y, a);
            gv[(i * nv + j, 0)] = v;
            gdx[(i * nv + j, 0)] = dx;
            gdy[(i * nv + j, 0)] = dy;
        }
    }
    let rho = (
        tape.constant(rv),
        tape.constant(rdx),
        tape.constant(rdy),
    );
    let g = (tape.constant(gv), tape.constant(gdx), tape.constant(gdy));
    let gm = gamma.map(|gs| GammaChunk {
        rows: &gs.rows,
        avg: &gs.avg_s,
        dy_rows: Some(&gs.dy_rows),
        avg_sin_dy: Some(&gs.avg_sin_dy),
    });
    let mut named: Vec<(String, T)> = interior_terms_2d(
        &mut tape,
        &ctx,
        rho,
        g,
        problem.epsilon,
        mean_penalty,
        gm,
    )
    .into_iter()
    .map(|(n, id)| (n, tape.scalar(id)))
    .collect();

    for (fi, face) in trainset.faces.iter().enumerate() {
        let batch = BoundaryBatch::build_2d(problem, face);
        let n = batch.len();
        let mut rv = Array2::zeros((n, 1));
        let mut gv = Array2::zeros((n, 1));
        for (r, (space, &a)) in batch.rows_space.iter().zip(&batch.rows_vel).enumerate() {
            rv[(r, 0)] = rho_fn(space[0], space[1]).0;
            gv[(r, 0)] = g_fn(space[0], space[1], a).0;
        }
        let rv = tape.constant(rv);
        let gv = tape.constant(gv);
        let gamma_vals = gamma.map(|gs| gs.boundary[fi].as_slice());
        let term = boundary_term(&mut tape, rv, gv, gamma_vals, &batch, problem.epsilon);
        named.push((
            format!("boundary_{}", face.face.label()),
            tape.scalar(term),
        ));
    }
    LossBreakdown::from_terms(named)
}
