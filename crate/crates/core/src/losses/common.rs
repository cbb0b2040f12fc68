//! Shared pieces of the loss assemblies: named breakdowns, interior tape
//! contexts, boundary batches, and frozen boundary-layer corrector samples.

use crate::error::Result;
use crate::halfspace::{GammaCorrector1d, GammaCorrector2d};
use crate::problem::{BoundaryFace, ProblemSpec, TrainingSet};
use crate::quadrature::QuadratureRule;
use crate::scalar::Scalar;
use crate::tape::{NodeId, Tape};
use ndarray::Array2;
use std::sync::Arc;

/// Total plus named nonnegative terms; the total is their exact sum.
#[derive(Debug, Clone)]
pub struct LossBreakdown<T> {
    pub total: T,
    pub terms: Vec<(String, T)>,
}

impl<T: Scalar> LossBreakdown<T> {
    pub fn from_terms(terms: Vec<(String, T)>) -> Self {
        let total = terms.iter().fold(T::zero(), |acc, (_, v)| acc + *v);
        Self { total, terms }
    }

    pub fn term(&self, name: &str) -> Option<T> {
        self.terms
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    /// Merge chunk contributions term-by-term (names must align).
    pub fn accumulate(&mut self, other: &LossBreakdown<T>) {
        if self.terms.is_empty() {
            self.terms = other.terms.clone();
        } else {
            debug_assert_eq!(self.terms.len(), other.terms.len());
            for (slot, (name, v)) in self.terms.iter_mut().zip(&other.terms) {
                debug_assert_eq!(&slot.0, name);
                slot.1 += *v;
            }
        }
        self.total += other.total;
    }

    pub fn empty() -> Self {
        Self {
            total: T::zero(),
            terms: Vec::new(),
        }
    }
}

/// Split `0..n_space` into chunks of at most `max_rows / n_vel` spatial
/// nodes. The chunk layout is fixed by the sizes alone, so results do not
/// depend on how work is scheduled.
pub(crate) fn spatial_chunks(n_space: usize, n_vel: usize, max_rows: usize) -> Vec<std::ops::Range<usize>> {
    let per = (max_rows / n_vel.max(1)).max(1);
    let mut out = Vec::new();
    let mut start = 0;
    while start < n_space {
        let end = (start + per).min(n_space);
        out.push(start..end);
        start = end;
    }
    out
}

pub(crate) const MAX_CHUNK_ROWS: usize = 16_384;

/// Interior constants for a chunk of a 1D tensor grid, pushed on a tape.
pub(crate) struct Interior1d<T: Scalar> {
    pub nv: usize,
    /// `(nx, 1)` input for x-only networks.
    pub x_in: NodeId,
    /// `(nx*nv, 2)` input for (x, v) networks.
    pub xv_in: NodeId,
    /// `(nx*nv, 1)` velocity per row.
    pub vcol: NodeId,
    /// Spatial weights `dx_i`.
    pub w_x: Arc<Vec<T>>,
    /// Row weights `dx_i * w_j / |V|`.
    pub w_int: Arc<Vec<T>>,
    /// Velocity-average weights `w_j / |V|`.
    pub vw_norm: Arc<Vec<T>>,
    /// sigma_a at x nodes, `(nx, 1)` constant.
    pub sa_x: NodeId,
    /// sigma_s / sigma_a at rows.
    pub ss_rows: NodeId,
    pub sa_rows: NodeId,
    /// `<G>` at x nodes and `eps (G - <G>)`-ready fluctuation at rows.
    pub gbar_x: NodeId,
    pub gfluc_rows: NodeId,
}

impl<T: Scalar> Interior1d<T> {
    pub fn build(
        tape: &mut Tape<T>,
        problem: &ProblemSpec<T>,
        x_nodes: &[T],
        x_weights: &[T],
        v_rule: &QuadratureRule<T>,
    ) -> Self {
        let nx = x_nodes.len();
        let nv = v_rule.len();
        let measure = v_rule.measure();
        let rows = nx * nv;

        let x_in = tape.constant(Array2::from_shape_vec((nx, 1), x_nodes.to_vec()).unwrap());
        let mut xv = Array2::zeros((rows, 2));
        let mut vcol = Array2::zeros((rows, 1));
        for i in 0..nx {
            for j in 0..nv {
                let r = i * nv + j;
                xv[(r, 0)] = x_nodes[i];
                xv[(r, 1)] = v_rule.nodes[j];
                vcol[(r, 0)] = v_rule.nodes[j];
            }
        }
        let xv_in = tape.constant(xv);
        let vcol = tape.constant(vcol);

        let vw_norm: Arc<Vec<T>> =
            Arc::new(v_rule.weights.iter().map(|&w| w / measure).collect());
        let w_x: Arc<Vec<T>> = Arc::new(x_weights.to_vec());
        let mut w_int = Vec::with_capacity(rows);
        for &wx in x_weights {
            for &wv in vw_norm.iter() {
                w_int.push(wx * wv);
            }
        }
        let w_int = Arc::new(w_int);

        let mut sa_x = Array2::zeros((nx, 1));
        let mut ss_rows = Array2::zeros((rows, 1));
        let mut sa_rows = Array2::zeros((rows, 1));
        let mut gbar_x = Array2::zeros((nx, 1));
        let mut gfluc = Array2::zeros((rows, 1));
        for i in 0..nx {
            let p = [x_nodes[i]];
            let ss = (problem.sigma_s)(&p);
            let sa = (problem.sigma_a)(&p);
            sa_x[(i, 0)] = sa;
            let mut gbar = T::zero();
            for j in 0..nv {
                let g = (problem.source)(&p, v_rule.nodes[j]);
                gbar += vw_norm[j] * g;
                gfluc[(i * nv + j, 0)] = g;
            }
            gbar_x[(i, 0)] = gbar;
            for j in 0..nv {
                let r = i * nv + j;
                ss_rows[(r, 0)] = ss;
                sa_rows[(r, 0)] = sa;
                gfluc[(r, 0)] = gfluc[(r, 0)] - gbar;
            }
        }
        Self {
            nv,
            x_in,
            xv_in,
            vcol,
            w_x,
            w_int,
            vw_norm,
            sa_x: tape.constant(sa_x),
            ss_rows: tape.constant(ss_rows),
            sa_rows: tape.constant(sa_rows),
            gbar_x: tape.constant(gbar_x),
            gfluc_rows: tape.constant(gfluc),
        }
    }
}

/// Interior constants for a chunk of a 2D tensor grid (spatial nodes are the
/// flattened `(x, y)` pairs of the chunk).
pub(crate) struct Interior2d<T: Scalar> {
    pub nv: usize,
    /// `(ns, 2)` spatial input.
    pub s_in: NodeId,
    /// `(ns*nv, 3)` input for (x, y, alpha) networks.
    pub sv_in: NodeId,
    pub cos_col: NodeId,
    pub sin_col: NodeId,
    pub w_s: Arc<Vec<T>>,
    pub w_int: Arc<Vec<T>>,
    pub vw_norm: Arc<Vec<T>>,
    pub sa_s: NodeId,
    pub ss_rows: NodeId,
    pub sa_rows: NodeId,
    pub gbar_s: NodeId,
    pub gfluc_rows: NodeId,
    /// Dense scattering operator on the angular rule (`L f = A f`).
    pub l_matrix: Arc<Array2<T>>,
}

impl<T: Scalar> Interior2d<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        tape: &mut Tape<T>,
        problem: &ProblemSpec<T>,
        points: &[(T, T)],
        point_weights: &[T],
        v_rule: &QuadratureRule<T>,
        l_matrix: Arc<Array2<T>>,
    ) -> Self {
        let ns = points.len();
        let nv = v_rule.len();
        let measure = v_rule.measure();
        let rows = ns * nv;

        let mut s = Array2::zeros((ns, 2));
        for (i, &(x, y)) in points.iter().enumerate() {
            s[(i, 0)] = x;
            s[(i, 1)] = y;
        }
        let s_in = tape.constant(s);
        let mut sv = Array2::zeros((rows, 3));
        let mut cosc = Array2::zeros((rows, 1));
        let mut sinc = Array2::zeros((rows, 1));
        for (i, &(x, y)) in points.iter().enumerate() {
            for j in 0..nv {
                let r = i * nv + j;
                let a = v_rule.nodes[j];
                sv[(r, 0)] = x;
                sv[(r, 1)] = y;
                sv[(r, 2)] = a;
                cosc[(r, 0)] = a.cos();
                sinc[(r, 0)] = a.sin();
            }
        }
        let sv_in = tape.constant(sv);
        let cos_col = tape.constant(cosc);
        let sin_col = tape.constant(sinc);

        let vw_norm: Arc<Vec<T>> =
            Arc::new(v_rule.weights.iter().map(|&w| w / measure).collect());
        let w_s: Arc<Vec<T>> = Arc::new(point_weights.to_vec());
        let mut w_int = Vec::with_capacity(rows);
        for &ws in point_weights {
            for &wv in vw_norm.iter() {
                w_int.push(ws * wv);
            }
        }
        let w_int = Arc::new(w_int);

        let mut sa_s = Array2::zeros((ns, 1));
        let mut ss_rows = Array2::zeros((rows, 1));
        let mut sa_rows = Array2::zeros((rows, 1));
        let mut gbar_s = Array2::zeros((ns, 1));
        let mut gfluc = Array2::zeros((rows, 1));
        for (i, &(x, y)) in points.iter().enumerate() {
            let p = [x, y];
            let ss = (problem.sigma_s)(&p);
            let sa = (problem.sigma_a)(&p);
            sa_s[(i, 0)] = sa;
            let mut gbar = T::zero();
            for j in 0..nv {
                let g = (problem.source)(&p, v_rule.nodes[j]);
                gbar += vw_norm[j] * g;
                gfluc[(i * nv + j, 0)] = g;
            }
            gbar_s[(i, 0)] = gbar;
            for j in 0..nv {
                let r = i * nv + j;
                ss_rows[(r, 0)] = ss;
                sa_rows[(r, 0)] = sa;
                gfluc[(r, 0)] = gfluc[(r, 0)] - gbar;
            }
        }
        Self {
            nv,
            s_in,
            sv_in,
            cos_col,
            sin_col,
            w_s,
            w_int,
            vw_norm,
            sa_s: tape.constant(sa_s),
            ss_rows: tape.constant(ss_rows),
            sa_rows: tape.constant(sa_rows),
            gbar_s: tape.constant(gbar_s),
            gfluc_rows: tape.constant(gfluc),
            l_matrix,
        }
    }
}

/// Boundary batch for one face: the `(point, velocity)` rows, inflow data
/// and the summation weights `B_w / N_b` (times the tangential weight in 2D,
/// normalized by the face length).
pub(crate) struct BoundaryBatch<T> {
    pub rows_space: Vec<Vec<T>>,
    pub rows_vel: Vec<T>,
    pub phi: Vec<T>,
    pub weights: Arc<Vec<T>>,
}

impl<T: Scalar> BoundaryBatch<T> {
    pub fn build_1d(problem: &ProblemSpec<T>, face: &BoundaryFace<T>) -> Self {
        let nb = face.v_samples.len();
        let w = face.b_weight / T::of_usize(nb);
        let mut rows_space = Vec::with_capacity(nb);
        let mut rows_vel = Vec::with_capacity(nb);
        let mut phi = Vec::with_capacity(nb);
        for &v in &face.v_samples {
            rows_space.push(vec![face.fixed]);
            rows_vel.push(v);
            phi.push((problem.inflow)(face.face, &[], v));
        }
        Self {
            rows_space,
            rows_vel,
            phi,
            weights: Arc::new(vec![w; nb]),
        }
    }

    pub fn build_2d(problem: &ProblemSpec<T>, face: &BoundaryFace<T>) -> Self {
        let spatial = face.spatial.as_ref().expect("2D face has a tangential rule");
        let nv = face.v_samples.len();
        let mut rows_space = Vec::new();
        let mut rows_vel = Vec::new();
        let mut phi = Vec::new();
        let mut weights = Vec::new();
        let face_len = spatial.measure();
        for (si, &s) in spatial.nodes.iter().enumerate() {
            let point = match face.face {
                crate::problem::Face::XLow | crate::problem::Face::XHigh => vec![face.fixed, s],
                _ => vec![s, face.fixed],
            };
            let ws = spatial.weights[si] / face_len; // normalized tangential weight
            for &a in &face.v_samples {
                rows_space.push(point.clone());
                rows_vel.push(a);
                phi.push((problem.inflow)(face.face, &[s], a));
                weights.push(face.b_weight * ws / T::of_usize(nv));
            }
        }
        Self {
            rows_space,
            rows_vel,
            phi,
            weights: Arc::new(weights),
        }
    }

    pub fn len(&self) -> usize {
        self.rows_vel.len()
    }

    /// Full `(space..., v)` input matrix for a kinetic network.
    pub fn kinetic_input(&self) -> Array2<T> {
        let n = self.len();
        let d = self.rows_space[0].len() + 1;
        let mut m = Array2::zeros((n, d));
        for (r, (space, &v)) in self.rows_space.iter().zip(&self.rows_vel).enumerate() {
            for (c, &s) in space.iter().enumerate() {
                m[(r, c)] = s;
            }
            m[(r, d - 1)] = v;
        }
        m
    }
}

/// Boundary-layer corrector sampled on a 1D training set (frozen constants).
#[derive(Debug, Clone)]
pub struct GammaSamples1d<T> {
    /// Gamma at interior rows, x-major.
    pub rows: Vec<T>,
    /// `<Gamma>` at the interior x nodes.
    pub avg_x: Vec<T>,
    /// Gamma at each face's boundary samples.
    pub boundary: Vec<Vec<T>>,
}

impl<T: Scalar> GammaSamples1d<T> {
    pub fn zero(trainset: &TrainingSet<T>) -> Self {
        Self {
            rows: vec![T::zero(); trainset.x_rule.len() * trainset.v_rule.len()],
            avg_x: vec![T::zero(); trainset.x_rule.len()],
            boundary: trainset
                .faces
                .iter()
                .map(|f| vec![T::zero(); f.v_samples.len()])
                .collect(),
        }
    }

    pub fn from_corrector(corrector: &GammaCorrector1d<T>, trainset: &TrainingSet<T>) -> Result<Self> {
        let nx = trainset.x_rule.len();
        let nv = trainset.v_rule.len();
        let measure = trainset.v_rule.measure();
        let mut rows = vec![T::zero(); nx * nv];
        let mut avg_x = vec![T::zero(); nx];
        for i in 0..nx {
            let x = trainset.x_rule.nodes[i];
            let mut acc = T::zero();
            for j in 0..nv {
                let g = corrector.eval(x, trainset.v_rule.nodes[j])?;
                rows[i * nv + j] = g;
                acc += trainset.v_rule.weights[j] * g;
            }
            avg_x[i] = acc / measure;
        }
        let mut boundary = Vec::new();
        for face in &trainset.faces {
            let mut vals = Vec::with_capacity(face.v_samples.len());
            for &v in &face.v_samples {
                vals.push(corrector.eval(face.fixed, v)?);
            }
            boundary.push(vals);
        }
        Ok(Self {
            rows,
            avg_x,
            boundary,
        })
    }
}

/// Boundary-layer corrector sampled on a 2D training set.
#[derive(Debug, Clone)]
pub struct GammaSamples2d<T> {
    /// Gamma at interior rows, (x, y)-major then angle.
    pub rows: Vec<T>,
    /// `d Gamma / dy` at interior rows.
    pub dy_rows: Vec<T>,
    /// `<Gamma>` at the spatial nodes.
    pub avg_s: Vec<T>,
    /// `<sin a * dGamma/dy>` at the spatial nodes.
    pub avg_sin_dy: Vec<T>,
    /// Gamma at each face's boundary rows (aligned with `BoundaryBatch`).
    pub boundary: Vec<Vec<T>>,
}

impl<T: Scalar> GammaSamples2d<T> {
    pub fn from_corrector(
        corrector: &GammaCorrector2d<T>,
        problem: &ProblemSpec<T>,
        trainset: &TrainingSet<T>,
    ) -> Result<Self> {
        let y_rule = trainset.y_rule.as_ref().expect("2D training set");
        let nx = trainset.x_rule.len();
        let ny = y_rule.len();
        let nv = trainset.v_rule.len();
        let measure = trainset.v_rule.measure();
        let ns = nx * ny;
        let mut rows = vec![T::zero(); ns * nv];
        let mut dy_rows = vec![T::zero(); ns * nv];
        let mut avg_s = vec![T::zero(); ns];
        let mut avg_sin_dy = vec![T::zero(); ns];
        for ix in 0..nx {
            for iy in 0..ny {
                let s = ix * ny + iy;
                let x = trainset.x_rule.nodes[ix];
                let y = y_rule.nodes[iy];
                let mut acc = T::zero();
                let mut acc_sin = T::zero();
                for j in 0..nv {
                    let a = trainset.v_rule.nodes[j];
                    let g = corrector.eval(x, y, a)?;
                    let gdy = corrector.eval_dy(x, y, a)?;
                    rows[s * nv + j] = g;
                    dy_rows[s * nv + j] = gdy;
                    acc += trainset.v_rule.weights[j] * g;
                    acc_sin += trainset.v_rule.weights[j] * a.sin() * gdy;
                }
                avg_s[s] = acc / measure;
                avg_sin_dy[s] = acc_sin / measure;
            }
        }
        let mut boundary = Vec::new();
        for face in &trainset.faces {
            let batch = BoundaryBatch::build_2d(problem, face);
            let mut vals = Vec::with_capacity(batch.len());
            for (space, &a) in batch.rows_space.iter().zip(&batch.rows_vel) {
                vals.push(corrector.eval(space[0], space[1], a)?);
            }
            boundary.push(vals);
        }
        Ok(Self {
            rows,
            dy_rows,
            avg_s,
            avg_sin_dy,
            boundary,
        })
    }
}
