//! Boundary-value problem descriptions and collocation (training) sets.
//!
//! A [`ProblemSpec`] captures one steady transfer problem
//! `eps v . grad f = sigma_s L f - eps^2 sigma_a f + eps^2 G` with inflow
//! data on `Gamma_-`. Sources may depend on the velocity variable; the loss
//! assembly splits them into angular mean and fluctuation where required.

use crate::error::{invalid, Result};
use crate::quadrature::{gauss_legendre, uniform_rule, QuadratureRule};
use crate::scalar::Scalar;
use crate::scattering::KernelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

/// Coefficient of the spatial point (`x` or `(x, y)`).
pub type CoefFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
/// Source term of spatial point and velocity (`v` in 1D, angle in 2D).
pub type SourceFn<T> = Arc<dyn Fn(&[T], T) -> T + Send + Sync>;
/// Inflow datum of face, boundary point and velocity.
pub type InflowFn<T> = Arc<dyn Fn(Face, &[T], T) -> T + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    XLow,
    XHigh,
    YLow,
    YHigh,
}

impl Face {
    pub fn all(dim: usize) -> &'static [Face] {
        match dim {
            1 => &[Face::XLow, Face::XHigh],
            2 => &[Face::XLow, Face::XHigh, Face::YLow, Face::YHigh],
            _ => panic!("unsupported dimension"),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Face::XLow => "x_low",
            Face::XHigh => "x_high",
            Face::YLow => "y_low",
            Face::YHigh => "y_high",
        }
    }

    /// Whether velocity `v` (1D) points into the domain through this face.
    pub fn is_inflow_1d<T: Scalar>(self, v: T) -> bool {
        match self {
            Face::XLow => v > T::zero(),
            Face::XHigh => v < T::zero(),
            _ => false,
        }
    }

    /// Whether direction `(cos a, sin a)` points into the domain.
    pub fn is_inflow_2d<T: Scalar>(self, alpha: T) -> bool {
        match self {
            Face::XLow => alpha.cos() > T::zero(),
            Face::XHigh => alpha.cos() < T::zero(),
            Face::YLow => alpha.sin() > T::zero(),
            Face::YHigh => alpha.sin() < T::zero(),
        }
    }
}

#[derive(Clone)]
pub struct ProblemSpec<T> {
    pub dim: usize,
    pub epsilon: T,
    pub sigma_s: CoefFn<T>,
    pub sigma_a: CoefFn<T>,
    pub source: SourceFn<T>,
    pub kernel: KernelSpec<T>,
    /// Box bounds per spatial dimension.
    pub domain: Vec<(T, T)>,
    pub inflow: InflowFn<T>,
    /// Per-face boundary loss weights, aligned with [`Face::all`].
    pub boundary_weights: Vec<T>,
}

impl<T: Scalar> ProblemSpec<T> {
    /// Sanity-check coefficient bounds on sampled nodes: sigma_s must be in
    /// `[sigma_min, sigma_max]` with `sigma_min > 0`, sigma_a nonnegative.
    pub fn validate_coefficients(&self, samples: &[Vec<T>]) -> Result<(T, T)> {
        if self.dim == 1 && matches!(self.kernel, KernelSpec::HenyeyGreenstein { .. }) {
            return Err(invalid("1D velocity problems support only the isotropic kernel"));
        }
        self.kernel.validate()?;
        let mut smin = T::infinity();
        let mut smax = T::zero();
        for p in samples {
            let ss = (self.sigma_s)(p);
            let sa = (self.sigma_a)(p);
            if !(ss.is_finite() && sa.is_finite()) {
                return Err(invalid("non-finite coefficient sample"));
            }
            if ss <= T::zero() {
                return Err(invalid("sigma_s must be strictly positive"));
            }
            if sa < T::zero() {
                return Err(invalid("sigma_a must be nonnegative"));
            }
            smin = smin.min(ss);
            smax = smax.max(ss.max(sa));
        }
        Ok((smin, smax))
    }

    /// `eps v d_x f = <f> - f - eps v` on `[0,1] x [-1,1]`, inflow 1 / 0.
    /// Exact solution `f(x, v) = 1 - x`.
    pub fn toy(epsilon: T) -> Self {
        let eps = epsilon;
        Self {
            dim: 1,
            epsilon,
            sigma_s: Arc::new(|_| T::one()),
            sigma_a: Arc::new(|_| T::zero()),
            source: Arc::new(move |_, v| -v / eps),
            kernel: KernelSpec::Isotropic,
            domain: vec![(T::zero(), T::one())],
            inflow: Arc::new(|face, _, _| match face {
                Face::XLow => T::one(),
                _ => T::zero(),
            }),
            boundary_weights: vec![T::one(); 2],
        }
    }

    /// Homogeneous scattering, inflow 1 / 0, no source.
    pub fn homogeneous_1d(epsilon: T) -> Self {
        Self {
            source: Arc::new(|_, _| T::zero()),
            ..Self::toy(epsilon)
        }
    }

    /// Anisotropic inflow `5 sin v` on the left; boundary layer at small eps.
    pub fn boundary_layer_1d(epsilon: T) -> Self {
        Self {
            source: Arc::new(|_, _| T::zero()),
            inflow: Arc::new(|face, _, v| match face {
                Face::XLow => T::of(5.0) * v.sin(),
                _ => T::zero(),
            }),
            ..Self::toy(epsilon)
        }
    }

    /// 2D problem on `[-1,1]^2` with exact solution `f = e^{-x-y}`.
    pub fn analytic_2d(epsilon: T) -> Self {
        let eps = epsilon;
        Self {
            dim: 2,
            epsilon,
            sigma_s: Arc::new(|_| T::one()),
            sigma_a: Arc::new(|_| T::zero()),
            source: Arc::new(move |p, alpha| {
                (-alpha.cos() - alpha.sin()) * (-p[0] - p[1]).exp() / eps
            }),
            kernel: KernelSpec::Isotropic,
            domain: vec![(-T::one(), T::one()), (-T::one(), T::one())],
            inflow: Arc::new(|face, p, _| match face {
                Face::XLow => (T::one() - p[0]).exp(),
                Face::XHigh => (-T::one() - p[0]).exp(),
                Face::YLow => (T::one() - p[0]).exp(),
                Face::YHigh => (-T::one() - p[0]).exp(),
            }),
            boundary_weights: vec![T::one(); 4],
        }
    }

    /// 2D anisotropic scattering with Henyey-Greenstein kernel and inflow
    /// `1 - y^2` on the left face.
    pub fn henyey_greenstein_2d(epsilon: T, h: T) -> Self {
        Self {
            kernel: KernelSpec::HenyeyGreenstein { h },
            source: Arc::new(|_, _| T::zero()),
            inflow: Arc::new(|face, p, _| match face {
                Face::XLow => T::one() - p[0] * p[0],
                _ => T::zero(),
            }),
            ..Self::analytic_2d(epsilon)
        }
    }

    /// 2D isotropic problem with angle-dependent inflow `(1 - y^2) alpha` on
    /// the left face; develops a boundary layer at small eps.
    pub fn boundary_layer_2d(epsilon: T) -> Self {
        Self {
            source: Arc::new(|_, _| T::zero()),
            inflow: Arc::new(|face, p, alpha| match face {
                Face::XLow => (T::one() - p[0] * p[0]) * alpha,
                _ => T::zero(),
            }),
            ..Self::analytic_2d(epsilon)
        }
    }
}

/// One boundary face's collocation data.
#[derive(Debug, Clone)]
pub struct BoundaryFace<T> {
    pub face: Face,
    /// Value of the fixed coordinate on this face.
    pub fixed: T,
    /// Tangential spatial rule (2D only).
    pub spatial: Option<QuadratureRule<T>>,
    /// Velocity samples inside the inflow cone.
    pub v_samples: Vec<T>,
    /// Face weight `B_w`.
    pub b_weight: T,
}

/// Interior tensor grid (uniform space x Gauss velocity) plus per-face
/// inflow-cone samples with weights `1/N_b`.
#[derive(Debug, Clone)]
pub struct TrainingSet<T> {
    pub x_rule: QuadratureRule<T>,
    pub y_rule: Option<QuadratureRule<T>>,
    pub v_rule: QuadratureRule<T>,
    pub faces: Vec<BoundaryFace<T>>,
    pub seed: u64,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn dim(&self) -> usize {
        if self.y_rule.is_some() {
            2
        } else {
            1
        }
    }

    pub fn interior_len(&self) -> usize {
        self.x_rule.len() * self.y_rule.as_ref().map_or(1, |r| r.len()) * self.v_rule.len()
    }

    /// Uniform `n_x` points in x, Gauss `n_v` in velocity, `n_b` random
    /// inflow velocities per face.
    pub fn build_1d(problem: &ProblemSpec<T>, n_x: usize, n_v: usize, n_b: usize, seed: u64) -> Result<Self> {
        if problem.dim != 1 {
            return Err(invalid("build_1d requires a 1D problem"));
        }
        let (x0, x1) = problem.domain[0];
        let x_rule = uniform_rule(n_x, x0, x1, false)?;
        let v_rule = gauss_legendre(n_v, -T::one(), T::one())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut faces = Vec::new();
        for (fi, &face) in Face::all(1).iter().enumerate() {
            let fixed = if face == Face::XLow { x0 } else { x1 };
            let v_samples: Vec<T> = (0..n_b)
                .map(|_| {
                    let u: f64 = rng.random_range(0.0..1.0);
                    let v = T::of(u.max(f64::MIN_POSITIVE));
                    if face == Face::XLow {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            faces.push(BoundaryFace {
                face,
                fixed,
                spatial: None,
                v_samples,
                b_weight: problem.boundary_weights[fi],
            });
        }
        Ok(Self {
            x_rule,
            y_rule: None,
            v_rule,
            faces,
            seed,
        })
    }

    /// Build a 1D set on an explicit (possibly split) x grid with
    /// left-endpoint weights.
    pub fn build_1d_on_nodes(
        problem: &ProblemSpec<T>,
        x_nodes: Vec<T>,
        n_v: usize,
        n_b: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut base = Self::build_1d(problem, 2, n_v, n_b, seed)?;
        if x_nodes.len() < 2 {
            return Err(invalid("need at least two x nodes"));
        }
        let (x0, x1) = problem.domain[0];
        let mut weights = Vec::with_capacity(x_nodes.len());
        for i in 0..x_nodes.len() {
            let next = if i + 1 < x_nodes.len() { x_nodes[i + 1] } else { x1 };
            weights.push(next - x_nodes[i]);
        }
        base.x_rule = QuadratureRule {
            nodes: x_nodes,
            weights,
            lo: x0,
            hi: x1,
            kind: crate::quadrature::RuleKind::UniformOpen,
        };
        Ok(base)
    }

    /// 2D set: uniform `n_x x n_y` interior spatial grid, Gauss `n_v` angles
    /// on `[0, 2 pi]`, and per face a uniform tangential grid of `n_b_space`
    /// points with `n_b_vel` random inflow angles.
    pub fn build_2d(
        problem: &ProblemSpec<T>,
        n_x: usize,
        n_y: usize,
        n_v: usize,
        n_b_space: usize,
        n_b_vel: usize,
        seed: u64,
    ) -> Result<Self> {
        if problem.dim != 2 {
            return Err(invalid("build_2d requires a 2D problem"));
        }
        let (x0, x1) = problem.domain[0];
        let (y0, y1) = problem.domain[1];
        let x_rule = uniform_rule(n_x, x0, x1, false)?;
        let y_rule = uniform_rule(n_y, y0, y1, false)?;
        let v_rule = gauss_legendre(n_v, T::zero(), T::of(2.0 * PI))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut faces = Vec::new();
        for (fi, &face) in Face::all(2).iter().enumerate() {
            let (fixed, spatial) = match face {
                Face::XLow => (x0, uniform_rule(n_b_space, y0, y1, false)?),
                Face::XHigh => (x1, uniform_rule(n_b_space, y0, y1, false)?),
                Face::YLow => (y0, uniform_rule(n_b_space, x0, x1, false)?),
                Face::YHigh => (y1, uniform_rule(n_b_space, x0, x1, false)?),
            };
            let v_samples: Vec<T> = (0..n_b_vel)
                .map(|_| {
                    let u = T::of(rng.random_range(0.0..1.0));
                    sample_inflow_angle(face, u)
                })
                .collect();
            faces.push(BoundaryFace {
                face,
                fixed,
                spatial: Some(spatial),
                v_samples,
                b_weight: problem.boundary_weights[fi],
            });
        }
        Ok(Self {
            x_rule,
            y_rule: Some(y_rule),
            v_rule,
            faces,
            seed,
        })
    }
}

/// Map a uniform draw `u` in `[0, 1)` onto the face's inflow angle cone.
fn sample_inflow_angle<T: Scalar>(face: Face, u: T) -> T {
    let pi = T::PI();
    let half = T::of(0.5);
    match face {
        // cos a > 0: [0, pi/2) from the lower half of u, (3pi/2, 2pi) above.
        Face::XLow => {
            if u < half {
                u * pi
            } else {
                u * pi + pi
            }
        }
        // cos a < 0: (pi/2, 3pi/2).
        Face::XHigh => pi * half + u * pi,
        // sin a > 0: (0, pi).
        Face::YLow => u * pi,
        // sin a < 0: (pi, 2pi).
        Face::YHigh => pi + u * pi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_samples_lie_in_inflow_cone() {
        let p1 = ProblemSpec::<f64>::toy(1e-3);
        let ts = TrainingSet::build_1d(&p1, 16, 8, 40, 3).unwrap();
        for face in &ts.faces {
            for &v in &face.v_samples {
                assert!(face.face.is_inflow_1d(v), "{:?} sample {v}", face.face);
            }
        }
        let p2 = ProblemSpec::<f64>::boundary_layer_2d(1.0);
        let ts = TrainingSet::build_2d(&p2, 8, 8, 8, 6, 30, 3).unwrap();
        for face in &ts.faces {
            for &a in &face.v_samples {
                assert!(face.face.is_inflow_2d(a), "{:?} sample {a}", face.face);
            }
        }
    }

    #[test]
    fn training_set_is_reproducible() {
        let p = ProblemSpec::<f64>::toy(1.0);
        let a = TrainingSet::build_1d(&p, 8, 4, 10, 9).unwrap();
        let b = TrainingSet::build_1d(&p, 8, 4, 10, 9).unwrap();
        assert_eq!(a.faces[0].v_samples, b.faces[0].v_samples);
        assert_eq!(a.faces[1].v_samples, b.faces[1].v_samples);
    }

    #[test]
    fn coefficient_validation() {
        let p = ProblemSpec::<f64>::toy(1.0);
        let samples: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 9.0]).collect();
        let (smin, smax) = p.validate_coefficients(&samples).unwrap();
        assert_eq!(smin, 1.0);
        assert_eq!(smax, 1.0);

        let bad = ProblemSpec::<f64> {
            sigma_s: Arc::new(|p| p[0] - 0.5),
            ..ProblemSpec::toy(1.0)
        };
        assert!(bad.validate_coefficients(&samples).is_err());
    }

    #[test]
    fn hg_rejected_in_1d() {
        let p = ProblemSpec::<f64> {
            kernel: KernelSpec::HenyeyGreenstein { h: 0.5 },
            ..ProblemSpec::toy(1.0)
        };
        let samples = vec![vec![0.5]];
        assert!(p.validate_coefficients(&samples).is_err());
    }
}
