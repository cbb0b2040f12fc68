//! Integration rules for velocity averages, angular integrals and spatial
//! residual sums.
//!
//! The angular-average convention is fixed here once: [`velocity_average`]
//! divides by the interval length (2 for `v` on `[-1,1]`, `2*pi` for an angle),
//! and every loss module uses it instead of re-normalizing.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// How a rule's nodes and weights were generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    GaussLegendre,
    /// Equispaced nodes including `lo`, excluding `hi`; weight `delta` each
    /// (left-endpoint sums, as used for the half-space `z` grid).
    UniformOpen,
    /// Equispaced nodes including both endpoints; trapezoid weights.
    Trapezoid,
}

/// Nodes and positive weights on an interval.
#[derive(Debug, Clone)]
pub struct QuadratureRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    pub lo: T,
    pub hi: T,
    pub kind: RuleKind,
}

impl<T: Scalar> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Interval length `hi - lo`.
    pub fn measure(&self) -> T {
        self.hi - self.lo
    }

    /// `sum_j w_j f(x_j)`.
    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&x, &w)| acc + w * f(x))
    }

    /// `sum_j w_j s_j` over provided samples.
    pub fn integrate_samples(&self, samples: &[T]) -> Result<T> {
        if samples.len() != self.nodes.len() {
            return Err(invalid(format!(
                "sample count {} does not match rule size {}",
                samples.len(),
                self.nodes.len()
            )));
        }
        Ok(samples
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&s, &w)| acc + w * s))
    }
}

/// Gauss-Legendre rule with `n` points mapped affinely to `[lo, hi]`.
///
/// Nodes are computed by Newton iteration on the Legendre polynomial and are
/// exactly symmetric about the interval midpoint.
pub fn gauss_legendre<T: Scalar>(n: usize, lo: T, hi: T) -> Result<QuadratureRule<T>> {
    if n == 0 {
        return Err(invalid("gauss_legendre requires n >= 1"));
    }
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(invalid("gauss_legendre requires finite bounds with lo < hi"));
    }
    let mut ref_nodes = vec![T::zero(); n];
    let mut ref_weights = vec![T::zero(); n];
    let tol = T::of(1e-15).max(T::epsilon() * T::of(4.0));
    let half = n / 2;
    for k in 0..half {
        // Tricomi-style initial guess, then Newton on P_n.
        let theta = T::PI() * (T::of_usize(k) + T::of(0.75)) / (T::of_usize(n) + T::of(0.5));
        let mut x = theta.cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x = x - dx;
            if dx.abs() <= tol {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = T::of(2.0) / ((T::one() - x * x) * dp * dp);
        // Mirror to enforce exact symmetry.
        ref_nodes[k] = -x.abs();
        ref_nodes[n - 1 - k] = x.abs();
        ref_weights[k] = w;
        ref_weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        let (_, dp) = legendre_with_derivative(n, T::zero());
        ref_nodes[half] = T::zero();
        ref_weights[half] = T::of(2.0) / (dp * dp);
    }
    let center = (lo + hi) * T::of(0.5);
    let scale = (hi - lo) * T::of(0.5);
    let nodes = ref_nodes.iter().map(|&x| center + scale * x).collect();
    let weights = ref_weights.iter().map(|&w| w * scale).collect();
    Ok(QuadratureRule {
        nodes,
        weights,
        lo,
        hi,
        kind: RuleKind::GaussLegendre,
    })
}

/// Legendre polynomial `P_n(x)` and its derivative via the three-term
/// recurrence.
fn legendre_with_derivative<T: Scalar>(n: usize, x: T) -> (T, T) {
    let mut p_prev = T::one();
    let mut p = x;
    if n == 0 {
        return (T::one(), T::zero());
    }
    for k in 2..=n {
        let kf = T::of_usize(k);
        let next = ((T::of(2.0) * kf - T::one()) * x * p - (kf - T::one()) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1)
    let dp = T::of_usize(n) * (x * p - p_prev) / (x * x - T::one());
    (p, dp)
}

/// Equispaced rule on `[lo, hi]`.
///
/// `closed = false`: `n` nodes `lo + i*delta`, all weights `delta` (the
/// left-endpoint sums the half-space loss uses). `closed = true`: `n` nodes
/// including both endpoints with trapezoid weights.
pub fn uniform_rule<T: Scalar>(n: usize, lo: T, hi: T, closed: bool) -> Result<QuadratureRule<T>> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(invalid("uniform_rule requires finite bounds with lo < hi"));
    }
    if n == 0 || (closed && n < 2) {
        return Err(invalid("uniform_rule requires n >= 1 (n >= 2 when closed)"));
    }
    if closed {
        let delta = (hi - lo) / T::of_usize(n - 1);
        let nodes: Vec<T> = (0..n).map(|i| lo + delta * T::of_usize(i)).collect();
        let mut weights = vec![delta; n];
        weights[0] = delta * T::of(0.5);
        weights[n - 1] = delta * T::of(0.5);
        Ok(QuadratureRule {
            nodes,
            weights,
            lo,
            hi,
            kind: RuleKind::Trapezoid,
        })
    } else {
        let delta = (hi - lo) / T::of_usize(n);
        let nodes: Vec<T> = (0..n).map(|i| lo + delta * T::of_usize(i)).collect();
        let weights = vec![delta; n];
        Ok(QuadratureRule {
            nodes,
            weights,
            lo,
            hi,
            kind: RuleKind::UniformOpen,
        })
    }
}

/// Normalized average `<f> = sum_j w_j f_j / (hi - lo)`.
///
/// On `v` in `[-1,1]` this is the kinetic `1/|S^0|` average; on an angle
/// interval `[0, 2*pi]` it is the `1/(2*pi)` average.
pub fn velocity_average<T: Scalar>(rule: &QuadratureRule<T>, samples: &[T]) -> Result<T> {
    Ok(rule.integrate_samples(samples)? / rule.measure())
}

/// Tensor product of one to three 1D rules (x, [y], v-or-angle).
#[derive(Debug, Clone)]
pub struct TensorGrid<T> {
    pub axes: Vec<QuadratureRule<T>>,
}

impl<T: Scalar> TensorGrid<T> {
    pub fn new(axes: Vec<QuadratureRule<T>>) -> Self {
        assert!(
            (1..=3).contains(&axes.len()),
            "tensor grid supports 1-3 axes"
        );
        Self { axes }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Product weight at a multi-index (row-major over axes).
    pub fn weight(&self, index: &[usize]) -> T {
        index
            .iter()
            .zip(&self.axes)
            .fold(T::one(), |acc, (&i, ax)| acc * ax.weights[i])
    }

    /// Iterate `(point, weight)` row-major (last axis fastest).
    pub fn iter_points(&self) -> impl Iterator<Item = (Vec<T>, T)> + '_ {
        let sizes: Vec<usize> = self.axes.iter().map(|a| a.len()).collect();
        let total = self.len();
        (0..total).map(move |flat| {
            let mut rem = flat;
            let mut point = Vec::with_capacity(self.axes.len());
            let mut w = T::one();
            for (dim, ax) in self.axes.iter().enumerate() {
                let stride: usize = sizes[dim + 1..].iter().product();
                let i = rem / stride;
                rem %= stride;
                point.push(ax.nodes[i]);
                w *= ax.weights[i];
            }
            (point, w)
        })
    }

    /// Integrate a function of the grid point.
    pub fn integrate(&self, f: impl Fn(&[T]) -> T) -> T {
        self.iter_points()
            .fold(T::zero(), |acc, (p, w)| acc + w * f(&p))
    }
}
