//! Discrete scattering operators acting on velocity-sampled functions.
//!
//! The operator is `L f = <K (f' - f)>`: for the isotropic kernel this is
//! `<f> - f`; the Henyey-Greenstein kernel is pre-tabulated as a dense
//! matrix on the angular rule and row-normalized so that the discrete kernel
//! is exactly conservative. The kernel carries no `1/(2pi)` of its own; the
//! angular average supplies that factor, so `h -> 0` degenerates to the
//! isotropic operator.

use crate::error::{invalid, Result};
use crate::quadrature::{velocity_average, QuadratureRule};
use crate::scalar::Scalar;
use ndarray::Array2;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec<T> {
    Isotropic,
    /// Anisotropy parameter `h` in `(0, 1)`; kernel
    /// `K(a, a') = (1 - h^2) / (1 + h^2 - 2 h cos(a - a'))` on the circle.
    HenyeyGreenstein { h: T },
}

impl<T: Scalar> KernelSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if let KernelSpec::HenyeyGreenstein { h } = self {
            if !(*h > T::zero() && *h < T::one()) {
                return Err(invalid("Henyey-Greenstein h must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Kernel tabulated on a fixed angular rule.
#[derive(Debug, Clone)]
pub struct DiscreteScattering<T> {
    pub kernel: KernelSpec<T>,
    pub rule: QuadratureRule<T>,
    /// Row-normalized kernel matrix (anisotropic kernels only).
    matrix: Option<Arc<Array2<T>>>,
    /// Largest relative row-normalization correction that was applied.
    pub norm_correction: T,
}

impl<T: Scalar> DiscreteScattering<T> {
    pub fn new(kernel: KernelSpec<T>, rule: QuadratureRule<T>) -> Result<Self> {
        kernel.validate()?;
        match kernel {
            KernelSpec::Isotropic => Ok(Self {
                kernel,
                rule,
                matrix: None,
                norm_correction: T::zero(),
            }),
            KernelSpec::HenyeyGreenstein { h } => {
                let n = rule.len();
                let measure = rule.measure();
                let mut k = Array2::zeros((n, n));
                for i in 0..n {
                    for j in 0..n {
                        let d = rule.nodes[i] - rule.nodes[j];
                        k[(i, j)] = (T::one() - h * h)
                            / (T::one() + h * h - T::of(2.0) * h * d.cos());
                    }
                }
                // Enforce discrete conservation: (1/|S|) sum_j K_ij w_j = 1.
                let mut worst = T::zero();
                for i in 0..n {
                    let mut row_sum = T::zero();
                    for j in 0..n {
                        row_sum += k[(i, j)] * rule.weights[j];
                    }
                    let factor = measure / row_sum;
                    worst = worst.max((factor - T::one()).abs());
                    for j in 0..n {
                        k[(i, j)] = k[(i, j)] * factor;
                    }
                }
                Ok(Self {
                    kernel,
                    rule,
                    matrix: Some(Arc::new(k)),
                    norm_correction: worst,
                })
            }
        }
    }

    /// `(L f)_i` at every node of the rule.
    pub fn apply(&self, samples: &[T]) -> Result<Vec<T>> {
        if samples.len() != self.rule.len() {
            return Err(invalid("sample count does not match scattering rule"));
        }
        match &self.matrix {
            None => {
                let mean = velocity_average(&self.rule, samples)?;
                Ok(samples.iter().map(|&f| mean - f).collect())
            }
            Some(k) => {
                let measure = self.rule.measure();
                let n = self.rule.len();
                let mut out = vec![T::zero(); n];
                for i in 0..n {
                    let mut acc = T::zero();
                    for j in 0..n {
                        acc += k[(i, j)] * self.rule.weights[j] * samples[j];
                    }
                    out[i] = acc / measure - samples[i];
                }
                Ok(out)
            }
        }
    }

    /// Dense matrix `A` with `L f = A f` on the rule's nodes, for batched
    /// tape evaluation. `A = K w / |S| - I` (isotropic included).
    pub fn operator_matrix(&self) -> Array2<T> {
        let n = self.rule.len();
        let measure = self.rule.measure();
        let mut a = Array2::zeros((n, n));
        match &self.matrix {
            None => {
                for i in 0..n {
                    for j in 0..n {
                        a[(i, j)] = self.rule.weights[j] / measure;
                    }
                    a[(i, i)] = a[(i, i)] - T::one();
                }
            }
            Some(k) => {
                for i in 0..n {
                    for j in 0..n {
                        a[(i, j)] = k[(i, j)] * self.rule.weights[j] / measure;
                    }
                    a[(i, i)] = a[(i, i)] - T::one();
                }
            }
        }
        a
    }
}

/// One-shot `L f` on a rule.
pub fn apply_l<T: Scalar>(
    kernel: KernelSpec<T>,
    rule: &QuadratureRule<T>,
    samples: &[T],
) -> Result<Vec<T>> {
    DiscreteScattering::new(kernel, rule.clone())?.apply(samples)
}

/// `<L f>`; vanishes for conservative kernels.
pub fn average_of_l<T: Scalar>(
    kernel: KernelSpec<T>,
    rule: &QuadratureRule<T>,
    samples: &[T],
) -> Result<T> {
    let lf = apply_l(kernel, rule, samples)?;
    velocity_average(rule, &lf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{gauss_legendre, uniform_rule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn angular_rule(n: usize) -> QuadratureRule<f64> {
        uniform_rule(n, 0.0, 2.0 * PI, false).unwrap()
    }

    #[test]
    fn constants_are_annihilated() {
        let rule = gauss_legendre::<f64>(20, -1.0, 1.0).unwrap();
        let c = vec![2.7; rule.len()];
        let lf = apply_l(KernelSpec::Isotropic, &rule, &c).unwrap();
        assert!(lf.iter().all(|&v| v.abs() < 1e-14));

        let arule = angular_rule(64);
        let c = vec![-1.3; arule.len()];
        let lf = apply_l(KernelSpec::HenyeyGreenstein { h: 0.5 }, &arule, &c).unwrap();
        assert!(lf.iter().all(|&v| v.abs() < 1e-8));
    }

    #[test]
    fn isotropic_on_odd_velocity_is_negation() {
        let rule = gauss_legendre::<f64>(20, -1.0, 1.0).unwrap();
        let v: Vec<f64> = rule.nodes.clone();
        let lf = apply_l(KernelSpec::Isotropic, &rule, &v).unwrap();
        for (lfj, vj) in lf.iter().zip(&v) {
            assert!((lfj + vj).abs() < 1e-14);
        }
    }

    #[test]
    fn hg_first_harmonic_eigenvalue() {
        // L cos = (h - 1) cos for the Henyey-Greenstein kernel; oracle is a
        // dense apply at 512 angles.
        let h = 0.3;
        let rule = angular_rule(64);
        let cosv: Vec<f64> = rule.nodes.iter().map(|a| a.cos()).collect();
        let lf = apply_l(KernelSpec::HenyeyGreenstein { h }, &rule, &cosv).unwrap();
        for (lfi, ci) in lf.iter().zip(&cosv) {
            assert!(
                (lfi - (h - 1.0) * ci).abs() < 1e-6,
                "eigenvalue mismatch: {lfi} vs {}",
                (h - 1.0) * ci
            );
        }
        let fine = angular_rule(512);
        let cosf: Vec<f64> = fine.nodes.iter().map(|a| a.cos()).collect();
        let lf_fine = apply_l(KernelSpec::HenyeyGreenstein { h }, &fine, &cosf).unwrap();
        for (lfi, ci) in lf_fine.iter().zip(&cosf) {
            assert!((lfi - (h - 1.0) * ci).abs() < 1e-10);
        }
    }

    #[test]
    fn average_of_l_vanishes_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grule = gauss_legendre::<f64>(24, -1.0, 1.0).unwrap();
        let arule = angular_rule(64);
        for _ in 0..100 {
            let s: Vec<f64> = (0..grule.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let avg = average_of_l(KernelSpec::Isotropic, &grule, &s).unwrap();
            assert!(avg.abs() < 1e-12);

            let s: Vec<f64> = (0..arule.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let avg = average_of_l(KernelSpec::HenyeyGreenstein { h: 0.5 }, &arule, &s).unwrap();
            assert!(avg.abs() < 1e-8, "HG average {avg}");
        }
        let zero = vec![0.0; grule.len()];
        assert_eq!(average_of_l(KernelSpec::Isotropic, &grule, &zero).unwrap(), 0.0);
    }

    #[test]
    fn discrete_operator_is_negative_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let arule = angular_rule(48);
        let op = DiscreteScattering::new(KernelSpec::HenyeyGreenstein { h: 0.7 }, arule.clone())
            .unwrap();
        for _ in 0..20 {
            let f: Vec<f64> = (0..arule.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lf = op.apply(&f).unwrap();
            let flf: Vec<f64> = f.iter().zip(&lf).map(|(a, b)| a * b).collect();
            let q = velocity_average(&arule, &flf).unwrap();
            assert!(q <= 1e-10, "quadratic form should be <= 0, got {q}");
        }
    }

    #[test]
    fn hg_degenerates_to_isotropic() {
        let arule = angular_rule(32);
        let f: Vec<f64> = arule.nodes.iter().map(|a| (2.0 * a).sin() + 0.3).collect();
        let hg = apply_l(KernelSpec::HenyeyGreenstein { h: 1e-9 }, &arule, &f).unwrap();
        let iso = apply_l(KernelSpec::Isotropic, &arule, &f).unwrap();
        for (a, b) in hg.iter().zip(&iso) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn invalid_h_rejected() {
        let arule = angular_rule(8);
        let f = vec![0.0; 8];
        assert!(apply_l(KernelSpec::HenyeyGreenstein { h: 1.2 }, &arule, &f).is_err());
        assert!(apply_l(KernelSpec::HenyeyGreenstein { h: 0.0 }, &arule, &f).is_err());
    }

    #[test]
    fn operator_matrix_matches_apply() {
        let arule = angular_rule(24);
        let op = DiscreteScattering::new(KernelSpec::HenyeyGreenstein { h: 0.4 }, arule.clone())
            .unwrap();
        let f: Vec<f64> = arule.nodes.iter().map(|a| a.sin()).collect();
        let direct = op.apply(&f).unwrap();
        let m = op.operator_matrix();
        for i in 0..arule.len() {
            let mut acc = 0.0;
            for j in 0..arule.len() {
                acc += m[(i, j)] * f[j];
            }
            assert!((acc - direct[i]).abs() < 1e-13);
        }
    }
}
