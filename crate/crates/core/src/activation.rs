//! Activation functions with derivatives up to third order.
//!
//! Third derivatives are needed because the reverse tape differentiates
//! expressions that already contain second input-derivatives.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation<T> {
    Identity,
    Tanh,
    /// `ln(1 + e^z)`, used for nonnegative macro densities.
    Softplus,
    /// `c / (1 + e^{-z})`, used for boundary-layer profiles bounded by the
    /// inflow sup-norm `c`.
    ScaledSigmoid(T),
}

impl<T: Scalar> Activation<T> {
    /// k-th derivative value at `z`, for `k <= 3`.
    pub fn deriv(&self, z: T, k: u8) -> T {
        match *self {
            Activation::Identity => match k {
                0 => z,
                1 => T::one(),
                _ => T::zero(),
            },
            Activation::Tanh => {
                let t = z.tanh();
                let sech2 = T::one() - t * t;
                match k {
                    0 => t,
                    1 => sech2,
                    2 => -T::of(2.0) * t * sech2,
                    3 => sech2 * (T::of(6.0) * t * t - T::of(2.0)),
                    _ => unreachable!("activation derivative order > 3"),
                }
            }
            Activation::Softplus => {
                let s = logistic(z);
                match k {
                    0 => softplus(z),
                    1 => s,
                    2 => s * (T::one() - s),
                    3 => s * (T::one() - s) * (T::one() - T::of(2.0) * s),
                    _ => unreachable!("activation derivative order > 3"),
                }
            }
            Activation::ScaledSigmoid(c) => {
                let s = logistic(z);
                let sp = s * (T::one() - s);
                match k {
                    0 => c * s,
                    1 => c * sp,
                    2 => c * sp * (T::one() - T::of(2.0) * s),
                    3 => c * sp * (T::one() - T::of(6.0) * s + T::of(6.0) * s * s),
                    _ => unreachable!("activation derivative order > 3"),
                }
            }
        }
    }
}

fn logistic<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

fn softplus<T: Scalar>(z: T) -> T {
    // max(z, 0) + ln(1 + e^{-|z|}) avoids overflow on both sides.
    z.max(T::zero()) + (T::one() + (-z.abs()).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let acts: Vec<Activation<f64>> = vec![
            Activation::Identity,
            Activation::Tanh,
            Activation::Softplus,
            Activation::ScaledSigmoid(5.0),
        ];
        let h = 1e-5;
        for act in acts {
            for &z in &[-2.0, -0.3, 0.0, 0.7, 1.9] {
                for k in 0..3u8 {
                    let fd = (act.deriv(z + h, k) - act.deriv(z - h, k)) / (2.0 * h);
                    let exact = act.deriv(z, k + 1);
                    assert!(
                        (fd - exact).abs() <= 1e-7 * (1.0 + exact.abs()),
                        "{act:?} k={k} z={z}: fd={fd} exact={exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn closed_form_values_at_zero() {
        assert!((Activation::<f64>::Softplus.deriv(0.0, 0) - 2.0f64.ln()).abs() < 1e-15);
        assert!((Activation::ScaledSigmoid(5.0f64).deriv(0.0, 0) - 2.5).abs() < 1e-15);
        assert!((Activation::<f64>::Tanh.deriv(0.0, 1) - 1.0).abs() < 1e-15);
        assert!(Activation::<f64>::Tanh.deriv(0.0, 2).abs() < 1e-15);
    }
}
