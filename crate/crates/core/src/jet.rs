//! Forward-mode jets carrying first and diagonal second input-partials.
//!
//! A [`Jet2`] tracks a value together with `d/dx_a` and `d^2/dx_a^2` for up
//! to two designated input coordinates. Mixed second partials are never
//! carried; none of the residuals need them.

use crate::activation::Activation;
use crate::scalar::Scalar;

pub const MAX_ACTIVE: usize = 2;

#[derive(Debug, Clone, Copy)]
pub struct Jet2<T> {
    pub val: T,
    pub d1: [T; MAX_ACTIVE],
    pub d2: [T; MAX_ACTIVE],
}

impl<T: Scalar> Jet2<T> {
    pub fn constant(val: T) -> Self {
        Self {
            val,
            d1: [T::zero(); MAX_ACTIVE],
            d2: [T::zero(); MAX_ACTIVE],
        }
    }

    /// Input variable seeded as active coordinate `slot`.
    pub fn variable(val: T, slot: usize) -> Self {
        let mut jet = Self::constant(val);
        jet.d1[slot] = T::one();
        jet
    }

    pub fn add(self, rhs: Self) -> Self {
        Self {
            val: self.val + rhs.val,
            d1: [self.d1[0] + rhs.d1[0], self.d1[1] + rhs.d1[1]],
            d2: [self.d2[0] + rhs.d2[0], self.d2[1] + rhs.d2[1]],
        }
    }

    pub fn scale(self, c: T) -> Self {
        Self {
            val: self.val * c,
            d1: [self.d1[0] * c, self.d1[1] * c],
            d2: [self.d2[0] * c, self.d2[1] * c],
        }
    }

    pub fn mul(self, rhs: Self) -> Self {
        let mut out = Self::constant(self.val * rhs.val);
        for a in 0..MAX_ACTIVE {
            out.d1[a] = self.d1[a] * rhs.val + self.val * rhs.d1[a];
            out.d2[a] = self.d2[a] * rhs.val
                + T::of(2.0) * self.d1[a] * rhs.d1[a]
                + self.val * rhs.d2[a];
        }
        out
    }

    /// Chain rule through an activation.
    pub fn activate(self, act: Activation<T>) -> Self {
        let f1 = act.deriv(self.val, 1);
        let f2 = act.deriv(self.val, 2);
        let mut out = Self::constant(act.deriv(self.val, 0));
        for a in 0..MAX_ACTIVE {
            out.d1[a] = f1 * self.d1[a];
            out.d2[a] = f2 * self.d1[a] * self.d1[a] + f1 * self.d2[a];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_gives_second_derivative_of_square() {
        // x^2 at x = 3: value 9, d1 = 6, d2 = 2.
        let x = Jet2::variable(3.0f64, 0);
        let sq = x.mul(x);
        assert!((sq.val - 9.0).abs() < 1e-15);
        assert!((sq.d1[0] - 6.0).abs() < 1e-15);
        assert!((sq.d2[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn tanh_jet_at_zero() {
        let x = Jet2::variable(0.0f64, 0);
        let t = x.activate(Activation::Tanh);
        assert!(t.val.abs() < 1e-15);
        assert!((t.d1[0] - 1.0).abs() < 1e-15);
        assert!(t.d2[0].abs() < 1e-15);
    }

    #[test]
    fn chain_rule_matches_finite_differences() {
        // f(x, y) = softplus(x * y + tanh(x)) with both coordinates active.
        let f = |x: f64, y: f64| {
            let jx = Jet2::variable(x, 0);
            let jy = Jet2::variable(y, 1);
            jx.mul(jy).add(jx.activate(Activation::Tanh)).activate(Activation::Softplus)
        };
        let scalar = |x: f64, y: f64| f(x, y).val;
        let (x0, y0) = (0.4, -1.1);
        let jet = f(x0, y0);
        let h = 1e-5;
        let fd_x = (scalar(x0 + h, y0) - scalar(x0 - h, y0)) / (2.0 * h);
        let fd_y = (scalar(x0, y0 + h) - scalar(x0, y0 - h)) / (2.0 * h);
        let fd_xx = (scalar(x0 + h, y0) - 2.0 * scalar(x0, y0) + scalar(x0 - h, y0)) / (h * h);
        let fd_yy = (scalar(x0, y0 + h) - 2.0 * scalar(x0, y0) + scalar(x0, y0 - h)) / (h * h);
        assert!((jet.d1[0] - fd_x).abs() < 1e-8);
        assert!((jet.d1[1] - fd_y).abs() < 1e-8);
        assert!((jet.d2[0] - fd_xx).abs() < 1e-4);
        assert!((jet.d2[1] - fd_yy).abs() < 1e-4);
    }
}
