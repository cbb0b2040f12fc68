//! Floating-point abstraction for the whole crate.
//!
//! All numerical code is generic over [`Scalar`]; `f64` is the default used
//! by the experiment drivers and the CLI (see the aliases in the crate root).

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

/// Scalar type for quadrature, networks, optimizers and solvers.
///
/// Implemented for `f32` and `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + LinalgScalar
    + ScalarOperand
    + FromStr
    + Display
    + LowerExp
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
    /// Shorthand for converting an `f64` literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant not representable")
    }

    /// Shorthand for converting a count.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize not representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
