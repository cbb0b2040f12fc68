//! Error metrics between sampled fields.

use crate::error::{invalid, Result};
use crate::fdm::Field;
use crate::scalar::Scalar;

/// Relative weighted L2 mismatch
/// `sum w (pred - ref)^2 / sum w ref^2`, square-rooted when `take_sqrt`.
///
/// The un-rooted ratio is the default reporting convention; both variants
/// are emitted by the experiment drivers.
pub fn relative_l2<T: Scalar>(pred: &Field<T>, reference: &Field<T>, take_sqrt: bool) -> Result<T> {
    if pred.axes.len() != reference.axes.len()
        || pred
            .axes
            .iter()
            .zip(&reference.axes)
            .any(|(a, b)| a.nodes.len() != b.nodes.len())
    {
        return Err(invalid("fields live on different meshes"));
    }
    for (a, b) in pred.axes.iter().zip(&reference.axes) {
        for (x, y) in a.nodes.iter().zip(&b.nodes) {
            if (*x - *y).abs() > T::of(1e-12) * (T::one() + x.abs()) {
                return Err(invalid("fields live on different meshes"));
            }
        }
    }
    let mut num = T::zero();
    let mut den = T::zero();
    for (i, (&p, &r)) in pred.values.iter().zip(&reference.values).enumerate() {
        let w = pred.weight_at(i);
        num += w * (p - r) * (p - r);
        den += w * r * r;
    }
    if den == T::zero() {
        return Err(invalid("reference field has zero norm"));
    }
    let ratio = num / den;
    Ok(if take_sqrt { ratio.sqrt() } else { ratio })
}
