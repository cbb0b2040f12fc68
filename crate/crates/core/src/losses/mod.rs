//! Empirical least-squares losses.
//!
//! Every loss is assembled on the reverse tape from network jet heads (or
//! from constant columns sampled out of closed-form candidate fields, which
//! reuses the identical code path). Interior residuals are weighted by
//! `dx [dy] * w_v / |S|`, matching the normalized velocity average used
//! throughout; boundary misfits carry `B_w / N_b` per sampled velocity.
//!
//! Sources may depend on velocity. The macro residual then uses the angular
//! mean `<G>` and the micro residual the fluctuation `eps (G - <G>)`; for
//! spatially-dependent-only sources these reduce to the familiar forms, and
//! exact solutions annihilate every term.

mod common;
mod hetero;
mod macro_micro;
mod nonlinear;
mod vanilla;

pub use common::{GammaSamples1d, GammaSamples2d, LossBreakdown};

/// Spatial chunk ranges used by every batched loss evaluation (fixed by the
/// sizes alone, independent of scheduling).
pub(crate) fn chunks_for(n_space: usize, n_vel: usize) -> Vec<std::ops::Range<usize>> {
    common::spatial_chunks(n_space, n_vel, common::MAX_CHUNK_ROWS)
}
pub use hetero::{hetero_eps_loss, HeteroEpsLoss, HeteroEpsProblem};
pub use macro_micro::{
    bl_corrected_loss_1d, bl_corrected_loss_2d, macro_micro_loss, macro_micro_loss_2d,
    macro_micro_loss_fields, macro_micro_loss_fields_2d, MacroMicroLoss1d, MacroMicroLoss2d,
};
pub use nonlinear::{nonlinear_loss, NonlinearConstants, NonlinearLoss};
pub use vanilla::{vanilla_loss, vanilla_loss_fields, VanillaLoss1d};
