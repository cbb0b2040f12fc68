//! Steady radiative transfer in kinetic and diffusive regimes, solved by
//! minimizing physics-informed least-squares losses over small fully
//! connected networks.
//!
//! The crate provides:
//!
//! * macro-micro decomposition losses that stay uniformly stable as the
//!   Knudsen number goes to zero, plus the plain residual loss they replace;
//! * half-space (Milne) solvers and Chandrasekhar H-functions that build
//!   boundary-layer correctors for anisotropic inflow data;
//! * a self-contained differentiation stack (second-order input jets with a
//!   reverse tape over the jet arithmetic) and Adam/L-BFGS training;
//! * deterministic finite-difference reference solvers and error metrics;
//! * experiment drivers behind the `rte` command line.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix `f64` for the experiment surface.

pub mod activation;
pub mod error;
pub mod experiments;
pub mod fdm;
pub mod halfspace;
pub mod jet;
pub mod losses;
pub mod metrics;
pub mod mlp;
pub mod optim;
pub mod problem;
pub mod quadrature;
pub mod scalar;
pub mod scattering;
pub mod tape;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar used by the CLI and experiment drivers.
pub type Real = f64;

/// `f64` quadrature rule.
pub type Rule = quadrature::QuadratureRule<Real>;
/// `f64` network description.
pub type Net = mlp::MlpSpec<Real>;
/// `f64` parameter vector.
pub type Params = mlp::ParamVector<Real>;
/// `f64` sampled field.
pub type FieldR = fdm::Field<Real>;
