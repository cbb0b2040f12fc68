//! Experiment drivers: configuration, training runs, references, metrics,
//! and emitted artifacts. This is the layer the `rte` command line calls.

pub mod config;
pub mod emit;
pub mod run;
pub mod stability;

pub use config::{ExperimentConfig, ExperimentId};
pub use emit::{emit_results, emit_stability, EmitFormats};
pub use run::{run_experiment, run_reference, ResultRecord};
pub use stability::{run_stability_sweep, StabilityRow};
