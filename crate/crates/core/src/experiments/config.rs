//! Flat key-value experiment configuration (TOML on disk) with per-id
//! defaults mirroring the reported parameter choices.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentId {
    #[serde(rename = "toy-vanilla")]
    ToyVanilla,
    #[serde(rename = "toy-mm")]
    ToyMacroMicro,
    #[serde(rename = "ex5.1")]
    Homogeneous1d,
    #[serde(rename = "ex5.2")]
    Analytic2d,
    #[serde(rename = "ex5.3")]
    HeteroEps,
    #[serde(rename = "ex5.4")]
    HenyeyGreenstein2d,
    #[serde(rename = "ex5.5")]
    HalfSpace1d,
    #[serde(rename = "ex5.6")]
    BoundaryLayer1d,
    #[serde(rename = "ex5.7")]
    HalfSpace2d,
    #[serde(rename = "ex5.8")]
    BoundaryLayer2d,
    #[serde(rename = "ex5.9")]
    Nonlinear,
    #[serde(rename = "pitfall-weights")]
    PitfallWeights,
    #[serde(rename = "pitfall-mesh")]
    PitfallMesh,
}

impl ExperimentId {
    pub fn parse(s: &str) -> Result<Self> {
        toml::from_str::<IdHolder>(&format!("id = \"{s}\""))
            .map(|h| h.id)
            .map_err(|_| invalid(format!("unknown experiment id '{s}'")))
    }

    pub fn label(&self) -> &'static str {
        match self {
            ExperimentId::ToyVanilla => "toy-vanilla",
            ExperimentId::ToyMacroMicro => "toy-mm",
            ExperimentId::Homogeneous1d => "ex5.1",
            ExperimentId::Analytic2d => "ex5.2",
            ExperimentId::HeteroEps => "ex5.3",
            ExperimentId::HenyeyGreenstein2d => "ex5.4",
            ExperimentId::HalfSpace1d => "ex5.5",
            ExperimentId::BoundaryLayer1d => "ex5.6",
            ExperimentId::HalfSpace2d => "ex5.7",
            ExperimentId::BoundaryLayer2d => "ex5.8",
            ExperimentId::Nonlinear => "ex5.9",
            ExperimentId::PitfallWeights => "pitfall-weights",
            ExperimentId::PitfallMesh => "pitfall-mesh",
        }
    }

    pub fn is_two_dimensional(&self) -> bool {
        matches!(
            self,
            ExperimentId::Analytic2d
                | ExperimentId::HenyeyGreenstein2d
                | ExperimentId::HalfSpace2d
                | ExperimentId::BoundaryLayer2d
        )
    }

    /// 2D boundary-layer experiments are gated behind `--long`.
    pub fn is_long(&self) -> bool {
        matches!(self, ExperimentId::HalfSpace2d | ExperimentId::BoundaryLayer2d)
    }
}

#[derive(Deserialize)]
struct IdHolder {
    id: ExperimentId,
}

/// Resolved experiment configuration; every field is concrete.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub id: ExperimentId,
    pub epsilon: f64,
    pub seed: u64,
    /// Hidden layers and width.
    pub n_l: usize,
    pub n_r: usize,
    /// Interior collocation counts.
    pub n_x: usize,
    pub n_y: usize,
    pub n_v: usize,
    /// Boundary collocation counts (spatial per face in 2D, velocities).
    pub n_b_space: usize,
    pub n_b: usize,
    /// Optimizer settings.
    pub lr: f64,
    pub lr_decay_factor: Option<f64>,
    pub lr_decay_every: Option<usize>,
    pub i_max1: usize,
    pub delta1: f64,
    pub i_max2: usize,
    pub delta2: f64,
    pub target_loss: Option<f64>,
    /// Per-face boundary weights.
    pub boundary_weights: Vec<f64>,
    /// Henyey-Greenstein anisotropy (ex5.4).
    pub hg_h: f64,
    /// Nonlinear constants (ex5.9).
    pub nl_a: f64,
    pub nl_c: f64,
    pub nl_sigma: f64,
    /// Half-space truncation (ex5.5/ex5.6/ex5.7/ex5.8).
    pub z_max: f64,
    pub n_z: usize,
    /// y-profile count for the 2D corrector.
    pub corrector_ny: usize,
    /// Corrector checkpoint base path (load if present, else train and save).
    pub corrector: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Cadence of relative-error evaluations during training.
    pub error_every: usize,
}

impl ExperimentConfig {
    /// Reported parameter choices per experiment.
    pub fn defaults_for(id: ExperimentId) -> Self {
        let mut cfg = Self {
            schema_version: 1,
            id,
            epsilon: 1e-3,
            seed: 7,
            n_l: 4,
            n_r: 50,
            n_x: 80,
            n_y: 1,
            n_v: 60,
            n_b_space: 1,
            n_b: 60,
            lr: 1e-3,
            lr_decay_factor: None,
            lr_decay_every: None,
            i_max1: 12_000,
            delta1: 5e-3,
            i_max2: 10_000,
            delta2: 1e-6,
            target_loss: None,
            boundary_weights: vec![1.0, 1.0],
            hg_h: 0.5,
            nl_a: 1.0,
            nl_c: 1.0,
            nl_sigma: 1.0,
            z_max: 10.0,
            n_z: 400,
            corrector_ny: 11,
            corrector: None,
            out_dir: None,
            error_every: 100,
        };
        match id {
            ExperimentId::Analytic2d | ExperimentId::HenyeyGreenstein2d | ExperimentId::BoundaryLayer2d => {
                cfg.n_r = 30;
                cfg.n_x = 40;
                cfg.n_y = 40;
                cfg.n_v = 40;
                cfg.n_b_space = 40;
                cfg.n_b = 40;
                cfg.i_max1 = 20_000;
                cfg.delta1 = 1e-2;
                cfg.boundary_weights = vec![1.0; 4];
            }
            ExperimentId::HalfSpace1d => {
                cfg.n_v = 40;
                cfg.n_b = 60;
            }
            ExperimentId::HalfSpace2d => {
                cfg.n_l = 3;
                cfg.n_z = 200;
                cfg.n_v = 40;
                cfg.n_b = 40;
                cfg.corrector_ny = 11;
                cfg.boundary_weights = vec![1.0; 4];
            }
            ExperimentId::HeteroEps => {
                cfg.lr_decay_factor = Some(0.95);
                cfg.lr_decay_every = Some(2000);
                cfg.epsilon = 1.0; // scale profile is built in
            }
            ExperimentId::PitfallWeights => {
                cfg.boundary_weights = vec![1e3, 1.0];
            }
            _ => {}
        }
        cfg
    }

    /// Parse a TOML file: `id` is required, everything else overrides the
    /// per-id defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            schema_version: Option<u32>,
            id: ExperimentId,
            epsilon: Option<f64>,
            seed: Option<u64>,
            n_l: Option<usize>,
            n_r: Option<usize>,
            n_x: Option<usize>,
            n_y: Option<usize>,
            n_v: Option<usize>,
            n_b_space: Option<usize>,
            n_b: Option<usize>,
            lr: Option<f64>,
            lr_decay_factor: Option<f64>,
            lr_decay_every: Option<usize>,
            i_max1: Option<usize>,
            delta1: Option<f64>,
            i_max2: Option<usize>,
            delta2: Option<f64>,
            target_loss: Option<f64>,
            boundary_weights: Option<Vec<f64>>,
            hg_h: Option<f64>,
            nl_a: Option<f64>,
            nl_c: Option<f64>,
            nl_sigma: Option<f64>,
            z_max: Option<f64>,
            n_z: Option<usize>,
            corrector_ny: Option<usize>,
            corrector: Option<PathBuf>,
            out_dir: Option<PathBuf>,
            error_every: Option<usize>,
        }
        let raw: Raw = toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        if let Some(v) = raw.schema_version {
            if v != 1 {
                return Err(invalid(format!("unsupported schema_version {v}")));
            }
        }
        let mut cfg = Self::defaults_for(raw.id);
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = raw.$field { cfg.$field = v; })*
            };
        }
        take!(
            epsilon, seed, n_l, n_r, n_x, n_y, n_v, n_b_space, n_b, lr, i_max1, delta1, i_max2,
            delta2, boundary_weights, hg_h, nl_a, nl_c, nl_sigma, z_max, n_z, corrector_ny,
            error_every
        );
        cfg.lr_decay_factor = raw.lr_decay_factor.or(cfg.lr_decay_factor);
        cfg.lr_decay_every = raw.lr_decay_every.or(cfg.lr_decay_every);
        cfg.target_loss = raw.target_loss.or(cfg.target_loss);
        cfg.corrector = raw.corrector.or(cfg.corrector);
        cfg.out_dir = raw.out_dir.or(cfg.out_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.n_l, self.n_r, self.n_x, self.n_v, self.n_b, self.n_z, self.error_every,
        ];
        if positive.iter().any(|&n| n == 0) {
            return Err(invalid("all counts must be positive"));
        }
        if self.epsilon <= 0.0 {
            return Err(invalid("epsilon must be positive"));
        }
        let faces = if self.id.is_two_dimensional() { 4 } else { 2 };
        if self.boundary_weights.len() != faces {
            return Err(invalid(format!(
                "boundary_weights must list {faces} faces for {}",
                self.id.label()
            )));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> (crate::optim::AdamConfig<f64>, crate::optim::LbfgsConfig<f64>, crate::optim::StopRule<f64>) {
        let adam = crate::optim::AdamConfig {
            lr: self.lr,
            decay: match (self.lr_decay_factor, self.lr_decay_every) {
                (Some(f), Some(e)) => Some(crate::optim::LrDecay { factor: f, every: e }),
                _ => None,
            },
            ..Default::default()
        };
        let stop = crate::optim::StopRule {
            i_max1: self.i_max1,
            delta1: self.delta1,
            i_max2: self.i_max2,
            delta2: self.delta2,
            target_loss: self.target_loss,
        };
        (adam, crate::optim::LbfgsConfig::default(), stop)
    }
}
