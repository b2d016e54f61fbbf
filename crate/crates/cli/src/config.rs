//! Experiment configuration.
//!
//! The config file is TOML. Every key is optional; missing keys take the
//! defaults below.
//!
//! ```toml
//! k = 50                      # per-axis coefficient order
//! n = 100                     # trajectory steps
//! dt = 0.5                    # time step (s)
//! start = [0.25, 0.35]
//! rate = 0.01                 # information collected per step
//! grid = [10, 10]             # collection grid
//! field_resolution = 100      # cells per axis when sampling the EID
//! score_targets = [8e-2, 2.6e-2, 6e-3, 2.4e-3, 5.5e-4, 3.7e-4]
//! reconstruct_orders = [5, 30, 150]
//! residual_split = 0.5
//! residual_k = 10
//! output_dir = "out"
//!
//! [domain]
//! lower = [0.0, 0.0]
//! upper = [1.0, 1.0]
//!
//! [[eid.components]]          # score sweep, optimize, simulate
//! mean = [0.65, 0.65]
//! covariance = [[0.0144, 0.0], [0.0, 0.0144]]
//! weight = 1.0
//!
//! # [[horizon_eid.components]] and [[residual_eid.components]] default to
//! # the bimodal mixture with a second mode at (0.25, 0.7).
//!
//! [optimizer]                 # see OptimizerConfig; `order` is taken from `k`
//! control_penalty = 3e-4
//! seed = 0
//! ```

use std::path::{Path, PathBuf};

use ergodic_core::infosim::{build_eid, discretize, EidSpec, InfoGrid};
use ergodic_core::planner::OptimizerConfig;
use ergodic_core::spectral::{DensityField, Domain};
use ergodic_core::trajectory::EffortMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k: usize,
    pub n: usize,
    pub dt: f64,
    pub start: Vec<f64>,
    pub rate: f64,
    pub grid: Vec<usize>,
    pub field_resolution: usize,
    pub score_targets: Vec<f64>,
    pub reconstruct_orders: Vec<usize>,
    pub residual_split: f64,
    pub residual_k: usize,
    pub effort_mode: EffortMode,
    pub output_dir: PathBuf,
    pub domain: DomainConfig,
    pub eid: EidSpec,
    pub horizon_eid: EidSpec,
    pub residual_eid: EidSpec,
    pub optimizer: OptimizerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k: 50,
            n: 100,
            dt: 0.5,
            start: vec![0.25, 0.35],
            rate: 0.01,
            grid: vec![10, 10],
            field_resolution: 100,
            score_targets: vec![8e-2, 2.6e-2, 6e-3, 2.4e-3, 5.5e-4, 3.7e-4],
            reconstruct_orders: vec![5, 30, 150],
            residual_split: 0.5,
            residual_k: 10,
            effort_mode: EffortMode::NormSum,
            output_dir: PathBuf::from("out"),
            domain: DomainConfig::default(),
            eid: EidSpec::single_default(),
            horizon_eid: EidSpec::bimodal_default(),
            residual_eid: EidSpec::bimodal_default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let domain = self.domain()?;
        if domain.dim() != 2 {
            return bad("experiments run on two-dimensional domains".into());
        }
        if self.start.len() != 2 || !domain.contains(&self.start) {
            return bad(format!("start {:?} is not inside the domain", self.start));
        }
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad(format!("rate must be positive, got {}", self.rate));
        }
        if self.grid.len() != 2 || self.grid.contains(&0) {
            return bad("grid needs two positive sizes".into());
        }
        if self.field_resolution == 0 {
            return bad("field_resolution must be positive".into());
        }
        if self.score_targets.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return bad("score targets must be non-negative".into());
        }
        if !(self.residual_split > 0.0 && self.residual_split < 1.0) {
            return bad("residual_split must lie strictly between 0 and 1".into());
        }
        for (name, eid) in [("eid", &self.eid), ("horizon_eid", &self.horizon_eid), ("residual_eid", &self.residual_eid)] {
            eid.validate(2).map_err(|e| CliError::Config(format!("{name}: {e}")))?;
        }
        self.optimizer_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        Domain::new(self.domain.lower.clone(), self.domain.upper.clone())
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Optimizer settings with `order` set to `k`.
    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            order: self.k,
            ..self.optimizer.clone()
        }
    }

    pub fn seed(&self) -> u64 {
        self.optimizer.seed
    }

    pub fn density(&self, eid: &EidSpec) -> Result<DensityField, CliError> {
        let r = self.field_resolution;
        Ok(build_eid(eid, &self.domain()?, &[r, r])?)
    }

    pub fn info_grid(&self, field: &DensityField) -> Result<InfoGrid, CliError> {
        Ok(discretize(field, &self.grid, self.rate)?)
    }

    /// Hex SHA-256 of the canonical TOML rendering, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let canonical = Self {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        let text = toml::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
