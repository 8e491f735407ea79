//! TOML experiment configuration.

use std::path::PathBuf;

use rotpend::diffusion::{AssembleOptions, DiffuseOptions, StripSearch};
use rotpend::integrate::IntegratorConfig;
use rotpend::model::ModelParams;
use rotpend::quadrature::QuadratureConfig;
use rotpend::scattering::ShootingConfig;
use rotpend::stdmap::{BasinGrid, StdMapParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const OUTPUT_DIR_ENV: &str = "ROTPEND_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub model: ModelParams,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    pub simulate: Option<SimulateBlock>,
    pub inner: Option<InnerBlock>,
    pub melnikov_grid: Option<MelnikovGridBlock>,
    pub scattering_sweep: Option<ScatteringSweepBlock>,
    pub diffuse: Option<DiffuseBlock>,
    pub stdmap: Option<StdMapBlock>,
    pub basin: Option<BasinBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullState {
    pub p: f64,
    pub q: f64,
    #[serde(rename = "I")]
    pub action: f64,
    pub theta: f64,
    #[serde(default)]
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderPoint {
    #[serde(rename = "I")]
    pub action: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub initial: FullState,
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
}

fn default_iterates() -> usize {
    100
}

fn default_transient() -> usize {
    rotpend::inner::ATTRACTOR_TRANSIENT
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerBlock {
    pub initial: CylinderPoint,
    #[serde(default = "default_iterates")]
    pub iterates: usize,
    #[serde(default = "default_transient")]
    pub transient: usize,
    pub lemma: Option<LemmaBlock>,
}

/// Random starting points for the damped/undamped comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaBlock {
    pub seed: u64,
    pub points: usize,
    pub action_range: (f64, f64),
    pub theta_range: (f64, f64),
    /// Horizon in units of `log(1/ε)`.
    pub t0: f64,
    #[serde(default = "default_lemma_samples")]
    pub samples: usize,
}

fn default_lemma_samples() -> usize {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchRule {
    /// Most transverse critical phase at each point.
    #[default]
    MaxNondegeneracy,
    /// Phase continued from the channel of a strip search.
    Strip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MelnikovGridBlock {
    pub action_range: (f64, f64),
    pub theta_range: (f64, f64),
    pub n_action: usize,
    pub n_theta: usize,
    #[serde(default)]
    pub branch: BranchRule,
    pub strip: Option<StripSearch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringSweepBlock {
    pub eps: Vec<f64>,
    pub points: Vec<CylinderPoint>,
    #[serde(default)]
    pub s: f64,
    #[serde(default)]
    pub branch: BranchRule,
    pub strip: Option<StripSearch>,
    #[serde(default)]
    pub shooting: ShootingConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffuseBlock {
    /// When set, `model.rho_bar` is replaced by this multiple of the admissible bound.
    pub rho_bar_fraction: Option<f64>,
    #[serde(default)]
    pub strip: StripSearch,
    #[serde(default)]
    pub options: DiffuseOptions,
    #[serde(default)]
    pub assemble: AssembleOptions,
}

fn default_rotation_iterates() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StdMapBlock {
    pub params: StdMapParams,
    pub initial: Vec<CylinderPoint>,
    pub iterates: usize,
    #[serde(default = "default_rotation_iterates")]
    pub rotation_iterates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinBlock {
    pub params: StdMapParams,
    pub grid: BasinGrid,
    pub iterates: usize,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, e: &dyn std::fmt::Display| CliError::Config(format!("{key}: {e}"));
        self.model.validate().map_err(|e| bad("model", &e))?;
        self.integrator.validate().map_err(|e| bad("integrator", &e))?;
        self.quadrature.validate().map_err(|e| bad("quadrature", &e))?;
        for (key, params) in [
            ("stdmap.params", self.stdmap.as_ref().map(|b| b.params)),
            ("basin.params", self.basin.map(|b| b.params)),
        ] {
            if let Some(p) = params {
                StdMapParams::new(p.eps, p.lambda, p.mu).map_err(|e| bad(key, &e))?;
            }
        }
        Ok(())
    }

    /// Honour the output-directory override from the environment.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            self.output_dir = PathBuf::from(dir);
        }
    }

    pub fn resolved(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot echo configuration: {e}")))
    }
}

/// The block a subcommand reads, or a config error naming it.
pub fn required<'a, T>(key: &str, block: &'a Option<T>) -> Result<&'a T, CliError> {
    block
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("missing `{key}` table required by this subcommand")))
}
