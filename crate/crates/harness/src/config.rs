//! JSON experiment configs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tensor_bandit::bandit::{AgentConfig, ContextDistribution, DrLassoConfig};
use tensor_bandit::estimator::FitOptions;
use tensor_bandit::{GlmFamily, RegularizerSpec};

use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

fn default_arms() -> usize {
    20
}

fn default_replications() -> usize {
    10
}

fn default_width_samples() -> usize {
    200
}

fn default_delta() -> f64 {
    0.01
}

fn default_one() -> f64 {
    1.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_family() -> GlmFamily {
    GlmFamily::logistic()
}

/// Per-setting overrides; each variant produces its own set of output files
/// named `<id>_<variant id>_*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub id: String,
    pub structure: RegularizerSpec,
    pub dims: Vec<usize>,
    #[serde(default = "default_arms")]
    pub arms: usize,
    pub horizon: usize,
    #[serde(default = "default_family")]
    pub family: GlmFamily,
    #[serde(default)]
    pub contexts: ContextDistribution,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_one")]
    pub c_explore: f64,
    #[serde(default = "default_one")]
    pub c_lambda: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_width_samples")]
    pub width_samples: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Variant>,
}

/// One concrete setting after applying a variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub id: String,
    pub structure: RegularizerSpec,
    pub dims: Vec<usize>,
}

impl ExperimentConfig {
    pub fn agent(&self) -> AgentConfig {
        AgentConfig {
            c_explore: self.c_explore,
            c_lambda: self.c_lambda,
            delta: self.delta,
            width_samples: self.width_samples,
            fit: self.fit,
            fixed_exploration: None,
        }
    }

    /// The base setting when there are no variants, else one per variant.
    pub fn settings(&self) -> Vec<Setting> {
        if self.variants.is_empty() {
            return vec![Setting {
                id: self.id.clone(),
                structure: self.structure,
                dims: self.dims.clone(),
            }];
        }
        self.variants
            .iter()
            .map(|v| {
                let mut structure = self.structure;
                if v.rank.is_some() {
                    structure.rank = v.rank;
                }
                if v.sparsity.is_some() {
                    structure.sparsity = v.sparsity;
                }
                Setting {
                    id: format!("{}_{}", self.id, v.id),
                    structure,
                    dims: v.dims.clone().unwrap_or_else(|| self.dims.clone()),
                }
            })
            .collect()
    }

    /// Keeps only the named variant (matched on the variant id).
    pub fn select_variant(&mut self, variant: &str) -> Result<(), HarnessError> {
        self.variants.retain(|v| v.id == variant);
        if self.variants.is_empty() {
            return Err(HarnessError::Invalid(format!("no variant named {variant:?}")));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        check_common(self.schema_version, &self.id, self.replications, self.horizon)?;
        if self.arms == 0 {
            return Err(HarnessError::Invalid("arms must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(HarnessError::Invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.c_explore > 0.0) || !(self.c_lambda > 0.0) {
            return Err(HarnessError::Invalid("c_explore and c_lambda must be positive".into()));
        }
        if self.width_samples == 0 {
            return Err(HarnessError::Invalid("width_samples must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(HarnessError::Invalid("workers must be at least 1".into()));
        }
        for v in &self.variants {
            if v.id.is_empty() || !v.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(HarnessError::Invalid(format!("variant id {:?} must be a non-empty file-name token", v.id)));
            }
        }
        for s in self.settings() {
            s.structure.check_dims(&s.dims).map_err(|e| HarnessError::Invalid(format!("{}: {e}", s.id)))?;
        }
        Ok(())
    }
}

/// Appendix-style sparse linear comparison between the penalized
/// explore-then-commit agent and the doubly-robust Lasso bandit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LassoComparisonConfig {
    pub schema_version: u32,
    pub id: String,
    pub arms: usize,
    pub dim: usize,
    pub sparsity: usize,
    pub rho2: f64,
    pub noise: f64,
    pub horizon: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub geltc: AgentConfig,
    #[serde(default)]
    pub drlasso: DrLassoConfig,
}

impl LassoComparisonConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        check_common(self.schema_version, &self.id, self.replications, self.horizon)?;
        if self.arms == 0 || self.dim == 0 {
            return Err(HarnessError::Invalid("arms and dim must be positive".into()));
        }
        if self.sparsity == 0 || self.sparsity > self.dim {
            return Err(HarnessError::Invalid(format!("sparsity must lie in [1, {}]", self.dim)));
        }
        if !(0.0..1.0).contains(&self.rho2) {
            return Err(HarnessError::Invalid(format!("rho2 must lie in [0, 1), got {}", self.rho2)));
        }
        if !(self.noise > 0.0) {
            return Err(HarnessError::Invalid("noise must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(HarnessError::Invalid("workers must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_common(schema: u32, id: &str, replications: usize, horizon: usize) -> Result<(), HarnessError> {
    if schema != SCHEMA_VERSION {
        return Err(HarnessError::Invalid(format!(
            "unsupported schema_version {schema}, expected {SCHEMA_VERSION}"
        )));
    }
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(HarnessError::Invalid(format!("id {id:?} must be a non-empty file-name token")));
    }
    if replications == 0 {
        return Err(HarnessError::Invalid("replications must be at least 1".into()));
    }
    if horizon < 2 {
        return Err(HarnessError::Invalid("horizon must be at least 2".into()));
    }
    Ok(())
}

/// Parses JSON text; syntax and schema errors carry line and column.
pub fn parse<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<T, HarnessError> {
    serde_json::from_str(text).map_err(|e| HarnessError::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, path)
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let cfg: ExperimentConfig = load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_lasso(path: &Path) -> Result<LassoComparisonConfig, HarnessError> {
    let cfg: LassoComparisonConfig = load(path)?;
    cfg.validate()?;
    Ok(cfg)
}
