//! JSON run configuration. Every field is optional; missing fields take the
//! defaults below.

use std::path::Path;

use mlve::engine::EngineConfig;
use mlve::mayer::PolymerGas;
use mlve::model::ModelParams;
use mlve::Complex64;
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    pub engine: EngineConfig,
    pub compare: CompareConfig,
    pub oracle: OracleConfig,
    pub bounds: BoundsConfig,
    pub domain_map: DomainMapConfig,
    pub mayer: MayerConfig,
    pub verify: VerifyConfig,
    pub enumerate: EnumerateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// `|λ|`, or the signed coupling when `phase` is zero.
    pub lambda: f64,
    /// `γ = arg λ`.
    pub phase: f64,
    pub base: u64,
    pub j_min: u32,
    pub j_max: u32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { lambda: 0.2, phase: 0.0, base: 2, j_min: 1, j_max: 3 }
    }
}

impl ModelConfig {
    pub fn coupling(&self) -> Complex64 {
        Complex64::from_polar(self.lambda, self.phase)
    }

    pub fn params(&self) -> Result<ModelParams, UsageError> {
        ModelParams::new(self.coupling(), self.base, self.j_min, self.j_max)
            .map_err(|e| UsageError(format!("model: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub n_max: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self { n_max: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub nodes: usize,
    /// Couplings to scan along the ray of `model.phase`; empty means just
    /// `model.lambda`.
    pub lambdas: Vec<f64>,
    pub perturbative_order: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { nodes: mlve::oracle::DEFAULT_NODES, lambdas: Vec::new(), perturbative_order: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub base: f64,
    pub lambda: f64,
    pub q_max: u32,
    pub b_max: u32,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self { base: 1e8, lambda: 1.0, q_max: 1000, b_max: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainMapConfig {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    /// Grid points per axis.
    pub resolution: usize,
}

impl Default for DomainMapConfig {
    fn default() -> Self {
        Self { re_min: -0.25, re_max: 1.25, im_min: -0.75, im_max: 0.75, resolution: 61 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolymerSpec {
    pub monomers: Vec<usize>,
    pub activity: f64,
    #[serde(default)]
    pub activity_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSpec {
    pub monomers: usize,
    pub polymers: Vec<PolymerSpec>,
}

impl Default for GasSpec {
    fn default() -> Self {
        let p = |monomers: Vec<usize>, activity| PolymerSpec { monomers, activity, activity_im: 0.0 };
        Self { monomers: 2, polymers: vec![p(vec![0], 0.1), p(vec![1], 0.1), p(vec![0, 1], 0.05)] }
    }
}

impl GasSpec {
    pub fn gas(&self) -> Result<PolymerGas, UsageError> {
        PolymerGas::new(
            self.monomers,
            self.polymers.iter().map(|p| (p.monomers.clone(), Complex64::new(p.activity, p.activity_im))),
        )
        .map_err(|e| UsageError(format!("gas: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MayerConfig {
    pub n_max: usize,
    pub gas: GasSpec,
}

impl Default for MayerConfig {
    fn default() -> Self {
        Self { n_max: 4, gas: GasSpec::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    pub positivity_samples: usize,
    pub minor_trials: usize,
    pub domination_max_order: usize,
    pub random_gases: usize,
    pub forest_formula_tolerance: f64,
    pub minor_tolerance: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            positivity_samples: 1000,
            minor_trials: 20,
            domination_max_order: 3,
            random_gases: 100,
            forest_formula_tolerance: 1e-6,
            minor_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnumerateConfig {
    pub n_max: usize,
}

impl Default for EnumerateConfig {
    fn default() -> Self {
        Self { n_max: 6 }
    }
}

impl Config {
    /// Reads a config file, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self, UsageError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let config: Config = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        config.model.params()?;
        Ok(config)
    }
}
