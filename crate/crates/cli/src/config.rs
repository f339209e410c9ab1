//! JSON experiment configuration. Every block is optional; missing values fall
//! back to the defaults of the command being run.

use std::path::{Path, PathBuf};

use perpliq::{MarketState, ModelParams, ParamsRecord, PayoffSpec, SimConfig, StrategyKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: Option<ParamsRecord>,
    pub payoff: Option<PayoffSpec>,
    pub sim: Option<SimBlock>,
    /// Strategy for `simulate`.
    pub strategy: Option<StrategyKind>,
    /// Strategies for `compare`.
    pub strategies: Option<Vec<StrategyKind>>,
    /// Temporary impact sweep for figures 2 and 3.
    pub k_values: Option<Vec<f64>>,
    /// Horizon sweep for figure 5 and `compare`.
    pub horizons: Option<Vec<f64>>,
    /// Initial perpetual prices for figure 1.
    pub p0_values: Option<Vec<f64>>,
    /// Number of time points in the `solve` closed-form grid.
    pub grid_points: Option<usize>,
    /// Spot range and point count for figure 4.
    pub s_range: Option<[f64; 2]>,
    pub s_points: Option<usize>,
    /// Criteria run by `validate`; all when absent.
    pub criteria: Option<Vec<u8>>,
    pub out_dir: Option<PathBuf>,
}

/// Simulation settings; absent fields take the command's defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub n_steps: Option<usize>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
    pub initial: Option<MarketState>,
    pub record_stride: Option<usize>,
    pub antithetic: Option<bool>,
}

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
    pub n_steps: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        if let Some(p) = &cfg.params {
            perpliq::validate_params(p)?;
        }
        Ok(cfg)
    }

    pub fn params_or(&self, default: ParamsRecord) -> CliResult<ModelParams> {
        Ok(perpliq::validate_params(&self.params.unwrap_or(default))?)
    }

    pub fn payoff_or(&self, default: PayoffSpec) -> PayoffSpec {
        self.payoff.clone().unwrap_or(default)
    }

    /// Merge command defaults, the `sim` block and command-line overrides, in rising priority.
    pub fn sim_config(&self, defaults: SimConfig, ov: &Overrides) -> CliResult<SimConfig> {
        let b = self.sim.unwrap_or_default();
        let cfg = SimConfig {
            n_steps: ov.n_steps.or(b.n_steps).unwrap_or(defaults.n_steps),
            n_paths: ov.n_paths.or(b.n_paths).unwrap_or(defaults.n_paths),
            seed: ov.seed.or(b.seed).unwrap_or(defaults.seed),
            initial: b.initial.unwrap_or(defaults.initial),
            record_stride: b.record_stride.unwrap_or(defaults.record_stride),
            antithetic: b.antithetic.unwrap_or(defaults.antithetic),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
