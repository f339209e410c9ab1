mod compare;
mod figure;
mod simulate;
mod solve;
mod validate;

use std::path::PathBuf;

use perpliq::validation::DEFAULT_SEED;
use perpliq::{MarketState, ModelParams, ParamsRecord, PathEnsemble, PayoffSpec, SimConfig, Strategy, StrategyKind};

use crate::config::{ExperimentConfig, Overrides};
use crate::error::CliResult;
use crate::output::Artifacts;

pub use compare::compare;
pub use figure::figure;
pub use simulate::simulate;
pub use solve::solve;
pub use validate::validate;

/// Everything a command needs besides its own arguments.
pub struct Context {
    pub config: ExperimentConfig,
    pub overrides: Overrides,
    pub out_root: PathBuf,
}

impl Context {
    pub fn artifacts(&self, command: &str) -> CliResult<Artifacts> {
        Artifacts::create(&self.out_root, command)
    }
}

pub(crate) fn build(kind: StrategyKind, params: &ModelParams, payoff: &PayoffSpec, sim: &SimConfig) -> CliResult<Box<dyn Strategy>> {
    Ok(kind.build(params, payoff, &sim.initial)?)
}

pub(crate) fn run(
    kind: StrategyKind,
    params: &ModelParams,
    payoff: &PayoffSpec,
    sim: &SimConfig,
) -> CliResult<PathEnsemble> {
    let strategy = build(kind, params, payoff, sim)?;
    Ok(perpliq::run_ensemble(strategy.as_ref(), params, payoff, sim)?)
}

/// Horizons swept by figure 5 and `compare` unless the config lists its own.
pub const DEFAULT_HORIZONS: [f64; 6] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5];

/// Simulation defaults of a command; the seed is shared with `validate`.
pub(crate) fn sim_defaults(n_steps: usize, n_paths: usize, record_stride: usize) -> SimConfig {
    SimConfig {
        n_steps,
        n_paths,
        seed: DEFAULT_SEED,
        initial: MarketState::default(),
        record_stride,
        antithetic: false,
    }
}

/// `base` with its horizon replaced.
pub(crate) fn at_horizon(base: ParamsRecord, horizon: f64) -> CliResult<ModelParams> {
    Ok(perpliq::validate_params(&ParamsRecord { horizon, ..base })?)
}

/// The optimal control when it exists for `payoff`, otherwise its payoff-adjusted version.
pub(crate) fn default_strategy(payoff: &PayoffSpec) -> StrategyKind {
    if payoff.is_identity() {
        StrategyKind::NuStar
    } else {
        StrategyKind::NuBar
    }
}

/// Long-format density rows `(t, x, density)` of a set of cross sections.
pub(crate) fn density_rows(slices: &[perpliq::sim::CrossSection]) -> Vec<Vec<String>> {
    use crate::output::num;
    let mut rows = Vec::new();
    for sl in slices {
        let centers = sl.histogram.bin_centers();
        for (x, d) in centers.iter().zip(sl.histogram.density()) {
            rows.push(vec![num(sl.t), num(*x), num(d)]);
        }
    }
    rows
}
