//! Optimal liquidation of perpetual contracts under a funding rate.
//!
//! The crate covers the model definitions, the closed-form optimal control for
//! the identity payoff, asymptotic controls for general payoffs, a backward
//! ODE solver for the value coefficients, and a reproducible Monte Carlo
//! simulator.

// `!(a < b)` is used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod closed_form;
pub mod error;
pub mod model;
pub mod ode;
pub mod sim;
pub mod strategy;
pub mod validation;
mod riccati;

pub use asymptotic::{h_tilde, nu_bar, nu_hat, nu_tilde, GammaCoefficients, NuBar, NuHat, NuTilde, SmallTCoefficients};
pub use closed_form::{
    ac_inventory_path, almgren_chriss_rate, constants, AlmgrenChriss, ClosedForm, ClosedFormConstants,
    OptimalControl, B_MIN,
};
pub use error::{Error, Result};
pub use model::{
    funding_rate, payoff_eval, validate_params, ConstantRate, CustomPayoff, MarketState, ModelParams,
    ParamsRecord, PayoffSpec, Strategy,
};
pub use ode::{solve_h_system, value_identity, HCoefficients};
pub use sim::{run_ensemble, run_ensemble_with_workers, simulate_path, PathEnsemble, PathRecord, SimConfig};
pub use strategy::StrategyKind;
