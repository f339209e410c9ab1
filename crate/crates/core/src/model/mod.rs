mod params;
mod payoff;
mod state;

pub use params::{validate_params, ModelParams, ParamsRecord};
pub use payoff::{funding_rate, payoff_eval, CustomPayoff, PayoffSpec, ScalarFn};
pub use state::{ConstantRate, MarketState, Strategy};
