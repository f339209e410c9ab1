use thiserror::Error;

/// Errors raised by parameter validation, payoff evaluation and the numerical engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("parameter `{name}` must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },

    #[error("parameter `{name}` must be finite")]
    NonFiniteParam { name: &'static str },

    #[error("correlation rho must lie in (-1, 1), got {0}")]
    RhoOutOfRange(f64),

    #[error("terminal penalty must dominate permanent impact (2*alpha > b), got alpha={alpha}, b={b}")]
    ImpactPenaltyOrder { alpha: f64, b: f64 },

    #[error("payoff derivative of order {order} is not available")]
    MissingDerivative { order: u8 },

    #[error("payoff derivative order must be 0, 1 or 2, got {0}")]
    InvalidDerivativeOrder(u8),

    #[error("b*beta + phi = 0: the closed-form frequency is degenerate")]
    DegenerateFrequency,

    #[error("permanent impact b={b} is below the closed-form threshold; use the (f, g) path")]
    PermanentImpactZero { b: f64 },

    #[error("time {t} lies outside the coefficient grid [{start}, {end}]")]
    TimeOutOfGrid { t: f64, start: f64, end: f64 },

    #[error("numerical state left the finite range: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
