use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unvalidated parameter record, as read from a configuration document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsRecord {
    /// Horizon length.
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Temporary impact coefficient.
    pub k: f64,
    /// Permanent impact coefficient.
    pub b: f64,
    /// Terminal liquidation penalty.
    pub alpha: f64,
    /// Running inventory penalty.
    pub phi: f64,
    /// Funding rate coefficient.
    pub beta: f64,
    /// Spot volatility.
    pub sigma: f64,
    /// Perpetual volatility.
    pub eta: f64,
    /// Correlation between the spot and perpetual Brownian motions.
    pub rho: f64,
}

impl ParamsRecord {
    /// Parameters used for the inventory density experiment (P0 = 101, 100, 99).
    pub const fn inventory_density() -> Self {
        Self {
            horizon: 1.0,
            k: 0.1,
            b: 0.1,
            alpha: 100.0,
            phi: 0.5,
            beta: 5.0,
            sigma: 1.0,
            eta: 1.0,
            rho: 0.3,
        }
    }

    /// Parameters used for the A-process experiments; `k` is swept by the caller.
    pub const fn a_process(k: f64) -> Self {
        Self {
            horizon: 5.0,
            k,
            ..Self::inventory_density()
        }
    }

    /// Parameters used for the short-horizon strategy comparison.
    pub const fn short_horizon(horizon: f64) -> Self {
        Self {
            horizon,
            alpha: 0.1,
            ..Self::inventory_density()
        }
    }
}

impl Default for ParamsRecord {
    fn default() -> Self {
        Self::inventory_density()
    }
}

/// Validated market and preference constants.
///
/// Construction goes through [`validate_params`]; every instance satisfies
/// `k, alpha, T > 0`, `phi, beta, sigma, eta >= 0`, `|rho| < 1` and `2 alpha > b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRecord", into = "ParamsRecord")]
pub struct ModelParams {
    horizon: f64,
    k: f64,
    b: f64,
    alpha: f64,
    phi: f64,
    beta: f64,
    sigma: f64,
    eta: f64,
    rho: f64,
}

/// Checks a raw record against the model invariants.
pub fn validate_params(raw: &ParamsRecord) -> Result<ModelParams> {
    let fields = [
        ("T", raw.horizon),
        ("k", raw.k),
        ("b", raw.b),
        ("alpha", raw.alpha),
        ("phi", raw.phi),
        ("beta", raw.beta),
        ("sigma", raw.sigma),
        ("eta", raw.eta),
        ("rho", raw.rho),
    ];
    for (name, value) in fields {
        if !value.is_finite() {
            return Err(Error::NonFiniteParam { name });
        }
    }
    for (name, value) in [("k", raw.k), ("alpha", raw.alpha), ("T", raw.horizon)] {
        if value <= 0.0 {
            return Err(Error::NonPositive { name, value });
        }
    }
    for (name, value) in [
        ("b", raw.b),
        ("phi", raw.phi),
        ("beta", raw.beta),
        ("sigma", raw.sigma),
        ("eta", raw.eta),
    ] {
        if value < 0.0 {
            return Err(Error::Negative { name, value });
        }
    }
    if !(raw.rho > -1.0 && raw.rho < 1.0) {
        return Err(Error::RhoOutOfRange(raw.rho));
    }
    if 2.0 * raw.alpha <= raw.b {
        return Err(Error::ImpactPenaltyOrder {
            alpha: raw.alpha,
            b: raw.b,
        });
    }
    Ok(ModelParams {
        horizon: raw.horizon,
        k: raw.k,
        b: raw.b,
        alpha: raw.alpha,
        phi: raw.phi,
        beta: raw.beta,
        sigma: raw.sigma,
        eta: raw.eta,
        rho: raw.rho,
    })
}

impl TryFrom<ParamsRecord> for ModelParams {
    type Error = Error;

    fn try_from(raw: ParamsRecord) -> Result<Self> {
        validate_params(&raw)
    }
}

impl From<ModelParams> for ParamsRecord {
    fn from(p: ModelParams) -> Self {
        p.record()
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        validate_params(&ParamsRecord::inventory_density()).expect("built-in parameters are valid")
    }
}

impl ModelParams {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Variance rate of the basis `Z = P - S`: `sigma^2 + eta^2 - 2 rho sigma eta`.
    pub fn basis_variance(&self) -> f64 {
        self.sigma * self.sigma + self.eta * self.eta - 2.0 * self.rho * self.sigma * self.eta
    }

    /// `2 alpha - b`, strictly positive.
    pub fn penalty_gap(&self) -> f64 {
        2.0 * self.alpha - self.b
    }

    pub fn record(&self) -> ParamsRecord {
        ParamsRecord {
            horizon: self.horizon,
            k: self.k,
            b: self.b,
            alpha: self.alpha,
            phi: self.phi,
            beta: self.beta,
            sigma: self.sigma,
            eta: self.eta,
            rho: self.rho,
        }
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        validate_params(&ParamsRecord {
            beta,
            ..self.record()
        })
    }

    pub fn with_k(&self, k: f64) -> Result<Self> {
        validate_params(&ParamsRecord { k, ..self.record() })
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        validate_params(&ParamsRecord {
            horizon,
            ..self.record()
        })
    }
}
