use serde::{Deserialize, Serialize};

/// Trader and market state at a single instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketState {
    pub t: f64,
    /// Cash.
    pub x: f64,
    /// Inventory in contract units.
    pub q: f64,
    /// Perpetual midprice.
    pub p: f64,
    /// Spot price.
    pub s: f64,
}

impl MarketState {
    pub const fn new(t: f64, x: f64, q: f64, p: f64, s: f64) -> Self {
        Self { t, x, q, p, s }
    }

    /// Basis `p - s`.
    pub fn z(&self) -> f64 {
        self.p - self.s
    }

    pub fn at(self, t: f64) -> Self {
        Self { t, ..self }
    }
}

impl Default for MarketState {
    fn default() -> Self {
        Self::new(0.0, 0.0, 10.0, 100.0, 100.0)
    }
}

/// A feedback trading rule. Negative rates sell.
pub trait Strategy: Send + Sync {
    fn rate(&self, state: &MarketState) -> f64;

    fn name(&self) -> &str;
}

impl<S: Strategy + ?Sized> Strategy for Box<S> {
    fn rate(&self, state: &MarketState) -> f64 {
        (**self).rate(state)
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<S: Strategy + ?Sized> Strategy for &S {
    fn rate(&self, state: &MarketState) -> f64 {
        (**self).rate(state)
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Trades at a fixed rate regardless of state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantRate(pub f64);

impl Strategy for ConstantRate {
    fn rate(&self, _: &MarketState) -> f64 {
        self.0
    }
    fn name(&self) -> &str {
        "constant"
    }
}
