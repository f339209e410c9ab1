//! Named strategies, selectable from configuration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::asymptotic::{NuBar, NuHat, NuTilde};
use crate::closed_form::{AlmgrenChriss, OptimalControl};
use crate::error::{Error, Result};
use crate::model::{MarketState, ModelParams, PayoffSpec, Strategy};

/// Grid used to tabulate `gamma0` for non-identity payoffs.
pub const NU_HAT_TABLE_T: usize = 101;
pub const NU_HAT_TABLE_S: usize = 161;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    NuStar,
    NuHat,
    NuTilde,
    NuBar,
    AlmgrenChriss,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::NuStar,
        StrategyKind::NuHat,
        StrategyKind::NuTilde,
        StrategyKind::NuBar,
        StrategyKind::AlmgrenChriss,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::NuStar => "nu_star",
            StrategyKind::NuHat => "nu_hat",
            StrategyKind::NuTilde => "nu_tilde",
            StrategyKind::NuBar => "nu_bar",
            StrategyKind::AlmgrenChriss => "almgren_chriss",
        }
    }

    /// Build the strategy for `params` and `spec`. `initial` centres the `gamma0`
    /// table used by `nu_hat` on `s0 +- max(8 sigma sqrt(T), 1)`.
    pub fn build(self, params: &ModelParams, spec: &PayoffSpec, initial: &MarketState) -> Result<Box<dyn Strategy>> {
        Ok(match self {
            StrategyKind::NuStar => {
                if !spec.is_identity() {
                    return Err(Error::Config(
                        "nu_star is optimal only for the identity payoff; use nu_bar for other payoffs".into(),
                    ));
                }
                Box::new(OptimalControl::new(params)?)
            }
            StrategyKind::NuHat => {
                let half = (8.0 * params.sigma() * params.horizon().sqrt()).max(1.0);
                let range = (initial.s - half, initial.s + half);
                Box::new(NuHat::with_table(params, spec, range, NU_HAT_TABLE_T, NU_HAT_TABLE_S)?)
            }
            StrategyKind::NuTilde => Box::new(NuTilde::new(params, spec)),
            StrategyKind::NuBar => Box::new(NuBar::new(params, spec)?),
            StrategyKind::AlmgrenChriss => Box::new(AlmgrenChriss::new(params)),
        })
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}
