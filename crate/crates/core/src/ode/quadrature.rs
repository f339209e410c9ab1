use std::sync::{Arc, OnceLock};

use gauss_quad::{GaussHermite, GaussLegendre};

use crate::error::{Error, Result};
use crate::model::PayoffSpec;

pub const DEFAULT_HERMITE_NODES: usize = 40;

pub(crate) fn legendre16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16).expect("degree 16 is valid"))
}

/// Gauss–Hermite nodes and weights for `integral f(x) exp(-x^2) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermiteRule {
    pairs: Arc<Vec<(f64, f64)>>,
}

impl GaussHermiteRule {
    pub fn new(nodes: usize) -> Result<Self> {
        if nodes == DEFAULT_HERMITE_NODES {
            return Ok(Self::default());
        }
        Self::build(nodes)
    }

    fn build(nodes: usize) -> Result<Self> {
        let rule = GaussHermite::new(nodes)
            .map_err(|_| Error::Config(format!("Gauss-Hermite rule needs at least 2 nodes, got {nodes}")))?;
        Ok(Self {
            pairs: Arc::new(rule.as_node_weight_pairs().to_vec()),
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    /// `E[f(mean + sd Z)]` for standard normal `Z`.
    pub fn normal_expectation(&self, mean: f64, sd: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let scale = std::f64::consts::SQRT_2 * sd;
        let sum: f64 = self.pairs.iter().map(|&(x, w)| w * f(mean + scale * x)).sum();
        sum / std::f64::consts::PI.sqrt()
    }
}

impl Default for GaussHermiteRule {
    fn default() -> Self {
        static RULE: OnceLock<GaussHermiteRule> = OnceLock::new();
        RULE.get_or_init(|| Self::build(DEFAULT_HERMITE_NODES).expect("40 nodes is valid"))
            .clone()
    }
}

/// How a one-dimensional Gaussian expectation is computed.
#[derive(Debug, Clone, PartialEq)]
pub enum QuadratureRule {
    GaussHermite(GaussHermiteRule),
    /// Composite Simpson on `mean +- half_width * sd` against the normal density.
    Simpson { panels: usize, half_width: f64 },
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::GaussHermite(GaussHermiteRule::default())
    }
}

impl QuadratureRule {
    /// Gauss–Hermite for smooth payoffs; a dense Simpson rule for the logistic
    /// payoff, whose transition can be much narrower than the Hermite node spacing.
    pub fn for_payoff(spec: &PayoffSpec) -> Self {
        match spec {
            PayoffSpec::Logistic { .. } => QuadratureRule::Simpson {
                panels: 800,
                half_width: 10.0,
            },
            _ => QuadratureRule::default(),
        }
    }

    pub fn normal_expectation(&self, mean: f64, sd: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        match self {
            QuadratureRule::GaussHermite(rule) => rule.normal_expectation(mean, sd, f),
            &QuadratureRule::Simpson { panels, half_width } => {
                let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
                simpson(-half_width, half_width, panels, |x| {
                    norm * (-0.5 * x * x).exp() * f(mean + sd * x)
                })
            }
        }
    }
}

/// Composite Simpson rule with `panels` subintervals, each split at its midpoint.
pub fn simpson(a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let n = panels.max(1);
    let h = (b - a) / n as f64;
    if h == 0.0 {
        return 0.0;
    }
    let mut ends = f(a) + f(b);
    let mut mids = 0.0;
    for i in 0..n {
        let x = a + i as f64 * h;
        if i > 0 {
            ends += 2.0 * f(x);
        }
        mids += f(x + 0.5 * h);
    }
    h / 6.0 * (ends + 4.0 * mids)
}
