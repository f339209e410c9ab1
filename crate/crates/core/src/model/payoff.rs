use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// A real function of the spot price.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied payoff. Missing derivatives fall back to central differences
/// unless `finite_differences` is switched off.
#[derive(Clone)]
pub struct CustomPayoff {
    value: ScalarFn,
    first: Option<ScalarFn>,
    second: Option<ScalarFn>,
    finite_differences: bool,
}

impl CustomPayoff {
    pub fn new(value: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            first: None,
            second: None,
            finite_differences: true,
        }
    }

    pub fn with_first(mut self, d1: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.first = Some(Arc::new(d1));
        self
    }

    pub fn with_second(mut self, d2: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.second = Some(Arc::new(d2));
        self
    }

    /// Disables the finite-difference fallback so that missing derivatives are errors.
    pub fn without_finite_differences(mut self) -> Self {
        self.finite_differences = false;
        self
    }

    /// Step used by the finite-difference fallback.
    pub fn fd_step(s: f64) -> f64 {
        1e-4 * s.abs().max(1.0)
    }

    fn eval(&self, s: f64, order: u8) -> Result<f64> {
        let f = &self.value;
        match order {
            0 => Ok(f(s)),
            1 => match (&self.first, self.finite_differences) {
                (Some(d), _) => Ok(d(s)),
                (None, true) => {
                    let h = Self::fd_step(s);
                    Ok((f(s + h) - f(s - h)) / (2.0 * h))
                }
                (None, false) => Err(Error::MissingDerivative { order }),
            },
            2 => match (&self.second, self.finite_differences) {
                (Some(d), _) => Ok(d(s)),
                (None, true) => {
                    let h = Self::fd_step(s);
                    Ok((f(s + h) - 2.0 * f(s) + f(s - h)) / (h * h))
                }
                (None, false) => Err(Error::MissingDerivative { order }),
            },
            _ => Err(Error::InvalidDerivativeOrder(order)),
        }
    }
}

impl fmt::Debug for CustomPayoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPayoff")
            .field("first", &self.first.is_some())
            .field("second", &self.second.is_some())
            .field("finite_differences", &self.finite_differences)
            .finish()
    }
}

/// The payoff `psi` that the funding rate references.
///
/// Built-in variants are bounded perturbations of the identity (or, for
/// `Quadratic`, a convex one) and carry analytic derivatives. Boundedness of
/// `psi(s) - s` is the caller's responsibility for custom payoffs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffSpec {
    #[default]
    Identity,
    /// `s + 2L / (1 + exp(-kappa (s - s0 - delta_s)))`
    Logistic {
        #[serde(rename = "L")]
        l: f64,
        kappa: f64,
        s0: f64,
        delta_s: f64,
    },
    /// `s + L (s - s0 - delta_s)^2 + delta_psi`
    Quadratic {
        #[serde(rename = "L")]
        l: f64,
        s0: f64,
        delta_s: f64,
        delta_psi: f64,
    },
    #[serde(skip)]
    Custom(CustomPayoff),
}

/// Built-in variants compare by value; custom payoffs only equal themselves.
impl PartialEq for PayoffSpec {
    fn eq(&self, other: &Self) -> bool {
        use PayoffSpec::*;
        match (self, other) {
            (Identity, Identity) => true,
            (
                Logistic { l, kappa, s0, delta_s },
                Logistic {
                    l: l2,
                    kappa: k2,
                    s0: s2,
                    delta_s: d2,
                },
            ) => (l, kappa, s0, delta_s) == (l2, k2, s2, d2),
            (
                Quadratic {
                    l,
                    s0,
                    delta_s,
                    delta_psi,
                },
                Quadratic {
                    l: l2,
                    s0: s2,
                    delta_s: d2,
                    delta_psi: p2,
                },
            ) => (l, s0, delta_s, delta_psi) == (l2, s2, d2, p2),
            (Custom(a), Custom(b)) => Arc::ptr_eq(&a.value, &b.value),
            _ => false,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl PayoffSpec {
    /// Logistic payoff of the short-horizon experiments.
    pub const fn logistic_example() -> Self {
        PayoffSpec::Logistic {
            l: 1.0,
            kappa: 10.0,
            s0: 100.0,
            delta_s: -0.1,
        }
    }

    /// Quadratic payoff of the short-horizon experiments.
    pub const fn quadratic_example() -> Self {
        PayoffSpec::Quadratic {
            l: 5.0,
            s0: 100.0,
            delta_s: 0.2,
            delta_psi: -2.0,
        }
    }

    pub fn custom(payoff: CustomPayoff) -> Self {
        PayoffSpec::Custom(payoff)
    }

    /// Variant name as used in configuration documents.
    pub fn kind(&self) -> &'static str {
        match self {
            PayoffSpec::Identity => "identity",
            PayoffSpec::Logistic { .. } => "logistic",
            PayoffSpec::Quadratic { .. } => "quadratic",
            PayoffSpec::Custom(_) => "custom",
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, PayoffSpec::Identity)
    }

    /// `psi(s)`, `psi'(s)` or `psi''(s)` for `order` 0, 1, 2.
    pub fn eval(&self, s: f64, order: u8) -> Result<f64> {
        if order > 2 {
            return Err(Error::InvalidDerivativeOrder(order));
        }
        Ok(match self {
            PayoffSpec::Identity => match order {
                0 => s,
                1 => 1.0,
                _ => 0.0,
            },
            &PayoffSpec::Logistic {
                l,
                kappa,
                s0,
                delta_s,
            } => {
                let sg = sigmoid(kappa * (s - s0 - delta_s));
                match order {
                    0 => s + 2.0 * l * sg,
                    1 => 1.0 + 2.0 * l * kappa * sg * (1.0 - sg),
                    _ => 2.0 * l * kappa * kappa * sg * (1.0 - sg) * (1.0 - 2.0 * sg),
                }
            }
            &PayoffSpec::Quadratic {
                l,
                s0,
                delta_s,
                delta_psi,
            } => {
                let d = s - s0 - delta_s;
                match order {
                    0 => s + l * d * d + delta_psi,
                    1 => 1.0 + 2.0 * l * d,
                    _ => 2.0 * l,
                }
            }
            PayoffSpec::Custom(c) => return c.eval(s, order),
        })
    }

    /// `psi(s)`; infallible for every variant.
    pub fn value(&self, s: f64) -> f64 {
        match self {
            PayoffSpec::Custom(c) => (c.value)(s),
            _ => self.eval(s, 0).expect("order 0 is always available"),
        }
    }
}

/// Shorthand for [`PayoffSpec::eval`].
pub fn payoff_eval(spec: &PayoffSpec, s: f64, order: u8) -> Result<f64> {
    spec.eval(s, order)
}

/// Funding cash-flow intensity `beta (p - psi(s))` paid by a long position.
pub fn funding_rate(params: &ModelParams, spec: &PayoffSpec, p: f64, s: f64) -> f64 {
    params.beta() * (p - spec.value(s))
}
