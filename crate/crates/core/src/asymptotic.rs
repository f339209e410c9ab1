//! Approximate controls for general payoffs: small funding coefficient
//! (`nu_hat`), short horizon (`nu_tilde`) and the closed form evaluated at the
//! payoff-adjusted basis (`nu_bar`).

use serde::Serialize;

use crate::closed_form::ClosedForm;
use crate::error::Result;
use crate::model::{MarketState, ModelParams, PayoffSpec, Strategy};
use crate::ode::expectation::{gamma0, Gamma0Rule, Gamma0Table};
use crate::ode::quadrature::QuadratureRule;
use crate::riccati::RiccatiKernel;

/// Constants of the funding-free problem: `a = 2 sqrt(k phi)`,
/// `C = (a + b - 2 alpha) / (a - b + 2 alpha)`, `omega = a / 2k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TildeConstants {
    pub a: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub omega: f64,
}

/// First-order value coefficients in the funding coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaCoefficients {
    params: ModelParams,
    kern: RiccatiKernel,
}

impl GammaCoefficients {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            params: *params,
            kern: RiccatiKernel::tilde(params.k(), params.b(), params.alpha(), params.phi()),
        }
    }

    pub fn tilde_constants(&self) -> TildeConstants {
        let (a, c) = (self.kern.a, self.kern.c);
        TildeConstants {
            a,
            c: (a - c) / (a + c),
            omega: self.kern.omega,
        }
    }

    fn tau(&self, t: f64) -> f64 {
        self.params.horizon() - t
    }

    /// Coefficient of `q^2` in the funding-free value; equals `-alpha` at maturity.
    pub fn gamma(&self, t: f64) -> f64 {
        0.5 * self.kern.xi(self.tau(t)) - 0.5 * self.params.b()
    }

    /// Coefficient of `q p` in the first-order correction.
    pub fn gamma1(&self, t: f64) -> f64 {
        -self.kern.weight_integral(self.tau(t))
    }

    /// Coefficient of `q^2` in the first-order correction.
    pub fn gamma2(&self, t: f64) -> f64 {
        self.kern.gamma2(self.params.b(), self.tau(t))
    }

    /// Payoff-dependent coefficient of `q`.
    pub fn gamma0(&self, t: f64, s: f64, spec: &PayoffSpec, rule: &Gamma0Rule) -> Result<f64> {
        gamma0(t, s, &self.params, spec, rule)
    }

    /// Funding-free rate `(b + 2 gamma) q / 2k`.
    pub fn nu0(&self, t: f64, q: f64) -> f64 {
        (self.params.b() + 2.0 * self.gamma(t)) * q / (2.0 * self.params.k())
    }
}

/// Coefficients of the expansion of the value in powers of `T - t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallTCoefficients {
    pub h0: f64,
    pub h1: f64,
    pub h2: f64,
}

/// Short-horizon value coefficients at `(q, p, s)`. The last term of `h2`
/// carries `sigma^2 psi''(s)`, the generator of the spot acting on `psi(s) q`.
pub fn h_tilde(q: f64, p: f64, s: f64, params: &ModelParams, spec: &PayoffSpec) -> Result<SmallTCoefficients> {
    let (k, b, alpha, phi, beta) = (params.k(), params.b(), params.alpha(), params.phi(), params.beta());
    let sigma = params.sigma();
    let d = b - 2.0 * alpha;
    let spread = p - spec.value(s);
    let psi2 = spec.eval(s, 2)?;
    Ok(SmallTCoefficients {
        h0: -alpha * q * q,
        h1: (d * d / (4.0 * k) - phi) * q * q - beta * spread * q,
        h2: d / (4.0 * k) * (d * d / (2.0 * k) - 2.0 * phi - b * beta) * q * q
            + beta / 4.0 * (-(d / k) * spread + sigma * sigma * psi2) * q,
    })
}

/// Where `gamma0` comes from when evaluating `nu_hat`.
#[derive(Debug, Clone)]
enum Gamma0Source {
    /// Identity payoff: `gamma0 = -gamma1 s`.
    Identity,
    Table(Gamma0Table, Gamma0Rule),
    Direct(Gamma0Rule),
}

/// Control that is optimal to second order in the funding coefficient.
#[derive(Debug, Clone)]
pub struct NuHat {
    gammas: GammaCoefficients,
    spec: PayoffSpec,
    source: Gamma0Source,
}

impl NuHat {
    /// Evaluates `gamma0` by direct quadrature at every call unless the payoff is the identity.
    pub fn new(params: &ModelParams, spec: &PayoffSpec) -> Self {
        let source = if spec.is_identity() {
            Gamma0Source::Identity
        } else {
            Gamma0Source::Direct(Gamma0Rule {
                inner: QuadratureRule::for_payoff(spec),
                ..Gamma0Rule::default()
            })
        };
        Self {
            gammas: GammaCoefficients::new(params),
            spec: spec.clone(),
            source,
        }
    }

    /// Tabulates `gamma0` over `[0, T] x s_range`; states outside the table fall back to quadrature.
    pub fn with_table(
        params: &ModelParams,
        spec: &PayoffSpec,
        s_range: (f64, f64),
        n_t: usize,
        n_s: usize,
    ) -> Result<Self> {
        let mut nu = Self::new(params, spec);
        if let Gamma0Source::Direct(rule) = nu.source {
            let table = Gamma0Table::build(params, spec, s_range, n_t, n_s, &rule.inner)?;
            nu.source = Gamma0Source::Table(table, rule);
        }
        Ok(nu)
    }

    pub fn gammas(&self) -> &GammaCoefficients {
        &self.gammas
    }

    fn gamma0_at(&self, t: f64, s: f64) -> Result<f64> {
        match &self.source {
            Gamma0Source::Identity => Ok(-self.gammas.gamma1(t) * s),
            Gamma0Source::Table(table, rule) => match table.get(t, s) {
                Some(v) => Ok(v),
                None => self.gammas.gamma0(t, s, &self.spec, rule),
            },
            Gamma0Source::Direct(rule) => self.gammas.gamma0(t, s, &self.spec, rule),
        }
    }

    pub fn try_rate(&self, state: &MarketState) -> Result<f64> {
        let g = &self.gammas;
        let p = &g.params;
        let (t, q) = (state.t, state.q);
        let nu0 = g.nu0(t, q);
        if p.beta() == 0.0 {
            return Ok(nu0);
        }
        let g1 = g.gamma1(t);
        let linear = match self.source {
            Gamma0Source::Identity => g1 * state.z(),
            _ => self.gamma0_at(t, state.s)? + g1 * state.p,
        };
        let nu1 = (linear + (2.0 * g.gamma2(t) + p.b() * g1) * q) / (2.0 * p.k());
        Ok(nu0 + p.beta() * nu1)
    }
}

impl Strategy for NuHat {
    fn rate(&self, state: &MarketState) -> f64 {
        self.try_rate(state).unwrap_or(f64::NAN)
    }
    fn name(&self) -> &str {
        "nu_hat"
    }
}

/// Control that agrees with the optimum to first order in the horizon.
#[derive(Debug, Clone)]
pub struct NuTilde {
    params: ModelParams,
    spec: PayoffSpec,
}

impl NuTilde {
    pub fn new(params: &ModelParams, spec: &PayoffSpec) -> Self {
        Self {
            params: *params,
            spec: spec.clone(),
        }
    }

    /// Rate at maturity, `-(2 alpha - b) q / 2k`.
    pub fn terminal(&self, q: f64) -> f64 {
        -self.params.penalty_gap() / (2.0 * self.params.k()) * q
    }

    /// Slope of the rate in the time to maturity; it does not depend on `t`.
    pub fn slope(&self, q: f64, p: f64, s: f64) -> f64 {
        let p_ = &self.params;
        let (k, c) = (p_.k(), p_.penalty_gap());
        (c * c / (2.0 * k) - (p_.b() * p_.beta() + 2.0 * p_.phi())) * q / (2.0 * k)
            - p_.beta() / (2.0 * k) * (p - self.spec.value(s))
    }
}

impl Strategy for NuTilde {
    fn rate(&self, state: &MarketState) -> f64 {
        self.terminal(state.q) + (self.params.horizon() - state.t) * self.slope(state.q, state.p, state.s)
    }
    fn name(&self) -> &str {
        "nu_tilde"
    }
}

/// The identity-payoff optimum evaluated with the spot replaced by `psi(s)`.
#[derive(Debug, Clone)]
pub struct NuBar {
    cf: ClosedForm,
    spec: PayoffSpec,
}

impl NuBar {
    pub fn new(params: &ModelParams, spec: &PayoffSpec) -> Result<Self> {
        Ok(Self {
            cf: ClosedForm::new(params)?,
            spec: spec.clone(),
        })
    }
}

impl Strategy for NuBar {
    fn rate(&self, state: &MarketState) -> f64 {
        self.cf.rate(state.t, state.q, state.p - self.spec.value(state.s))
    }
    fn name(&self) -> &str {
        "nu_bar"
    }
}

pub fn nu_hat(state: &MarketState, params: &ModelParams, spec: &PayoffSpec) -> Result<f64> {
    NuHat::new(params, spec).try_rate(state)
}

pub fn nu_tilde(state: &MarketState, params: &ModelParams, spec: &PayoffSpec) -> f64 {
    NuTilde::new(params, spec).rate(state)
}

/// `nu*(t, q, p, psi(s))`; fails like `nu_star` when `b` is below the closed-form threshold.
pub fn nu_bar(state: &MarketState, params: &ModelParams, spec: &PayoffSpec) -> Result<f64> {
    let cf = ClosedForm::new(params)?;
    cf.nu_star(&MarketState {
        s: spec.value(state.s),
        ..*state
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{AlmgrenChriss, OptimalControl};
    use crate::model::{CustomPayoff, ParamsRecord, Strategy};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn short_params(horizon: f64) -> ModelParams {
        ModelParams::try_from(ParamsRecord::short_horizon(horizon)).unwrap()
    }

    fn inventory_params() -> ModelParams {
        ModelParams::try_from(ParamsRecord::inventory_density()).unwrap()
    }

    fn state_grid() -> Vec<MarketState> {
        let mut v = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                for l in 0..10 {
                    v.push(MarketState::new(
                        i as f64 / 9.0 * 0.999,
                        0.0,
                        -10.0 + 20.0 * j as f64 / 9.0,
                        95.0 + l as f64,
                        105.0 - 1.1 * l as f64,
                    ));
                }
            }
        }
        v
    }

    #[test]
    fn terminal_values() {
        for p in [inventory_params(), short_params(0.5)] {
            let g = GammaCoefficients::new(&p);
            let t = p.horizon();
            assert_relative_eq!(g.gamma(t), -p.alpha(), max_relative = 1e-15);
            assert_eq!(g.gamma1(t), 0.0);
            assert_eq!(g.gamma2(t), 0.0);
            let rule = Gamma0Rule::default();
            assert_eq!(g.gamma0(t, 100.0, &PayoffSpec::logistic_example(), &rule).unwrap(), 0.0);
        }
    }

    #[test]
    fn gamma1_matches_literal_expression() {
        let p = short_params(0.5);
        let g = GammaCoefficients::new(&p);
        let TildeConstants { c, omega: w, .. } = g.tilde_constants();
        for t in [0.0, 0.1, 0.3, 0.49] {
            let x = 0.5 - t;
            let lit = (c * (-w * x).exp() + 1.0) * ((-w * x).exp() - 1.0) / (w * (c * (-2.0 * w * x).exp() + 1.0));
            assert_relative_eq!(g.gamma1(t), lit, max_relative = 1e-12);
        }
    }

    #[test]
    fn gamma_has_the_riccati_sign() {
        let p = short_params(0.5);
        let g = GammaCoefficients::new(&p);
        let TildeConstants { a, c, omega: w } = g.tilde_constants();
        for t in [0.0, 0.25, 0.5] {
            let e = c * (-2.0 * w * (0.5 - t)).exp();
            let lit = a / 2.0 * (e - 1.0) / (e + 1.0) - p.b() / 2.0;
            assert_relative_eq!(g.gamma(t), lit, max_relative = 1e-13);
        }
    }

    #[test]
    fn h_tilde_examples() {
        let p = short_params(0.5);
        let id = PayoffSpec::Identity;
        let z = h_tilde(0.0, 101.0, 100.0, &p, &id).unwrap();
        assert_eq!((z.h0, z.h1, z.h2), (0.0, 0.0, 0.0));
        let h = h_tilde(10.0, 100.0, 100.0, &p, &id).unwrap();
        assert_relative_eq!(h.h0, -10.0, max_relative = 1e-15);
        assert_relative_eq!(h.h1, -0.475 * 100.0, max_relative = 1e-12);
        let h = h_tilde(10.0, 101.0, 100.0, &p, &id).unwrap();
        assert_relative_eq!(h.h1, -47.5 - 5.0 * 10.0, max_relative = 1e-12);
        let strict = PayoffSpec::custom(CustomPayoff::new(|s| s).without_finite_differences());
        assert!(h_tilde(1.0, 100.0, 100.0, &p, &strict).is_err());
    }

    #[test]
    fn nu_hat_without_funding_is_almgren_chriss() {
        let p = inventory_params().with_beta(0.0).unwrap();
        let ac = AlmgrenChriss::new(&p);
        for spec in [PayoffSpec::Identity, PayoffSpec::logistic_example()] {
            let nh = NuHat::new(&p, &spec);
            for s in state_grid() {
                let (a, b) = (nh.rate(&s), ac.rate(&s));
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn nu_hat_at_maturity() {
        let p = inventory_params();
        let nh = NuHat::new(&p, &PayoffSpec::Identity);
        let s = MarketState::new(1.0, 0.0, 4.0, 103.0, 100.0);
        assert_relative_eq!(nh.rate(&s), -(199.9 / 0.2) * 4.0, max_relative = 1e-14);
    }

    #[test]
    fn nu_hat_identity_shortcut_matches_quadrature() {
        let p = short_params(0.5);
        let fast = NuHat::new(&p, &PayoffSpec::Identity);
        let slow = NuHat::new(&p, &PayoffSpec::custom(CustomPayoff::new(|s| s)));
        for s in [
            MarketState::new(0.0, 0.0, 10.0, 100.0, 100.0),
            MarketState::new(0.2, 0.0, -3.0, 101.0, 99.5),
        ] {
            assert_relative_eq!(fast.rate(&s), slow.rate(&s), max_relative = 1e-9);
        }
    }

    #[test]
    fn nu_hat_table_matches_direct() {
        let p = short_params(0.2);
        let spec = PayoffSpec::logistic_example();
        let direct = NuHat::new(&p, &spec);
        let tab = NuHat::with_table(&p, &spec, (97.0, 103.0), 100, 600).unwrap();
        for s in [
            MarketState::new(0.0, 0.0, 10.0, 100.0, 100.0),
            MarketState::new(0.13, 0.0, 4.0, 100.3, 99.83),
            MarketState::new(0.1, 0.0, 4.0, 100.3, 130.0),
        ] {
            assert_relative_eq!(direct.rate(&s), tab.rate(&s), max_relative = 1e-4);
        }
    }

    #[test]
    fn nu_tilde_examples() {
        let p = short_params(0.5);
        let nt = NuTilde::new(&p, &PayoffSpec::quadratic_example());
        let s = MarketState::new(0.5, 0.0, 10.0, 100.0, 101.0);
        assert_relative_eq!(nt.rate(&s), -(0.1 / 0.2) * 10.0, max_relative = 1e-15);
        let raw = ParamsRecord {
            beta: 0.0,
            phi: 0.0,
            ..ParamsRecord::short_horizon(0.5)
        };
        let p0 = ModelParams::try_from(raw).unwrap();
        let nt0 = NuTilde::new(&p0, &PayoffSpec::Identity);
        let s = MarketState::new(0.2, 0.0, 10.0, 101.0, 100.0);
        let expect = -0.5 * 10.0 + 0.3 * 0.01 / 0.04 * 10.0;
        assert_relative_eq!(nt0.rate(&s), expect, max_relative = 1e-13);
    }

    #[test]
    fn nu_tilde_is_first_order_taylor_of_optimum() {
        let p = short_params(0.5);
        let nt = NuTilde::new(&p, &PayoffSpec::Identity);
        let opt = OptimalControl::new(&p).unwrap();
        let (q, pp, s) = (10.0, 100.7, 100.0);
        // nu*(T - h) = nu*(T) + h slope + O(h^2).
        let h = 1e-5;
        let near = MarketState::new(0.5 - h, 0.0, q, pp, s);
        let at_t = MarketState::new(0.5, 0.0, q, pp, s);
        let fd = (opt.rate(&near) - opt.rate(&at_t)) / h;
        assert_relative_eq!(fd, nt.slope(q, pp, s), max_relative = 1e-3);
    }

    #[test]
    fn nu_bar_identity_is_optimal_control() {
        let p = inventory_params();
        let nb = NuBar::new(&p, &PayoffSpec::Identity).unwrap();
        let opt = OptimalControl::new(&p).unwrap();
        for s in state_grid() {
            assert_eq!(nb.rate(&s).to_bits(), opt.rate(&s).to_bits());
            let star = crate::closed_form::nu_star(&s, &p).unwrap();
            assert!((nu_bar(&s, &p, &PayoffSpec::Identity).unwrap() - star).abs() <= 1e-12 * star.abs().max(1.0));
        }
    }

    #[test]
    fn nu_bar_at_zero_spread_is_pure_inventory_term() {
        let p = short_params(0.5);
        let spec = PayoffSpec::quadratic_example();
        let nb = NuBar::new(&p, &spec).unwrap();
        let cf = ClosedForm::new(&p).unwrap();
        let s = 100.4;
        let st = MarketState::new(0.2, 0.0, 6.0, spec.value(s), s);
        let expect = (cf.xi(0.2) + cf.pi(0.2)) * 6.0 / (4.0 * p.k());
        assert_relative_eq!(nb.rate(&st), expect, max_relative = 1e-13);
    }

    #[test]
    fn terminal_limits_coincide() {
        let p = short_params(0.5);
        let spec = PayoffSpec::logistic_example();
        let nb = NuBar::new(&p, &spec).unwrap();
        let nt = NuTilde::new(&p, &spec);
        for q in [-10.0, 0.0, 3.0, 10.0] {
            let s = MarketState::new(0.5, 0.0, q, 97.0, 104.0);
            assert_relative_eq!(nb.rate(&s), nt.rate(&s), max_relative = 1e-13, epsilon = 1e-13);
            assert_relative_eq!(nt.rate(&s), -0.5 * q, max_relative = 1e-15);
        }
    }

    proptest! {
        #[test]
        fn strategies_are_affine_in_q_and_spread(t in 0.0..0.5f64, q1 in -10.0..10.0f64, q2 in -10.0..10.0f64,
                                                  d1 in -3.0..3.0f64, d2 in -3.0..3.0f64, s in 97.0..103.0f64) {
            let p = short_params(0.5);
            let spec = PayoffSpec::logistic_example();
            let psi = spec.value(s);
            let nb = NuBar::new(&p, &spec).unwrap();
            let nt = NuTilde::new(&p, &spec);
            let st = |q: f64, d: f64| MarketState::new(t, 0.0, q, psi + d, s);
            for strat in [&nb as &dyn Strategy, &nt as &dyn Strategy] {
                // r(x1 + x2) = r(x1) + r(x2) - r(0) for an affine map.
                let lhs = strat.rate(&st(q1 + q2, d1 + d2));
                let rhs = strat.rate(&st(q1, d1)) + strat.rate(&st(q2, d2)) - strat.rate(&st(0.0, 0.0));
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
            }
            let nh = NuHat::new(&p, &PayoffSpec::Identity);
            let st = |q: f64, d: f64| MarketState::new(t, 0.0, q, s + d, s);
            let lhs = nh.rate(&st(q1 + q2, d1 + d2));
            let rhs = nh.rate(&st(q1, d1)) + nh.rate(&st(q2, d2)) - nh.rate(&st(0.0, 0.0));
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
