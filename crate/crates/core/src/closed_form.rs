//! Optimal feedback control for the identity payoff, the funding-free
//! baseline, and moments of the process `A = (b beta + 2 phi) Q + beta Z`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{MarketState, ModelParams, ParamsRecord, Strategy};
use crate::ode::quadrature::simpson;
use crate::ode::rk4::{graded_mesh, integrate_on, DEFAULT_H_STEPS};
use crate::riccati::RiccatiKernel;

/// Below this permanent impact `g = (xi - pi) / 2b` is obtained by integrating
/// the `(f, g)` equations instead of dividing by `b`.
pub const B_MIN: f64 = 1e-8;

pub const DEFAULT_VARIANCE_PANELS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormConstants {
    pub a: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub omega: f64,
    /// `sqrt(b beta + phi)`.
    pub m: f64,
}

/// `a = 2 sqrt(k (b beta + phi))`, `C = (a + b - 2 alpha) / (a - b + 2 alpha)`, `omega = a / 2k`.
pub fn constants(params: &ModelParams) -> Result<ClosedFormConstants> {
    let rate = params.b() * params.beta() + params.phi();
    if rate <= 0.0 {
        return Err(Error::DegenerateFrequency);
    }
    let a = 2.0 * (params.k() * rate).sqrt();
    Ok(ClosedFormConstants {
        a,
        c: (a + params.b() - 2.0 * params.alpha()) / (a - params.b() + 2.0 * params.alpha()),
        omega: a / (2.0 * params.k()),
        m: rate.sqrt(),
    })
}

/// Linearly interpolated `(f, g)` from direct integration, used when `b` is tiny.
#[derive(Debug, Clone, PartialEq)]
struct FgTable {
    t: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl FgTable {
    fn solve(params: &ModelParams, n_steps: usize) -> Result<Self> {
        let (k, b, beta, phi) = (params.k(), params.b(), params.beta(), params.phi());
        let horizon = params.horizon();
        let kern = RiccatiKernel::full(k, b, params.alpha(), phi, beta);
        let layer = 2.0 * k / params.penalty_gap().max(kern.a);
        let tau = graded_mesh(horizon, layer, n_steps);
        let rhs = move |_: f64, y: &[f64; 2]| {
            let s = b * y[1] + y[0];
            [y[0] * s / (2.0 * k) - (b * beta + 2.0 * phi), y[1] * s / (2.0 * k) - beta]
        };
        let states = integrate_on(rhs, [b - 2.0 * params.alpha(), 0.0], &tau)?;
        let mut table = FgTable {
            t: Vec::with_capacity(tau.len()),
            f: Vec::with_capacity(tau.len()),
            g: Vec::with_capacity(tau.len()),
        };
        for (x, y) in tau.iter().zip(&states).rev() {
            table.t.push(horizon - x);
            table.f.push(y[0]);
            table.g.push(y[1]);
        }
        table.t[0] = 0.0;
        Ok(table)
    }

    fn at(&self, t: f64) -> (f64, f64) {
        let n = self.t.len();
        let t = t.clamp(self.t[0], self.t[n - 1]);
        let j = self.t.partition_point(|&x| x <= t).min(n - 1).max(1);
        let i = j - 1;
        let w = (t - self.t[i]) / (self.t[j] - self.t[i]);
        (
            self.f[i] + w * (self.f[j] - self.f[i]),
            self.g[i] + w * (self.g[j] - self.g[i]),
        )
    }
}

/// Closed-form solution for a fixed parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    params: ModelParams,
    kern: RiccatiKernel,
    fg_table: Option<FgTable>,
}

impl ClosedForm {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let kern = RiccatiKernel::full(
            params.k(),
            params.b(),
            params.alpha(),
            params.phi(),
            params.beta(),
        );
        let fg_table = if params.b() <= B_MIN {
            Some(FgTable::solve(params, DEFAULT_H_STEPS)?)
        } else {
            None
        };
        Ok(Self {
            params: *params,
            kern,
            fg_table,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn tau(&self, t: f64) -> f64 {
        self.params.horizon() - t
    }

    pub fn xi(&self, t: f64) -> f64 {
        self.kern.xi(self.tau(t))
    }

    pub fn pi(&self, t: f64) -> f64 {
        self.kern.pi(self.tau(t))
    }

    /// Coefficients of `q` and `p - s` in `2k nu*`.
    pub fn fg(&self, t: f64) -> (f64, f64) {
        match &self.fg_table {
            Some(table) => table.at(t),
            // Without funding pi coincides with xi and g vanishes identically.
            None if self.params.beta() == 0.0 => (self.xi(t), 0.0),
            None => {
                let (xi, pi) = (self.xi(t), self.pi(t));
                (0.5 * (xi + pi), (xi - pi) / (2.0 * self.params.b()))
            }
        }
    }

    /// `(f q + g z) / 2k`, valid for every `b >= 0`.
    pub fn rate(&self, t: f64, q: f64, z: f64) -> f64 {
        let (f, g) = self.fg(t);
        (f * q + g * z) / (2.0 * self.params.k())
    }

    /// `((xi + pi) q + (xi - pi) z / b) / 4k`.
    pub fn nu_star(&self, state: &MarketState) -> Result<f64> {
        let b = self.params.b();
        if b <= B_MIN {
            return Err(Error::PermanentImpactZero { b });
        }
        let (xi, pi) = (self.xi(state.t), self.pi(state.t));
        Ok(((xi + pi) * state.q + (xi - pi) * state.z() / b) / (4.0 * self.params.k()))
    }

    /// `(A_0, Y_0)` with `A = (b beta + 2 phi) q + beta z` and `Y = (f q + g z) / sqrt(k)`.
    pub fn a_initial(&self, q0: f64, z0: f64) -> (f64, f64) {
        let p = &self.params;
        let (f, g) = self.fg(0.0);
        (
            (p.b() * p.beta() + 2.0 * p.phi()) * q0 + p.beta() * z0,
            (f * q0 + g * z0) / p.k().sqrt(),
        )
    }

    /// `cosh(omega t) A0 + m sinh(omega t) Y0`, evaluated literally.
    ///
    /// The two terms nearly cancel when `omega t` is large; prefer [`ClosedForm::a_mean`].
    pub fn a_mean_from(&self, t: f64, a0: f64, y0: f64) -> f64 {
        let w = self.kern.omega;
        let m = (self.params.b() * self.params.beta() + self.params.phi()).sqrt();
        (w * t).cosh() * a0 + m * (w * t).sinh() * y0
    }

    /// Mean of `A_t` under the optimal control started from `(q0, z0)` at time 0.
    ///
    /// Writes the mean as `0.5 e^{omega t} K + 0.5 e^{-omega t} (2 A0 - K)` and
    /// evaluates the growing coefficient `K` with exponentials of nonpositive
    /// arguments only.
    pub fn a_mean(&self, t: f64, q0: f64, z0: f64) -> f64 {
        let (a0, y0) = self.a_initial(q0, z0);
        let kern = &self.kern;
        let (a, w, c) = (kern.a, kern.omega, kern.c);
        if a == 0.0 {
            return a0;
        }
        let p = &self.params;
        if p.b() <= B_MIN {
            return self.a_mean_from(t, a0, y0);
        }
        let horizon = p.horizon();
        let phi = p.phi();
        let ds = kern.ds(horizon);
        let p1 = -w * c + 2.0 * phi * c / a;
        let p2 = 2.0 * phi - 2.0 * phi * c / a;
        let (cq, cz) = (0.5 * q0, z0 / (2.0 * p.b()));
        let n1 = (cq - cz) * p1;
        let n2 = (cq + cz) * w * (a - c) + (cq - cz) * p2;
        let e_t1 = (-w * (horizon - t)).exp();
        let e_t2 = (-w * (2.0 * horizon - t)).exp();
        let grow = (n1 * e_t1 + n2 * e_t2) / ds;
        let k_plus = (n1 * (-w * horizon).exp() + n2 * (-2.0 * w * horizon).exp()) / ds;
        0.5 * grow + 0.5 * (-w * t).exp() * (2.0 * a0 - k_plus)
    }

    /// Square root of the variance integrand at `(t, s)`, `s <= t`.
    fn variance_kernel(&self, t: f64, s: f64) -> f64 {
        let p = &self.params;
        let sig = p.basis_variance().sqrt();
        let (a, w, c) = (self.kern.a, self.kern.omega, self.kern.c);
        if a == 0.0 {
            return p.beta() * sig;
        }
        let cc = (a - c) / (a + c);
        let horizon = p.horizon();
        let e = (-w * (horizon - s)).exp();
        p.beta() * sig / (2.0 * (cc * e * e + 1.0))
            * ((w * (t - horizon)).exp() * (2.0 * cc * e - cc + 1.0)
                + (-w * (t - s)).exp() * ((cc - 1.0) * e + 2.0))
    }

    /// Variance of `A_t` under the optimal control.
    pub fn a_variance(&self, t: f64) -> f64 {
        self.a_variance_with(t, DEFAULT_VARIANCE_PANELS)
    }

    /// Variance with at least `panels` Simpson panels; more are used when
    /// `omega t` is large so that each panel spans at most a quarter of `1 / omega`.
    pub fn a_variance_with(&self, t: f64, panels: usize) -> f64 {
        if t <= 0.0 || self.params.beta() == 0.0 {
            return 0.0;
        }
        let needed = (4.0 * self.kern.omega * t).ceil() as usize;
        simpson(0.0, t, panels.max(needed), |s| {
            let v = self.variance_kernel(t, s);
            v * v
        })
    }
}

/// `xi(t)` for a parameter set.
pub fn xi(t: f64, params: &ModelParams) -> Result<f64> {
    Ok(ClosedForm::new(params)?.xi(t))
}

/// `pi(t)` for a parameter set.
pub fn pi(t: f64, params: &ModelParams) -> Result<f64> {
    Ok(ClosedForm::new(params)?.pi(t))
}

pub fn fg(t: f64, params: &ModelParams) -> Result<(f64, f64)> {
    Ok(ClosedForm::new(params)?.fg(t))
}

pub fn nu_star(state: &MarketState, params: &ModelParams) -> Result<f64> {
    ClosedForm::new(params)?.nu_star(state)
}

pub fn a_mean(t: f64, params: &ModelParams, q0: f64, z0: f64) -> Result<f64> {
    Ok(ClosedForm::new(params)?.a_mean(t, q0, z0))
}

pub fn a_variance(t: f64, params: &ModelParams) -> Result<f64> {
    Ok(ClosedForm::new(params)?.a_variance(t))
}

/// Optimal feedback control for the identity payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalControl {
    cf: ClosedForm,
}

impl OptimalControl {
    pub fn new(params: &ModelParams) -> Result<Self> {
        Ok(Self {
            cf: ClosedForm::new(params)?,
        })
    }

    pub fn closed_form(&self) -> &ClosedForm {
        &self.cf
    }
}

impl Strategy for OptimalControl {
    fn rate(&self, state: &MarketState) -> f64 {
        self.cf.rate(state.t, state.q, state.z())
    }
    fn name(&self) -> &str {
        "nu_star"
    }
}

/// Optimal liquidation when the funding rate is ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlmgrenChriss {
    kern: RiccatiKernel,
    horizon: f64,
}

impl AlmgrenChriss {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            kern: RiccatiKernel::tilde(params.k(), params.b(), params.alpha(), params.phi()),
            horizon: params.horizon(),
        }
    }

    /// Rate per unit inventory at time `t`.
    pub fn coefficient(&self, t: f64) -> f64 {
        self.kern.xi(self.horizon - t) / (2.0 * self.kern.k)
    }

    /// Deterministic inventory `q0 D(T - t) / D(T)` on an `n`-point uniform grid.
    pub fn inventory_path(&self, q0: f64, n: usize) -> Vec<(f64, f64)> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let t = self.horizon * i as f64 / (n - 1) as f64;
                (t, q0 * self.kern.decay_ratio(self.horizon - t, self.horizon))
            })
            .collect()
    }
}

impl Strategy for AlmgrenChriss {
    fn rate(&self, state: &MarketState) -> f64 {
        self.coefficient(state.t) * state.q
    }
    fn name(&self) -> &str {
        "almgren_chriss"
    }
}

pub fn almgren_chriss_rate(state: &MarketState, params: &ModelParams) -> f64 {
    AlmgrenChriss::new(params).rate(state)
}

pub fn ac_inventory_path(params: &ModelParams, q0: f64, n: usize) -> Vec<(f64, f64)> {
    AlmgrenChriss::new(params).inventory_path(q0, n)
}

/// Parameters with the funding coefficient removed, as seen by the baseline.
pub fn without_funding(params: &ModelParams) -> ModelParams {
    ModelParams::try_from(ParamsRecord {
        beta: 0.0,
        ..params.record()
    })
    .expect("removing funding keeps parameters valid")
}
