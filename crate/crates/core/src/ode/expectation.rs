use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ModelParams, PayoffSpec};
use crate::ode::quadrature::{simpson, QuadratureRule};
use crate::riccati::RiccatiKernel;

pub const DEFAULT_GAMMA0_PANELS: usize = 200;

/// `E[psi(s + sqrt(var) Z)]` for standard normal `Z`.
pub fn gaussian_expectation(spec: &PayoffSpec, s: f64, var: f64, rule: &QuadratureRule) -> f64 {
    if var <= 0.0 {
        return spec.value(s);
    }
    if spec.is_identity() {
        return s;
    }
    rule.normal_expectation(s, var.sqrt(), |x| spec.value(x))
}

/// Quadrature settings for the payoff-weighted time integral.
#[derive(Debug, Clone, PartialEq)]
pub struct Gamma0Rule {
    pub inner: QuadratureRule,
    pub panels: usize,
}

impl Default for Gamma0Rule {
    fn default() -> Self {
        Self {
            inner: QuadratureRule::default(),
            panels: DEFAULT_GAMMA0_PANELS,
        }
    }
}

fn check_time(t: f64, horizon: f64) -> Result<()> {
    if t >= 0.0 && t <= horizon {
        Ok(())
    } else {
        Err(Error::TimeOutOfGrid {
            t,
            start: 0.0,
            end: horizon,
        })
    }
}

/// Integral over `u in [t, T]` of `D(T - u) / D(T - t) * E[psi(S_u) | S_t = s]`, where `D`
/// is the funding-free Riccati kernel. At `phi = 0` the kernel ratio tends to
/// `(2k + c (T - u)) / (2k + c (T - t))`, which is what gets evaluated.
///
/// The quadrature computes the kernel-weighted average of the expectation and
/// scales it by the exact kernel integral, so the steep terminal layer of the
/// kernel at large `alpha` only enters through that average.
pub fn gamma0(
    t: f64,
    s: f64,
    params: &ModelParams,
    spec: &PayoffSpec,
    rule: &Gamma0Rule,
) -> Result<f64> {
    let horizon = params.horizon();
    check_time(t, horizon)?;
    let kern = RiccatiKernel::tilde(params.k(), params.b(), params.alpha(), params.phi());
    let tau_t = horizon - t;
    let total = kern.weight_integral(tau_t);
    if spec.is_identity() {
        return Ok(s * total);
    }
    if tau_t == 0.0 {
        return Ok(0.0);
    }
    let sig2 = params.sigma() * params.sigma();
    let weight = |u: f64| kern.decay_ratio(horizon - u, tau_t);
    let num = simpson(t, horizon, rule.panels, |u| {
        weight(u) * gaussian_expectation(spec, s, sig2 * (u - t), &rule.inner)
    });
    let den = simpson(t, horizon, rule.panels, weight);
    Ok(total * num / den)
}

/// `gamma0` tabulated on a uniform `(t, s)` grid.
///
/// The table holds the kernel-weighted average of the payoff expectation,
/// interpolated linearly in `t` and with four-point Lagrange in `s`; lookups
/// multiply it by the exact kernel integral. On a uniform time grid the
/// conditional expectation only depends on the lag `u - t`, so one column of
/// expectations per lag serves every row.
#[derive(Debug, Clone)]
pub struct Gamma0Table {
    horizon: f64,
    kern: RiccatiKernel,
    s_min: f64,
    ds: f64,
    n_t: usize,
    n_s: usize,
    /// Row-major `(n_t + 1) x (n_s + 1)`.
    averages: Vec<f64>,
}

impl Gamma0Table {
    pub fn build(
        params: &ModelParams,
        spec: &PayoffSpec,
        s_range: (f64, f64),
        n_t: usize,
        n_s: usize,
        inner: &QuadratureRule,
    ) -> Result<Self> {
        let (s_min, s_max) = s_range;
        if !(s_max > s_min) || n_t < 1 || n_s < 3 {
            return Err(Error::Config(format!(
                "gamma0 table needs s_max > s_min, n_t >= 1 and n_s >= 3, got [{s_min}, {s_max}], {n_t}x{n_s}"
            )));
        }
        let horizon = params.horizon();
        let kern = RiccatiKernel::tilde(params.k(), params.b(), params.alpha(), params.phi());
        let h = horizon / n_t as f64;
        let ds = (s_max - s_min) / n_s as f64;
        let sig2 = params.sigma() * params.sigma();
        let s_at = |j: usize| s_min + j as f64 * ds;

        // lag_exp[l * (n_s + 1) + j] = E[psi(s_j + sigma sqrt(l h) Z)]
        let lag_exp: Vec<f64> = (0..=n_t)
            .into_par_iter()
            .flat_map_iter(|l| {
                (0..=n_s).map(move |j| gaussian_expectation(spec, s_at(j), sig2 * l as f64 * h, inner))
            })
            .collect();

        let row_len = n_s + 1;
        let averages: Vec<f64> = (0..=n_t)
            .into_par_iter()
            .flat_map_iter(|i| {
                let tau_t = horizon - i as f64 * h;
                let weights = interval_weights(n_t - i, h);
                let mut kernel: Vec<f64> = (0..weights.len())
                    .map(|l| weights[l] * kern.decay_ratio(tau_t - l as f64 * h, tau_t))
                    .collect();
                let norm: f64 = kernel.iter().sum();
                if norm > 0.0 {
                    kernel.iter_mut().for_each(|w| *w /= norm);
                } else {
                    kernel = vec![1.0];
                }
                let lag_exp = &lag_exp;
                (0..row_len).map(move |j| {
                    kernel
                        .iter()
                        .enumerate()
                        .map(|(l, w)| w * lag_exp[l * row_len + j])
                        .sum::<f64>()
                })
            })
            .collect();
        Ok(Self {
            horizon,
            kern,
            s_min,
            ds,
            n_t,
            n_s,
            averages,
        })
    }

    pub fn s_range(&self) -> (f64, f64) {
        (self.s_min, self.s_min + self.n_s as f64 * self.ds)
    }

    pub fn contains(&self, s: f64) -> bool {
        let (lo, hi) = self.s_range();
        s >= lo && s <= hi
    }

    /// Interpolated value, or `None` when `(t, s)` lies outside the table.
    pub fn get(&self, t: f64, s: f64) -> Option<f64> {
        if !(t >= 0.0 && t <= self.horizon) || !self.contains(s) {
            return None;
        }
        let x = t / self.horizon * self.n_t as f64;
        let y = (s - self.s_min) / self.ds;
        let i = (x.floor() as usize).min(self.n_t - 1);
        let wx = x - i as f64;
        let j0 = (y.floor() as usize).saturating_sub(1).min(self.n_s - 3);
        let lagrange = lagrange4(y - j0 as f64);
        let row = self.n_s + 1;
        let along_s = |a: usize| -> f64 {
            (0..4).map(|m| lagrange[m] * self.averages[a * row + j0 + m]).sum()
        };
        let avg = (1.0 - wx) * along_s(i) + wx * along_s(i + 1);
        Some(avg * self.kern.weight_integral(self.horizon - t))
    }
}

/// Lagrange basis on nodes 0, 1, 2, 3 evaluated at `y`.
fn lagrange4(y: f64) -> [f64; 4] {
    let (a, b, c, d) = (y, y - 1.0, y - 2.0, y - 3.0);
    [-b * c * d / 6.0, a * c * d / 2.0, -a * b * d / 2.0, a * b * c / 6.0]
}

/// Newton–Cotes weights on `m` equal intervals of width `h`: Simpson, with a
/// closing 3/8 block when `m` is odd.
fn interval_weights(m: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; m + 1];
    match m {
        0 => {}
        1 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        _ => {
            let simpson_end = if m.is_multiple_of(2) { m } else { m - 3 };
            for i in (0..simpson_end).step_by(2) {
                w[i] += h / 3.0;
                w[i + 1] += 4.0 * h / 3.0;
                w[i + 2] += h / 3.0;
            }
            if simpson_end < m {
                let i = simpson_end;
                w[i] += 3.0 * h / 8.0;
                w[i + 1] += 9.0 * h / 8.0;
                w[i + 2] += 9.0 * h / 8.0;
                w[i + 3] += 3.0 * h / 8.0;
            }
        }
    }
    w
}
