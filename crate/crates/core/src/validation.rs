//! Acceptance checks: analytic cross-validation, Monte Carlo agreement and
//! the qualitative strategy comparisons.

use std::time::Instant;

use serde::Serialize;

use crate::asymptotic::{NuBar, NuHat, NuTilde};
use crate::closed_form::{AlmgrenChriss, ClosedForm, OptimalControl};
use crate::error::Result;
use crate::model::{MarketState, ModelParams, ParamsRecord, PayoffSpec, Strategy};
use crate::ode::rk4::boundary_layer;
use crate::ode::{solve_h_system, value_identity, HCoefficients};
use crate::sim::{a_process_stats, run_ensemble, Estimate, PathEnsemble, SimConfig};

pub const DEFAULT_SEED: u64 = 20_240_607;

/// Sweeps and sample sizes used by the checks.
pub const A_PROCESS_KS: [f64; 3] = [2e-1, 2e-3, 2e-5];
pub const SMALL_BETAS: [f64; 3] = [0.4, 0.2, 0.1];
pub const SHORT_HORIZONS: [f64; 4] = [0.5, 0.2, 0.1, 0.05];
pub const AGREEMENT_HORIZONS: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ValidationOptions {
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub elapsed_secs: f64,
    pub budget_secs: f64,
    pub checks: Vec<Check>,
}

impl CriterionReport {
    fn finish(id: u8, title: &str, budget_secs: f64, started: Instant, mut checks: Vec<Check>) -> Self {
        let elapsed_secs = started.elapsed().as_secs_f64();
        checks.push(Check::new(
            "runtime",
            elapsed_secs < budget_secs,
            format!("{elapsed_secs:.2} s of {budget_secs} s"),
        ));
        Self {
            id,
            title: title.to_string(),
            passed: checks.iter().all(|c| c.passed),
            elapsed_secs,
            budget_secs,
            checks,
        }
    }

    fn error(id: u8, title: &str, budget_secs: f64, started: Instant, err: crate::Error) -> Self {
        Self::finish(id, title, budget_secs, started, vec![Check::new("evaluation", false, err.to_string())])
    }

    /// One line, e.g. `criterion 03 PASS  mc value identity  [0.95 s]`.
    pub fn line(&self) -> String {
        format!(
            "criterion {:02} {}  {}  [{:.2} s]",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed_secs
        )
    }

    /// The summary line followed by one indented line per check.
    pub fn render(&self) -> String {
        let mut out = self.line();
        for c in &self.checks {
            out.push_str(&format!(
                "\n    {} {}: {}",
                if c.passed { "ok  " } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        out
    }
}

fn run(id: u8, title: &str, budget: f64, body: impl FnOnce() -> Result<Vec<Check>>) -> CriterionReport {
    let started = Instant::now();
    match body() {
        Ok(checks) => CriterionReport::finish(id, title, budget, started, checks),
        Err(e) => CriterionReport::error(id, title, budget, started, e),
    }
}

fn params(rec: ParamsRecord) -> Result<ModelParams> {
    crate::model::validate_params(&rec)
}

fn ensemble<S: Strategy + ?Sized>(
    strategy: &S,
    params: &ModelParams,
    spec: &PayoffSpec,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    let cfg = SimConfig {
        n_steps,
        n_paths,
        seed,
        initial: MarketState::default(),
        record_stride: n_steps,
        antithetic: false,
    };
    run_ensemble(strategy, params, spec, &cfg)
}

/// `(f, g)` from the ODE solve against the closed form, inventory-density parameters, 2000 steps.
pub fn criterion_01() -> CriterionReport {
    run(1, "closed form vs ODE solve of (f, g)", 1.0, || {
        let p = params(ParamsRecord::inventory_density())?;
        let coeffs = solve_h_system(&p, 2000)?;
        let cf = ClosedForm::new(&p)?;
        let (mut ef, mut eg) = (0.0f64, 0.0f64);
        for (i, &t) in coeffs.t_grid().iter().enumerate() {
            let (f, g) = coeffs.fg_node(i, p.b());
            let (fc, gc) = cf.fg(t);
            ef = ef.max((f - fc).abs());
            eg = eg.max((g - gc).abs());
        }
        Ok(vec![
            Check::new("max |f - f_closed|", ef <= 1e-5, format!("{ef:.3e} (limit 1e-5)")),
            Check::new("max |g - g_closed|", eg <= 1e-5, format!("{eg:.3e} (limit 1e-5)")),
        ])
    })
}

/// Relative residuals of `xi' = 2(b beta + phi) - xi^2 / 2k` and `pi' = 2 phi - xi pi / 2k`
/// from central differences on 1000 interior points. The residual is measured
/// against the size of the right-hand-side terms.
pub fn riccati_residuals(params: &ModelParams, xi: &dyn Fn(f64) -> f64, pi: &dyn Fn(f64) -> f64) -> Vec<Check> {
    let (k, b, phi, beta) = (params.k(), params.b(), params.phi(), params.beta());
    let horizon = params.horizon();
    let h = 1e-3 * boundary_layer(params).min(horizon);
    let n = 1000;
    let (mut rx, mut rp) = (0.0f64, 0.0f64);
    for i in 0..n {
        let t = horizon * (i as f64 + 0.5) / n as f64;
        let x = xi(t);
        let y = pi(t);
        let dx = (xi(t + h) - xi(t - h)) / (2.0 * h);
        let dy = (pi(t + h) - pi(t - h)) / (2.0 * h);
        let src = 2.0 * (b * beta + phi);
        rx = rx.max((dx - (src - x * x / (2.0 * k))).abs() / (src.abs() + x * x / (2.0 * k)));
        rp = rp.max((dy - (2.0 * phi - x * y / (2.0 * k))).abs() / (2.0 * phi + (x * y).abs() / (2.0 * k)));
    }
    let ok = |r: f64| r.is_finite() && r <= 1e-6;
    vec![
        Check::new("xi residual", ok(rx), format!("{rx:.3e} (limit 1e-6)")),
        Check::new("pi residual", ok(rp), format!("{rp:.3e} (limit 1e-6)")),
    ]
}

pub fn criterion_02() -> CriterionReport {
    run(2, "Riccati residuals of xi and pi", 1.0, || {
        let p = params(ParamsRecord::inventory_density())?;
        let cf = ClosedForm::new(&p)?;
        Ok(riccati_residuals(&p, &|t| cf.xi(t), &|t| cf.pi(t)))
    })
}

/// Monte Carlo value of the optimal control against the ODE value, identity payoff.
pub fn criterion_03(opts: &ValidationOptions) -> CriterionReport {
    run(3, "Monte Carlo value vs ODE value", 60.0, || {
        let p = params(ParamsRecord::inventory_density())?;
        let exact = value_identity(&MarketState::default(), &solve_h_system(&p, 2000)?)?;
        let ens = ensemble(&OptimalControl::new(&p)?, &p, &PayoffSpec::Identity, 1000, 10_000, opts.seed)?;
        let est = ens.performance();
        Ok(vec![Check::new(
            "mean performance within 3 SE",
            est.within(exact, 3.0),
            format!(
                "MC {:.4} +- {:.4}, ODE {:.4}, {:.2} SE",
                est.mean,
                est.se,
                exact,
                (est.mean - exact) / est.se
            ),
        )])
    })
}

/// `E[integral A^2 dt]` under the optimal control for each `k` in [`A_PROCESS_KS`].
pub fn a_integral_sweep(opts: &ValidationOptions, n_steps: usize, n_paths: usize) -> Result<Vec<(f64, Estimate)>> {
    A_PROCESS_KS
        .iter()
        .map(|&k| {
            let p = params(ParamsRecord::a_process(k))?;
            let ens = ensemble(&OptimalControl::new(&p)?, &p, &PayoffSpec::Identity, n_steps, n_paths, opts.seed)?;
            Ok((k, ens.a_integral()))
        })
        .collect()
}

pub fn criterion_04(opts: &ValidationOptions) -> CriterionReport {
    run(4, "small-k limit of E[integral A^2]", 120.0, || {
        let sweep = a_integral_sweep(opts, 5000, 4000)?;
        let mut checks = Vec::new();
        for w in sweep.windows(2) {
            let ((k0, e0), (k1, e1)) = (w[0], w[1]);
            checks.push(Check::new(
                format!("k {k0:e} -> {k1:e} halves"),
                e1.mean <= 0.5 * e0.mean,
                format!("{:.4} +- {:.4} -> {:.4} +- {:.4}", e0.mean, e0.se, e1.mean, e1.se),
            ));
        }
        Ok(checks)
    })
}

/// Moments of `A` at `T/4`, `T/2`, `3T/4` against the closed-form mean and variance.
pub fn criterion_05(opts: &ValidationOptions) -> CriterionReport {
    run(5, "moments of A vs closed form", 60.0, || {
        let p = params(ParamsRecord::a_process(2e-3))?;
        let cf = ClosedForm::new(&p)?;
        let n_steps = 20_000;
        let cfg = SimConfig {
            n_steps,
            n_paths: 10_000,
            seed: opts.seed,
            initial: MarketState::default(),
            record_stride: n_steps / 4,
            antithetic: false,
        };
        let ens = run_ensemble(&OptimalControl::new(&p)?, &p, &PayoffSpec::Identity, &cfg)?;
        let horizon = p.horizon();
        let times = [0.25 * horizon, 0.5 * horizon, 0.75 * horizon];
        let stats = a_process_stats(&ens, &p, &times);
        let init = cfg.initial;
        let mut checks = Vec::new();
        for sl in &stats.slices {
            let mean = cf.a_mean(sl.t, init.q, init.z());
            let var = cf.a_variance(sl.t);
            checks.push(Check::new(
                format!("mean at t={}", sl.t),
                sl.mean.within(mean, 3.0),
                format!("MC {:.5} +- {:.5}, closed form {:.5}", sl.mean.mean, sl.mean.se, mean),
            ));
            checks.push(Check::new(
                format!("variance at t={}", sl.t),
                (sl.variance.var - var).abs() <= 3.0 * sl.variance.se,
                format!("MC {:.5} +- {:.5}, closed form {:.5}", sl.variance.var, sl.variance.se, var),
            ));
        }
        Ok(checks)
    })
}

/// `(beta, E[H(nu*) - H(nu_hat)] / beta^2)` from paired ensembles, identity payoff.
pub fn beta_gap_sweep(opts: &ValidationOptions, n_steps: usize, n_paths: usize) -> Result<Vec<(f64, Estimate)>> {
    let base = params(ParamsRecord::inventory_density())?;
    SMALL_BETAS
        .iter()
        .map(|&beta| {
            let p = base.with_beta(beta)?;
            let spec = PayoffSpec::Identity;
            let opt = ensemble(&OptimalControl::new(&p)?, &p, &spec, n_steps, n_paths, opts.seed)?;
            let hat = ensemble(&NuHat::new(&p, &spec), &p, &spec, n_steps, n_paths, opts.seed)?;
            let d = Estimate::paired(&opt.performances(), &hat.performances());
            let s = beta * beta;
            Ok((
                beta,
                Estimate {
                    mean: d.mean / s,
                    se: d.se / s,
                    n: d.n,
                },
            ))
        })
        .collect()
}

pub fn criterion_06(opts: &ValidationOptions) -> CriterionReport {
    run(6, "second-order optimality of nu_hat in beta", 120.0, || {
        let sweep = beta_gap_sweep(opts, 1000, 10_000)?;
        let mut checks = Vec::new();
        for w in sweep.windows(2) {
            let ((b0, r0), (b1, r1)) = (w[0], w[1]);
            let tol = 2.0 * (r0.se * r0.se + r1.se * r1.se).sqrt();
            checks.push(Check::new(
                format!("gap/beta^2 nonincreasing {b0} -> {b1}"),
                r1.mean <= r0.mean + tol,
                format!("{:.4} +- {:.4} -> {:.4} +- {:.4} (slack {tol:.4})", r0.mean, r0.se, r1.mean, r1.se),
            ));
        }
        Ok(checks)
    })
}

/// Mean excess performance for the short-horizon parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonRow {
    pub payoff: String,
    pub horizon: f64,
    pub strategy: String,
    pub excess: Estimate,
}

/// Rows of a horizon sweep and the paired `nu_bar - nu_tilde` estimate per horizon.
pub type HorizonSweep = (Vec<HorizonRow>, Vec<(f64, Estimate)>);

/// `nu_tilde`, `nu_bar` and Almgren–Chriss on common random numbers; returns the rows
/// and the paired `nu_bar - nu_tilde` estimate per horizon.
pub fn horizon_sweep(
    spec: &PayoffSpec,
    payoff: &str,
    horizons: &[f64],
    opts: &ValidationOptions,
    n_steps: usize,
    n_paths: usize,
) -> Result<HorizonSweep> {
    let mut rows = Vec::new();
    let mut gaps = Vec::new();
    for &horizon in horizons {
        let p = params(ParamsRecord::short_horizon(horizon))?;
        let tilde = ensemble(&NuTilde::new(&p, spec), &p, spec, n_steps, n_paths, opts.seed)?;
        let bar = ensemble(&NuBar::new(&p, spec)?, &p, spec, n_steps, n_paths, opts.seed)?;
        let ac = ensemble(&AlmgrenChriss::new(&p), &p, spec, n_steps, n_paths, opts.seed)?;
        for e in [&tilde, &bar, &ac] {
            rows.push(HorizonRow {
                payoff: payoff.to_string(),
                horizon,
                strategy: e.strategy.clone(),
                excess: e.excess_performance(),
            });
        }
        gaps.push((horizon, Estimate::paired(&bar.performances(), &tilde.performances())));
    }
    Ok((rows, gaps))
}

fn example_payoffs() -> [(&'static str, PayoffSpec); 2] {
    [
        ("logistic", PayoffSpec::logistic_example()),
        ("quadratic", PayoffSpec::quadratic_example()),
    ]
}

/// Excess performance as the horizon shrinks, against `-alpha Q0^2`.
///
/// Two checks per payoff and strategy: the distance to the limit shrinks
/// monotonically across the sweep, and at the smallest horizon it is within 3 SE.
pub fn criterion_07(opts: &ValidationOptions) -> CriterionReport {
    run(7, "small-T limit of excess performance", 120.0, || {
        let mut checks = Vec::new();
        let init = MarketState::default();
        let limit = -ParamsRecord::short_horizon(1.0).alpha * init.q * init.q;
        for (name, spec) in example_payoffs() {
            let (rows, _) = horizon_sweep(&spec, name, &SHORT_HORIZONS, opts, 1000, 10_000)?;
            for strat in ["nu_tilde", "nu_bar", "almgren_chriss"] {
                let series: Vec<&HorizonRow> = rows.iter().filter(|r| r.strategy == strat).collect();
                let dist: Vec<f64> = series.iter().map(|r| (r.excess.mean - limit).abs()).collect();
                let monotone = dist.windows(2).all(|w| w[1] <= w[0]);
                checks.push(Check::new(
                    format!("{name} {strat} approaches {limit}"),
                    monotone,
                    series
                        .iter()
                        .map(|r| format!("T={}: {:.3}", r.horizon, r.excess.mean))
                        .collect::<Vec<_>>()
                        .join(", "),
                ));
                let last = series.last().expect("sweep is non-empty");
                checks.push(Check::new(
                    format!("{name} {strat} within 3 SE at T={}", last.horizon),
                    last.excess.within(limit, 3.0),
                    format!(
                        "{:.4} +- {:.4}, {:.1} SE from {limit}",
                        last.excess.mean,
                        last.excess.se,
                        (last.excess.mean - limit) / last.excess.se
                    ),
                ));
            }
        }
        Ok(checks)
    })
}

/// `nu_bar` beats `nu_tilde` by more than 2 paired SE at the largest horizon.
pub fn criterion_08(opts: &ValidationOptions) -> CriterionReport {
    run(8, "nu_bar outperforms nu_tilde at the largest T", 120.0, || {
        let mut checks = Vec::new();
        let horizon = SHORT_HORIZONS[0];
        for (name, spec) in example_payoffs() {
            let (_, gaps) = horizon_sweep(&spec, name, &[horizon], opts, 1000, 10_000)?;
            let d = gaps[0].1;
            checks.push(Check::new(
                format!("{name} at T={horizon}"),
                d.mean > 2.0 * d.se,
                format!("nu_bar - nu_tilde = {:.4} +- {:.4}", d.mean, d.se),
            ));
        }
        Ok(checks)
    })
}

/// `sup |nu_bar - nu_tilde| / T` over `t in [0, T]`, `q in [-10, 10]`, `p, s in [95, 105]`.
pub fn control_gap(spec: &PayoffSpec, horizon: f64) -> Result<f64> {
    let p = params(ParamsRecord::short_horizon(horizon))?;
    let bar = NuBar::new(&p, spec)?;
    let tilde = NuTilde::new(&p, spec);
    let lin = |lo: f64, hi: f64, n: usize| (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64);
    let mut sup = 0.0f64;
    for t in lin(0.0, horizon, 21) {
        for q in lin(-10.0, 10.0, 21) {
            for pp in lin(95.0, 105.0, 21) {
                for s in lin(95.0, 105.0, 41) {
                    let st = MarketState::new(t, 0.0, q, pp, s);
                    sup = sup.max((bar.rate(&st) - tilde.rate(&st)).abs());
                }
            }
        }
    }
    Ok(sup / horizon)
}

pub fn criterion_09() -> CriterionReport {
    run(9, "o(T) agreement of nu_bar and nu_tilde", 10.0, || {
        let mut checks = Vec::new();
        for (name, spec) in example_payoffs() {
            let gaps = AGREEMENT_HORIZONS
                .iter()
                .map(|&h| control_gap(&spec, h))
                .collect::<Result<Vec<f64>>>()?;
            checks.push(Check::new(
                format!("{name} sup gap / T decreasing"),
                gaps.windows(2).all(|w| w[1] < w[0]),
                AGREEMENT_HORIZONS
                    .iter()
                    .zip(&gaps)
                    .map(|(h, g)| format!("T={h}: {g:.4e}"))
                    .collect::<Vec<_>>()
                    .join(", "),
            ));
        }
        Ok(checks)
    })
}

fn state_grid() -> Vec<MarketState> {
    let mut out = Vec::with_capacity(1000);
    for i in 0..10 {
        for j in 0..10 {
            for l in 0..10 {
                let t = 0.1 * i as f64;
                let q = -10.0 + 20.0 * j as f64 / 9.0;
                let s = 97.0 + 0.6 * l as f64;
                let p = 103.0 - 0.7 * l as f64;
                out.push(MarketState::new(t, 0.0, q, p, s));
            }
        }
    }
    out
}

pub fn criterion_10() -> CriterionReport {
    run(10, "degenerate identities", 1.0, || {
        let grid = state_grid();
        let base = params(ParamsRecord::inventory_density())?;
        let p0 = base.with_beta(0.0)?;
        let ac = AlmgrenChriss::new(&p0);
        let mut checks = Vec::new();
        for (name, spec) in [
            ("identity", PayoffSpec::Identity),
            ("quadratic", PayoffSpec::quadratic_example()),
        ] {
            let hat = NuHat::new(&p0, &spec);
            let err = grid
                .iter()
                .map(|st| Ok((hat.try_rate(st)? - ac.rate(st)).abs()))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            checks.push(Check::new(
                format!("nu_hat = Almgren-Chriss at beta = 0 ({name} payoff)"),
                err <= 1e-12,
                format!("max abs difference {err:.3e}"),
            ));
        }
        let opt = OptimalControl::new(&base)?;
        let bar = NuBar::new(&base, &PayoffSpec::Identity)?;
        let err = grid
            .iter()
            .map(|st| (bar.rate(st) - opt.rate(st)).abs())
            .fold(0.0, f64::max);
        checks.push(Check::new(
            "nu_bar = nu_star for the identity payoff",
            err <= 1e-12,
            format!("max abs difference {err:.3e}"),
        ));
        Ok(checks)
    })
}

/// Max-norm difference over all four coefficients at the nodes of `coarse`,
/// which are a subset of the nodes of `fine`.
pub fn nested_error(coarse: &HCoefficients, fine: &HCoefficients) -> f64 {
    let stride = (fine.len() - 1) / (coarse.len() - 1);
    (0..coarse.len())
        .map(|i| {
            let (a, b) = (coarse.node(i), fine.node(i * stride));
            (0..4).map(|c| (a[c] - b[c]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

pub fn criterion_11() -> CriterionReport {
    run(11, "RK4 convergence order", 5.0, || {
        let p = params(ParamsRecord::inventory_density())?;
        let reference = solve_h_system(&p, 10_000)?;
        let e500 = nested_error(&solve_h_system(&p, 500)?, &reference);
        let e1000 = nested_error(&solve_h_system(&p, 1000)?, &reference);
        let ratio = e500 / e1000;
        Ok(vec![Check::new(
            "error ratio 500 / 1000 steps",
            (12.0..=20.0).contains(&ratio),
            format!("{e500:.3e} / {e1000:.3e} = {ratio:.2} (range [12, 20])"),
        )])
    })
}

pub const CRITERIA: [u8; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

pub fn run_criterion(id: u8, opts: &ValidationOptions) -> Option<CriterionReport> {
    Some(match id {
        1 => criterion_01(),
        2 => criterion_02(),
        3 => criterion_03(opts),
        4 => criterion_04(opts),
        5 => criterion_05(opts),
        6 => criterion_06(opts),
        7 => criterion_07(opts),
        8 => criterion_08(opts),
        9 => criterion_09(),
        10 => criterion_10(),
        11 => criterion_11(),
        _ => return None,
    })
}

pub fn run_all(opts: &ValidationOptions) -> Vec<CriterionReport> {
    CRITERIA.iter().filter_map(|&id| run_criterion(id, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbed_xi_fails_the_residual_check() {
        let p = ModelParams::default();
        let cf = ClosedForm::new(&p).unwrap();
        let good = riccati_residuals(&p, &|t| cf.xi(t), &|t| cf.pi(t));
        assert!(good.iter().all(|c| c.passed), "{good:?}");
        let bad = riccati_residuals(&p, &|t| cf.xi(t) * (1.0 + 1e-4 * t), &|t| cf.pi(t));
        assert!(!bad[0].passed);
    }

    #[test]
    fn fast_criteria_pass() {
        for r in [criterion_01(), criterion_02(), criterion_09(), criterion_10(), criterion_11()] {
            assert!(r.passed, "{}", r.render());
        }
    }

    #[test]
    fn unknown_criterion_is_none() {
        assert!(run_criterion(12, &ValidationOptions::default()).is_none());
    }

    #[test]
    fn report_lines_are_stable() {
        let r = CriterionReport::finish(3, "x", 10.0, Instant::now(), vec![Check::new("a", true, "d")]);
        assert!(r.line().starts_with("criterion 03 PASS  x"));
        assert!(r.render().contains("ok   a: d"));
    }
}
