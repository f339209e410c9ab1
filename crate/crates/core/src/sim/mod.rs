//! Euler–Maruyama simulation of the market and trader state under a feedback strategy.

pub mod stats;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MarketState, ModelParams, PayoffSpec, Strategy};

pub use stats::{
    a_process_stats, a_value, cross_sections, inventory_stats, quantile, AProcessStats, ASlice, CrossSection, Estimate, Histogram,
    NeumaierSum, VarianceEstimate, HISTOGRAM_BINS,
};

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_PATHS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub initial: MarketState,
    /// Keep every `record_stride`-th step of each path (the final step is always kept).
    pub record_stride: usize,
    /// Pair path `2j + 1` with path `2j` using negated normals.
    pub antithetic: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_steps: DEFAULT_STEPS,
            n_paths: DEFAULT_PATHS,
            seed: 0,
            initial: MarketState::default(),
            record_stride: 10,
            antithetic: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be at least 1".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be at least 1".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be at least 1".into()));
        }
        let s = &self.initial;
        if ![s.t, s.x, s.q, s.p, s.s].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("initial state must be finite".into()));
        }
        Ok(())
    }

    /// Step indices kept in each path record.
    pub fn record_steps(&self) -> Vec<usize> {
        let stride = self.record_stride.max(1);
        let mut steps: Vec<usize> = (0..=self.n_steps).step_by(stride).collect();
        if steps.last() != Some(&self.n_steps) {
            steps.push(self.n_steps);
        }
        steps
    }

    fn time_step(&self, params: &ModelParams) -> f64 {
        (params.horizon() - self.initial.t) / self.n_steps as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathSample {
    pub t: f64,
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub x: f64,
    /// Rate applied over the step that starts here; at the last sample it is the
    /// rate the strategy would have chosen.
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub samples: Vec<PathSample>,
    /// `X_T + Q_T (P_T - alpha Q_T) - phi sum Q^2 dt`.
    pub performance: f64,
    /// Left-Riemann `integral A_t^2 dt`.
    pub a_integral: f64,
    pub terminal: MarketState,
}

/// Simulate one path. Randomness depends only on `(cfg.seed, path_index)`.
pub fn simulate_path<S: Strategy + ?Sized>(
    strategy: &S,
    params: &ModelParams,
    spec: &PayoffSpec,
    cfg: &SimConfig,
    path_index: usize,
) -> Result<PathRecord> {
    cfg.validate()?;
    let dt = cfg.time_step(params);
    if !(dt > 0.0) {
        return Err(Error::Config(format!(
            "initial time {} must precede the horizon {}",
            cfg.initial.t,
            params.horizon()
        )));
    }
    let (stream, sign) = if cfg.antithetic {
        ((path_index / 2) as u64, if path_index % 2 == 1 { -1.0 } else { 1.0 })
    } else {
        (path_index as u64, 1.0)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);

    let (k, b, alpha, phi, beta) = (params.k(), params.b(), params.alpha(), params.phi(), params.beta());
    let rho = params.rho();
    let rho_perp = (1.0 - rho * rho).max(0.0).sqrt();
    let sd_s = params.sigma() * dt.sqrt();
    let sd_p = params.eta() * dt.sqrt();
    let a_coef = b * beta + 2.0 * phi;

    let stride = cfg.record_stride;
    let mut samples = Vec::with_capacity(cfg.n_steps / stride + 2);
    let mut st = cfg.initial;
    let t0 = st.t;
    let mut penalty = 0.0;
    let mut a_integral = 0.0;

    for i in 0..cfg.n_steps {
        st.t = t0 + i as f64 * dt;
        let nu = strategy.rate(&st);
        if !nu.is_finite() {
            return Err(Error::NonFinite(format!(
                "strategy {} returned {nu} on path {path_index} at step {i} (t={}, q={}, p={}, s={})",
                strategy.name(),
                st.t,
                st.q,
                st.p,
                st.s
            )));
        }
        if i % stride == 0 {
            samples.push(PathSample {
                t: st.t,
                s: st.s,
                p: st.p,
                q: st.q,
                x: st.x,
                nu,
            });
        }
        let z1: f64 = sign * rng.sample::<f64, _>(StandardNormal);
        let z2: f64 = sign * rng.sample::<f64, _>(StandardNormal);
        let psi = spec.value(st.s);
        let a = a_coef * st.q + beta * (st.p - st.s);
        a_integral += a * a * dt;
        penalty += phi * st.q * st.q * dt;
        st.x += -(st.p + k * nu) * nu * dt - beta * st.q * (st.p - psi) * dt;
        st.s += sd_s * z1;
        st.p += b * nu * dt + sd_p * (rho * z1 + rho_perp * z2);
        st.q += nu * dt;
    }
    st.t = params.horizon();
    let terminal_nu = strategy.rate(&st);
    samples.push(PathSample {
        t: st.t,
        s: st.s,
        p: st.p,
        q: st.q,
        x: st.x,
        nu: terminal_nu,
    });
    let performance = st.x + st.q * (st.p - alpha * st.q) - penalty;
    if !performance.is_finite() {
        return Err(Error::NonFinite(format!(
            "path {path_index} under {} ended with non-finite performance",
            strategy.name()
        )));
    }
    Ok(PathRecord {
        samples,
        performance,
        a_integral,
        terminal: st,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEnsemble {
    pub strategy: String,
    pub params: ModelParams,
    pub config: SimConfig,
    paths: Vec<PathRecord>,
}

impl PathEnsemble {
    pub fn paths(&self) -> &[PathRecord] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn performances(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.performance).collect()
    }

    pub fn performance(&self) -> Estimate {
        Estimate::from_samples(&self.performances())
    }

    /// Performance minus the initial mark-to-market value `x + q p`.
    pub fn excess_performances(&self) -> Vec<f64> {
        let s = &self.config.initial;
        let base = s.x + s.q * s.p;
        self.paths.iter().map(|p| p.performance - base).collect()
    }

    pub fn excess_performance(&self) -> Estimate {
        Estimate::from_samples(&self.excess_performances())
    }

    pub fn a_integral(&self) -> Estimate {
        let v: Vec<f64> = self.paths.iter().map(|p| p.a_integral).collect();
        Estimate::from_samples(&v)
    }

    /// Times of the recorded samples, shared by all paths.
    pub fn record_times(&self) -> Vec<f64> {
        self.paths
            .first()
            .map(|p| p.samples.iter().map(|s| s.t).collect())
            .unwrap_or_default()
    }

    /// One value per path taken from the `i`-th recorded sample.
    pub fn column(&self, i: usize, f: impl Fn(&PathSample) -> f64) -> Vec<f64> {
        self.paths.iter().map(|p| f(&p.samples[i])).collect()
    }
}

/// Simulate `cfg.n_paths` paths on the global rayon pool.
pub fn run_ensemble<S: Strategy + ?Sized>(
    strategy: &S,
    params: &ModelParams,
    spec: &PayoffSpec,
    cfg: &SimConfig,
) -> Result<PathEnsemble> {
    cfg.validate()?;
    let results: Vec<Result<PathRecord>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| simulate_path(strategy, params, spec, cfg, i))
        .collect();
    let mut paths = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(p) => paths.push(p),
            Err(e) => failures.push(e),
        }
    }
    if let Some(first) = failures.first() {
        let first = match first {
            Error::NonFinite(m) => m.clone(),
            other => other.to_string(),
        };
        return Err(Error::NonFinite(format!(
            "{} of {} paths failed; first failure: {first}",
            failures.len(),
            cfg.n_paths
        )));
    }
    Ok(PathEnsemble {
        strategy: strategy.name().to_string(),
        params: *params,
        config: *cfg,
        paths,
    })
}

/// As [`run_ensemble`] on a dedicated pool of `workers` threads.
pub fn run_ensemble_with_workers<S: Strategy + ?Sized>(
    strategy: &S,
    params: &ModelParams,
    spec: &PayoffSpec,
    cfg: &SimConfig,
    workers: usize,
) -> Result<PathEnsemble> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_ensemble(strategy, params, spec, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::OptimalControl;
    use crate::model::{ConstantRate, ParamsRecord};
    use crate::ode::{solve_h_system, value_identity};
    use approx::assert_relative_eq;

    fn quiet(mut r: ParamsRecord) -> ModelParams {
        r.sigma = 0.0;
        r.eta = 0.0;
        crate::model::validate_params(&r).unwrap()
    }

    fn cfg(n_steps: usize, n_paths: usize) -> SimConfig {
        SimConfig {
            n_steps,
            n_paths,
            seed: 7,
            initial: MarketState::default(),
            record_stride: 1,
            antithetic: false,
        }
    }

    #[test]
    fn config_invariants() {
        assert!(cfg(0, 1).validate().is_err());
        assert!(cfg(1, 0).validate().is_err());
        let mut c = cfg(10, 1);
        c.record_stride = 0;
        assert!(c.validate().is_err());
        c.record_stride = 4;
        assert_eq!(c.record_steps(), vec![0, 4, 8, 10]);
    }

    #[test]
    fn idle_strategy_without_noise() {
        let params = quiet(ParamsRecord::inventory_density());
        let c = cfg(100, 1);
        let r = simulate_path(&ConstantRate(0.0), &params, &PayoffSpec::Identity, &c, 0).unwrap();
        let (q0, p0) = (10.0, 100.0);
        assert_eq!(r.terminal.x, 0.0);
        assert_eq!(r.terminal.q, q0);
        let expected = q0 * (p0 - params.alpha() * q0) - params.phi() * q0 * q0 * params.horizon();
        assert_relative_eq!(r.performance, expected, max_relative = 1e-12);
    }

    #[test]
    fn constant_rate_matches_hand_integration() {
        let mut rec = ParamsRecord::inventory_density();
        rec.b = 0.0;
        rec.alpha = 1.0;
        let params = quiet(rec);
        let (c_rate, q0, p0, t) = (-4.0, 10.0, 100.0, params.horizon());
        // P == S == psi(S), so funding vanishes.
        let exact_x = -(p0 + params.k() * c_rate) * c_rate * t;
        for n in [10, 100, 1000] {
            let r = simulate_path(&ConstantRate(c_rate), &params, &PayoffSpec::Identity, &cfg(n, 1), 0).unwrap();
            assert_relative_eq!(r.terminal.q, q0 + c_rate * t, max_relative = 1e-12);
            assert_relative_eq!(r.terminal.x, exact_x, max_relative = 1e-12);
            assert_eq!(r.terminal.p, p0);
        }
        // With a basis the funding integral is first-order in dt.
        let mut c = cfg(1, 1);
        c.initial.p = 101.0;
        let errs: Vec<f64> = [100, 200]
            .iter()
            .map(|&n| {
                c.n_steps = n;
                let r = simulate_path(&ConstantRate(c_rate), &params, &PayoffSpec::Identity, &c, 0).unwrap();
                let funding = params.beta() * 1.0 * (q0 * t + 0.5 * c_rate * t * t);
                let exact = -(101.0 + params.k() * c_rate) * c_rate * t - funding;
                (r.terminal.x - exact).abs()
            })
            .collect();
        assert_relative_eq!(errs[0] / errs[1], 2.0, max_relative = 0.05);
    }

    #[test]
    fn inventory_series_integrates_the_rate() {
        let params = ModelParams::default();
        let ctrl = OptimalControl::new(&params).unwrap();
        let c = cfg(200, 1);
        let r = simulate_path(&ctrl, &params, &PayoffSpec::Identity, &c, 3).unwrap();
        let dt = params.horizon() / 200.0;
        let mut q = r.samples[0].q;
        for w in r.samples.windows(2) {
            q += w[0].nu * dt;
            assert_relative_eq!(q, w[1].q, epsilon = 1e-12);
        }
    }

    #[test]
    fn cash_accounting_identity() {
        let params = ModelParams::default();
        let spec = PayoffSpec::logistic_example();
        let ctrl = OptimalControl::new(&params).unwrap();
        let c = cfg(300, 1);
        let r = simulate_path(&ctrl, &params, &spec, &c, 11).unwrap();
        let dt = params.horizon() / 300.0;
        let mut trade = NeumaierSum::default();
        let mut funding = NeumaierSum::default();
        for s in &r.samples[..300] {
            trade.add(-(s.p + params.k() * s.nu) * s.nu * dt);
            funding.add(-params.beta() * s.q * (s.p - spec.value(s.s)) * dt);
        }
        let drift = r.terminal.x - c.initial.x - trade.value() - funding.value();
        assert!(drift.abs() < 1e-9 * (1.0 + r.terminal.x.abs()), "drift {drift}");
    }

    #[test]
    fn reproducible_and_worker_independent() {
        let params = ModelParams::default();
        let ctrl = OptimalControl::new(&params).unwrap();
        let mut c = cfg(50, 64);
        c.record_stride = 10;
        let a = run_ensemble_with_workers(&ctrl, &params, &PayoffSpec::Identity, &c, 1).unwrap();
        let b = run_ensemble_with_workers(&ctrl, &params, &PayoffSpec::Identity, &c, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.performance(), b.performance());
        let single = simulate_path(&ctrl, &params, &PayoffSpec::Identity, &c, 17).unwrap();
        assert_eq!(&single, &a.paths()[17]);
        c.seed += 1;
        let other = run_ensemble(&ctrl, &params, &PayoffSpec::Identity, &c).unwrap();
        assert_ne!(other.paths()[0], a.paths()[0]);
    }

    #[test]
    fn statistics_ignore_path_order() {
        let params = ModelParams::default();
        let ctrl = OptimalControl::new(&params).unwrap();
        let ens = run_ensemble(&ctrl, &params, &PayoffSpec::Identity, &cfg(20, 200)).unwrap();
        let mut perf = ens.performances();
        let fwd = Estimate::from_samples(&perf);
        perf.reverse();
        perf.rotate_left(37);
        let shuffled = Estimate::from_samples(&perf);
        assert_relative_eq!(fwd.mean, shuffled.mean, max_relative = 1e-15);
        assert_relative_eq!(fwd.se, shuffled.se, max_relative = 1e-12);
    }

    #[test]
    fn standard_error_scales_with_path_count() {
        let params = ModelParams::default();
        let ctrl = OptimalControl::new(&params).unwrap();
        let mut c = cfg(50, 1000);
        c.record_stride = 50;
        let small = run_ensemble(&ctrl, &params, &PayoffSpec::Identity, &c).unwrap().performance();
        c.n_paths = 4000;
        c.seed = 99;
        let large = run_ensemble(&ctrl, &params, &PayoffSpec::Identity, &c).unwrap().performance();
        let ratio = small.se / large.se;
        assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn antithetic_pairs_are_unbiased() {
        let params = ModelParams::default();
        let ctrl = OptimalControl::new(&params).unwrap();
        let mut c = cfg(50, 2000);
        c.record_stride = 50;
        let plain = run_ensemble(&ctrl, &params, &PayoffSpec::Identity, &c).unwrap().performance();
        c.antithetic = true;
        let ens = run_ensemble(&ctrl, &params, &PayoffSpec::Identity, &c).unwrap();
        let p0 = &ens.paths()[0].samples[1];
        let p1 = &ens.paths()[1].samples[1];
        let ds = MarketState::default().s;
        assert_relative_eq!(p0.s - ds, -(p1.s - ds), max_relative = 1e-12);
        let anti = ens.performance();
        let tol = 3.0 * (plain.se * plain.se + anti.se * anti.se).sqrt();
        assert!((plain.mean - anti.mean).abs() <= tol);
    }

    #[test]
    fn non_finite_strategy_is_reported() {
        let params = ModelParams::default();
        let err = run_ensemble(&ConstantRate(f64::NAN), &params, &PayoffSpec::Identity, &cfg(5, 3)).unwrap_err();
        assert!(err.to_string().contains("3 of 3 paths failed"), "{err}");
    }

    #[test]
    fn a_statistics_vanish_without_funding_or_penalty() {
        let mut rec = ParamsRecord::inventory_density();
        rec.beta = 0.0;
        rec.phi = 0.0;
        let params = crate::model::validate_params(&rec).unwrap();
        let ens = run_ensemble(&ConstantRate(-1.0), &params, &PayoffSpec::Identity, &cfg(20, 50)).unwrap();
        let st = a_process_stats(&ens, &params, &[0.5]);
        assert_eq!(st.integral_a2.mean, 0.0);
        assert_eq!(st.slices[0].mean.mean, 0.0);
    }

    #[test]
    fn inventory_statistics_of_deterministic_ensemble() {
        let params = quiet(ParamsRecord::inventory_density());
        let ens = run_ensemble(&ConstantRate(-2.0), &params, &PayoffSpec::Identity, &cfg(10, 20)).unwrap();
        for sl in inventory_stats(&ens) {
            assert_eq!(sl.q05, sl.mean);
            assert_eq!(sl.q95, sl.mean);
            assert_eq!(sl.histogram.lo, sl.histogram.hi);
        }
        let mut c = cfg(10, 20);
        c.initial.q = 0.0;
        let flat = run_ensemble(&ConstantRate(0.0), &ModelParams::default(), &PayoffSpec::Identity, &c).unwrap();
        for sl in inventory_stats(&flat) {
            assert_eq!((sl.mean, sl.q05, sl.q95), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn weak_error_shrinks_with_steps() {
        // Noise-free run isolates the discretisation bias from sampling error.
        let params = quiet(ParamsRecord::inventory_density());
        let exact = value_identity(&MarketState::default(), &solve_h_system(&params, 4000).unwrap()).unwrap();
        let ctrl = OptimalControl::new(&params).unwrap();
        let errs: Vec<f64> = [100, 200, 400]
            .iter()
            .map(|&n| {
                let r = simulate_path(&ctrl, &params, &PayoffSpec::Identity, &cfg(n, 1), 0).unwrap();
                (r.performance - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.5..=3.0).contains(&ratio), "ratio {ratio}, errs {errs:?}");
        }
    }
}
