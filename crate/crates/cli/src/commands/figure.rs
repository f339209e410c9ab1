use perpliq::sim::{a_process_stats, a_value, inventory_stats, DEFAULT_PATHS, DEFAULT_STEPS};
use perpliq::validation::A_PROCESS_KS;
use perpliq::{ac_inventory_path, ClosedForm, ModelParams, ParamsRecord, PayoffSpec, StrategyKind};

use super::{at_horizon, default_strategy, density_rows, run, sim_defaults, Context, DEFAULT_HORIZONS};
use crate::error::{CliError, CliResult};
use crate::output::{num, Artifacts, Provenance};

pub const FIG1_P0: [f64; 3] = [101.0, 100.0, 99.0];
pub const A_PROCESS_STEPS: usize = 5000;
pub const S_RANGE: [f64; 2] = [98.0, 102.0];
pub const S_POINTS: usize = 401;

pub fn figure(ctx: &Context, id: u8) -> CliResult<()> {
    let name = format!("figure{id}");
    let mut art = ctx.artifacts(&name)?;
    match id {
        1 => inventory_densities(ctx, &mut art)?,
        2 => a_sample_paths(ctx, &mut art)?,
        3 => a_densities(ctx, &mut art)?,
        4 => payoffs(ctx, &mut art)?,
        5 => horizon_performance(ctx, &mut art)?,
        _ => return Err(CliError::Config(format!("unknown figure {id}; expected 1 to 5"))),
    }
    let dir = art.dir().to_path_buf();
    art.finish()?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn tag(x: f64) -> String {
    format!("{x:e}")
}

fn inventory_densities(ctx: &Context, art: &mut Artifacts) -> CliResult<()> {
    let cfg = &ctx.config;
    let params = cfg.params_or(ParamsRecord::inventory_density())?;
    let payoff = cfg.payoff_or(PayoffSpec::Identity);
    let kind = cfg.strategy.unwrap_or_else(|| default_strategy(&payoff));
    let base = cfg.sim_config(sim_defaults(DEFAULT_STEPS, DEFAULT_PATHS, 10), &ctx.overrides)?;
    if base.initial.t != 0.0 {
        return Err(CliError::Config("figure 1 starts at t = 0".into()));
    }
    let ac = ac_inventory_path(&params, base.initial.q, base.n_steps + 1);
    for &p0 in cfg.p0_values.as_deref().unwrap_or(&FIG1_P0) {
        let mut sim = base;
        sim.initial.p = p0;
        let ens = run(kind, &params, &payoff, &sim)?;
        let stats = inventory_stats(&ens);
        let prov = Provenance::new(format!("figure 1 {kind} p0={p0}"), &params, &payoff).with_sim(&sim);
        let rows = sim
            .record_steps()
            .into_iter()
            .zip(&stats)
            .map(|(i, c)| [c.t, c.mean, c.q05, c.q95, ac[i].1].map(num));
        art.csv(
            &format!("inventory_p0_{p0}.csv"),
            "inventory mean, 5/95% quantiles and the Almgren-Chriss path",
            &prov,
            &["t", "mean_q", "q05", "q95", "ac_q"],
            rows,
        )?;
        art.csv(
            &format!("inventory_p0_{p0}_density.csv"),
            "inventory histogram density per recorded time",
            &prov,
            &["t", "q", "density"],
            density_rows(&stats),
        )?;
    }
    Ok(())
}

fn a_process_params(ctx: &Context, k: f64) -> CliResult<(ModelParams, PayoffSpec)> {
    let payoff = ctx.config.payoff_or(PayoffSpec::Identity);
    if !payoff.is_identity() {
        return Err(CliError::Config("figures 2 and 3 use the identity payoff".into()));
    }
    let base = ctx.config.params.unwrap_or(ParamsRecord::a_process(k));
    Ok((perpliq::validate_params(&ParamsRecord { k, ..base })?, payoff))
}

fn k_values(ctx: &Context) -> Vec<f64> {
    ctx.config.k_values.clone().unwrap_or_else(|| A_PROCESS_KS.to_vec())
}

fn a_sample_paths(ctx: &Context, art: &mut Artifacts) -> CliResult<()> {
    for k in k_values(ctx) {
        let (params, payoff) = a_process_params(ctx, k)?;
        let sim = ctx.config.sim_config(sim_defaults(A_PROCESS_STEPS, 1, 1), &ctx.overrides)?;
        let ens = run(StrategyKind::NuStar, &params, &payoff, &sim)?;
        let cf = ClosedForm::new(&params)?;
        let init = sim.initial;
        let prov = Provenance::new(format!("figure 2 k={k}"), &params, &payoff).with_sim(&sim);
        let rows = ens.paths()[0].samples.iter().map(|s| {
            [
                s.t,
                a_value(&params, s.q, s.p, s.s),
                s.q,
                s.p - s.s,
                cf.a_mean(s.t - init.t, init.q, init.z()),
            ]
            .map(num)
        });
        art.csv(
            &format!("a_path_k_{}.csv", tag(k)),
            "first simulated path of A, inventory and basis, with the mean of A",
            &prov,
            &["t", "A", "q", "z", "mean_A"],
            rows,
        )?;
    }
    Ok(())
}

fn a_densities(ctx: &Context, art: &mut Artifacts) -> CliResult<()> {
    let mut integrals = Vec::new();
    let mut last = None;
    for k in k_values(ctx) {
        let (params, payoff) = a_process_params(ctx, k)?;
        let sim = ctx
            .config
            .sim_config(sim_defaults(A_PROCESS_STEPS, DEFAULT_PATHS, 50), &ctx.overrides)?;
        let ens = run(StrategyKind::NuStar, &params, &payoff, &sim)?;
        let cf = ClosedForm::new(&params)?;
        let init = sim.initial;
        let stats = a_process_stats(&ens, &params, &ens.record_times());
        let prov = Provenance::new(format!("figure 3 k={k}"), &params, &payoff).with_sim(&sim);
        let rows = stats.slices.iter().map(|sl| {
            let tau = sl.t - init.t;
            [
                sl.t,
                sl.mean.mean,
                sl.mean.se,
                sl.variance.var,
                sl.variance.se,
                cf.a_mean(tau, init.q, init.z()),
                cf.a_variance(tau),
            ]
            .map(num)
        });
        art.csv(
            &format!("a_k_{}.csv", tag(k)),
            "mean and variance of A per recorded time with closed-form values",
            &prov,
            &["t", "mean_A", "se_mean_A", "var_A", "se_var_A", "mean_A_exact", "var_A_exact"],
            rows,
        )?;
        let dens = stats.slices.iter().flat_map(|sl| {
            sl.histogram
                .bin_centers()
                .into_iter()
                .zip(sl.histogram.density())
                .map(move |(x, d)| [sl.t, x, d].map(num))
        });
        art.csv(
            &format!("a_k_{}_density.csv", tag(k)),
            "histogram density of A per recorded time",
            &prov,
            &["t", "A", "density"],
            dens,
        )?;
        integrals.push([k, stats.integral_a2.mean, stats.integral_a2.se].map(num));
        last = Some((params, payoff, sim));
    }
    if let Some((params, payoff, sim)) = last {
        let prov = Provenance::new("figure 3 integral", &params, &payoff).with_sim(&sim);
        art.csv(
            "a_integral.csv",
            "E[integral of A^2 dt] per temporary impact k",
            &prov,
            &["k", "mean", "se"],
            integrals,
        )?;
    }
    Ok(())
}

fn payoffs(ctx: &Context, art: &mut Artifacts) -> CliResult<()> {
    let cfg = &ctx.config;
    let params = cfg.params_or(ParamsRecord::short_horizon(1.0))?;
    let [lo, hi] = cfg.s_range.unwrap_or(S_RANGE);
    let n = cfg.s_points.unwrap_or(S_POINTS);
    if !(lo < hi) || n < 2 {
        return Err(CliError::Config(format!("bad s_range [{lo}, {hi}] or s_points {n}")));
    }
    for (name, spec) in [
        ("logistic", PayoffSpec::logistic_example()),
        ("quadratic", PayoffSpec::quadratic_example()),
    ] {
        let prov = Provenance::new(format!("figure 4 {name}"), &params, &spec);
        let rows = (0..n).map(|i| {
            let s = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            [s, spec.value(s), s].map(num)
        });
        art.csv(
            &format!("payoff_{name}.csv"),
            "payoff and identity on the spot grid",
            &prov,
            &["s", "psi", "identity"],
            rows,
        )?;
    }
    Ok(())
}

/// Payoffs of figure 5 and `compare`: the configured one, or both examples.
pub(crate) fn sweep_payoffs(ctx: &Context) -> Vec<(String, PayoffSpec)> {
    match &ctx.config.payoff {
        Some(p) => vec![(p.kind().to_string(), p.clone())],
        None => vec![
            ("logistic".into(), PayoffSpec::logistic_example()),
            ("quadratic".into(), PayoffSpec::quadratic_example()),
        ],
    }
}

fn horizon_performance(ctx: &Context, art: &mut Artifacts) -> CliResult<()> {
    let cfg = &ctx.config;
    let base = cfg.params.unwrap_or(ParamsRecord::short_horizon(1.0));
    let horizons = cfg.horizons.clone().unwrap_or_else(|| DEFAULT_HORIZONS.to_vec());
    let sim = cfg.sim_config(sim_defaults(DEFAULT_STEPS, DEFAULT_PATHS, DEFAULT_STEPS), &ctx.overrides)?;
    let limit = -base.alpha * sim.initial.q * sim.initial.q;
    let kinds = [StrategyKind::NuTilde, StrategyKind::NuBar, StrategyKind::AlmgrenChriss];
    for (name, spec) in sweep_payoffs(ctx) {
        let mut rows = Vec::new();
        let mut prov_params = None;
        for &horizon in &horizons {
            let params = at_horizon(base, horizon)?;
            for kind in kinds {
                let est = run(kind, &params, &spec, &sim)?.excess_performance();
                rows.push(vec![num(horizon), kind.to_string(), num(est.mean), num(est.se), num(limit)]);
            }
            prov_params.get_or_insert(params);
        }
        let params = match prov_params {
            Some(p) => p,
            None => return Err(CliError::Config("horizons must not be empty".into())),
        };
        let prov = Provenance::new(format!("figure 5 {name}"), &params, &spec).with_sim(&sim);
        art.csv(
            &format!("performance_{name}.csv"),
            "mean excess performance per horizon and strategy; limit is -alpha q0^2",
            &prov,
            &["T", "strategy", "mean_excess", "se", "limit"],
            rows,
        )?;
    }
    Ok(())
}
