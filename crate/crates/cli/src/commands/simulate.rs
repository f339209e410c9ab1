use perpliq::sim::{a_process_stats, inventory_stats};
use perpliq::sim::{DEFAULT_PATHS, DEFAULT_STEPS};
use perpliq::{ParamsRecord, PayoffSpec};

use super::{default_strategy, run, sim_defaults, Context};
use crate::error::CliResult;
use crate::output::{num, Provenance};

pub fn simulate(ctx: &Context, per_path: bool) -> CliResult<()> {
    let cfg = &ctx.config;
    let params = cfg.params_or(ParamsRecord::inventory_density())?;
    let payoff = cfg.payoff_or(PayoffSpec::Identity);
    let kind = cfg.strategy.unwrap_or_else(|| default_strategy(&payoff));
    let sim = cfg.sim_config(sim_defaults(DEFAULT_STEPS, DEFAULT_PATHS, 10), &ctx.overrides)?;
    let ens = run(kind, &params, &payoff, &sim)?;

    let inv = inventory_stats(&ens);
    let mut art = ctx.artifacts("simulate")?;
    let prov = Provenance::new(format!("simulate {kind}"), &params, &payoff).with_sim(&sim);
    let times = ens.record_times();
    let a = a_process_stats(&ens, &params, &times);
    let rows = inv
        .iter()
        .zip(&a.slices)
        .map(|(q, a)| [q.t, q.mean, q.q05, q.q95, a.mean.mean, a.variance.var].map(num));
    art.csv(
        "summary.csv",
        "inventory mean and 5/95% quantiles, mean and variance of A, per recorded time",
        &prov,
        &["t", "mean_q", "q05", "q95", "mean_A", "var_A"],
        rows,
    )?;

    let perf = ens.performances();
    let excess = ens.excess_performances();
    let rows = ens
        .paths()
        .iter()
        .enumerate()
        .map(|(i, p)| vec![i.to_string(), num(perf[i]), num(excess[i]), num(p.a_integral), num(p.terminal.q)]);
    art.csv(
        "performance.csv",
        "per-path performance, excess over x0 + q0 p0, integral of A^2, terminal inventory",
        &prov,
        &["path", "performance", "excess", "a_integral", "q_T"],
        rows,
    )?;

    if per_path {
        let rows = ens.paths().iter().enumerate().flat_map(|(i, p)| {
            p.samples
                .iter()
                .map(move |s| vec![i.to_string(), num(s.t), num(s.s), num(s.p), num(s.q), num(s.x), num(s.nu)])
        });
        art.csv(
            "paths.csv",
            "recorded samples of every path",
            &prov,
            &["path", "t", "s", "p", "q", "x", "nu"],
            rows,
        )?;
    }
    let dir = art.dir().to_path_buf();
    art.finish()?;

    let est = ens.performance();
    let ex = ens.excess_performance();
    let ai = ens.a_integral();
    println!("strategy {kind}, {} paths x {} steps, seed {}", sim.n_paths, sim.n_steps, sim.seed);
    println!("performance        {:.6} +- {:.6}", est.mean, est.se);
    println!("excess performance {:.6} +- {:.6}", ex.mean, ex.se);
    println!("E[int A^2 dt]      {:.6} +- {:.6}", ai.mean, ai.se);
    println!("wrote {}", dir.display());
    Ok(())
}
