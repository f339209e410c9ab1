use perpliq::sim::{Estimate, DEFAULT_PATHS, DEFAULT_STEPS};
use perpliq::{ParamsRecord, PayoffSpec, StrategyKind};

use super::{at_horizon, run, sim_defaults, Context, DEFAULT_HORIZONS};
use crate::error::{CliError, CliResult};
use crate::output::{num, Provenance};

pub const DEFAULT_STRATEGIES: [StrategyKind; 3] =
    [StrategyKind::NuTilde, StrategyKind::NuBar, StrategyKind::AlmgrenChriss];

/// Mean performance of each strategy on common random numbers across a horizon sweep.
pub fn compare(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let payoff = cfg.payoff_or(PayoffSpec::logistic_example());
    let base = cfg.params.unwrap_or(ParamsRecord::short_horizon(1.0));
    let horizons = cfg.horizons.clone().unwrap_or_else(|| DEFAULT_HORIZONS.to_vec());
    let kinds = cfg.strategies.clone().unwrap_or_else(|| DEFAULT_STRATEGIES.to_vec());
    if horizons.is_empty() || kinds.is_empty() {
        return Err(CliError::Config("compare needs at least one horizon and one strategy".into()));
    }
    let sim = cfg.sim_config(sim_defaults(DEFAULT_STEPS, DEFAULT_PATHS, DEFAULT_STEPS), &ctx.overrides)?;

    let mut table = Vec::new();
    let mut ordering = Vec::new();
    for &horizon in &horizons {
        let params = at_horizon(base, horizon)?;
        let mut perf = Vec::new();
        for &kind in &kinds {
            let ens = run(kind, &params, &payoff, &sim)?;
            table.push((horizon, kind, ens.performance(), ens.excess_performance()));
            perf.push((kind, ens.performances()));
        }
        let find = |k: StrategyKind| perf.iter().find(|(kk, _)| *kk == k).map(|(_, v)| v);
        if let (Some(bar), Some(tilde)) = (find(StrategyKind::NuBar), find(StrategyKind::NuTilde)) {
            ordering.push((horizon, Estimate::paired(bar, tilde)));
        }
    }

    let first = at_horizon(base, horizons[0])?;
    let prov = Provenance::new(format!("compare {}", payoff.kind()), &first, &payoff).with_sim(&sim);
    let mut art = ctx.artifacts("compare")?;
    art.csv(
        "compare.csv",
        "mean performance and excess over x0 + q0 p0 per horizon and strategy",
        &prov,
        &["T", "strategy", "mean", "se", "mean_excess", "se_excess"],
        table.iter().map(|(t, k, p, e)| {
            vec![num(*t), k.to_string(), num(p.mean), num(p.se), num(e.mean), num(e.se)]
        }),
    )?;
    if !ordering.is_empty() {
        art.csv(
            "compare_ordering.csv",
            "paired difference nu_bar - nu_tilde and whether nu_bar is at least as good",
            &prov,
            &["T", "bar_minus_tilde", "se", "bar_ge_tilde", "exceeds_2se"],
            ordering.iter().map(|(t, d)| {
                vec![
                    num(*t),
                    num(d.mean),
                    num(d.se),
                    (d.mean >= 0.0).to_string(),
                    (d.mean.abs() > 2.0 * d.se).to_string(),
                ]
            }),
        )?;
    }
    let dir = art.dir().to_path_buf();
    art.finish()?;

    println!("payoff {}, {} paths x {} steps, seed {}", payoff.kind(), sim.n_paths, sim.n_steps, sim.seed);
    println!("{:>8}  {:<16} {:>14} {:>10}", "T", "strategy", "excess", "se");
    for (t, k, _, e) in &table {
        println!("{t:>8}  {:<16} {:>14.4} {:>10.4}", k.as_str(), e.mean, e.se);
    }
    for (t, d) in &ordering {
        let verdict = if d.mean >= 0.0 { "nu_bar >= nu_tilde" } else { "nu_bar < nu_tilde" };
        println!("T={t}: {verdict} by {:.3e} +- {:.1e}", d.mean, d.se);
    }
    println!("wrote {}", dir.display());
    Ok(())
}
