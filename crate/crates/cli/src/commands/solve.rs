use perpliq::ode::DEFAULT_H_STEPS;
use perpliq::{solve_h_system, ClosedForm, ParamsRecord, PayoffSpec};

use super::Context;
use crate::error::{CliError, CliResult};
use crate::output::{num, Provenance};

pub const DEFAULT_GRID_POINTS: usize = 1001;

pub fn solve(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let params = cfg.params_or(ParamsRecord::inventory_density())?;
    let payoff = cfg.payoff_or(PayoffSpec::Identity);
    let steps = ctx
        .overrides
        .n_steps
        .or(cfg.sim.and_then(|s| s.n_steps))
        .unwrap_or(DEFAULT_H_STEPS);
    let coeffs = solve_h_system(&params, steps)?;
    let cf = ClosedForm::new(&params)?;
    let n = cfg.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
    if n < 2 {
        return Err(CliError::Config(format!("grid_points must be at least 2, got {n}")));
    }

    let mut art = ctx.artifacts("solve")?;
    let prov = Provenance::new("solve", &params, &payoff).with_steps(steps);
    let rows = (0..coeffs.len()).map(|i| {
        let [h0, h1, h2, h3] = coeffs.node(i);
        [coeffs.t_grid()[i], h0, h1, h2, h3].map(num)
    });
    art.csv(
        "h_coefficients.csv",
        "ODE solution h0..h3 on the graded mesh",
        &prov,
        &["t", "h0", "h1", "h2", "h3"],
        rows,
    )?;

    let horizon = params.horizon();
    let grid = (0..n).map(|i| {
        let t = horizon * i as f64 / (n - 1) as f64;
        let (f, g) = cf.fg(t);
        [t, cf.xi(t), cf.pi(t), f, g].map(num)
    });
    art.csv(
        "fg_grid.csv",
        "closed-form xi, pi, f, g on a uniform grid",
        &prov,
        &["t", "xi", "pi", "f", "g"],
        grid,
    )?;
    let dir = art.dir().to_path_buf();
    art.finish()?;

    let last = coeffs.node(coeffs.len() - 1);
    let expected = [0.0, -params.alpha(), 0.0, 0.0];
    let terminal_ok = last == expected;
    println!(
        "terminal h(T) = ({}, {}, {}, {}) expected ({}, {}, {}, {}): {}",
        last[0],
        last[1],
        last[2],
        last[3],
        expected[0],
        expected[1],
        expected[2],
        expected[3],
        if terminal_ok { "ok" } else { "MISMATCH" }
    );
    let first = coeffs.node(0);
    println!("h(0) = ({:.8}, {:.8}, {:.8}, {:.8})", first[0], first[1], first[2], first[3]);
    println!("wrote {}", dir.display());
    if terminal_ok {
        Ok(())
    } else {
        Err(CliError::Numerical("terminal conditions not reproduced".into()))
    }
}
