use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{MarketState, ModelParams};

pub const DEFAULT_H_STEPS: usize = 2000;

/// One classical Runge–Kutta step of size `h` for `y' = f(x, y)`.
pub fn rk4_step<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    x: f64,
    y: &[f64; N],
    h: f64,
) -> [f64; N] {
    let shift = |y: &[f64; N], k: &[f64; N], s: f64| -> [f64; N] {
        std::array::from_fn(|i| y[i] + s * k[i])
    };
    let k1 = f(x, y);
    let k2 = f(x + 0.5 * h, &shift(y, &k1, 0.5 * h));
    let k3 = f(x + 0.5 * h, &shift(y, &k2, 0.5 * h));
    let k4 = f(x + h, &shift(y, &k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Time-to-maturity nodes `0 = tau_0 < ... < tau_n = T`, geometrically graded
/// so that steps near maturity resolve the boundary layer of width `2k / c`.
///
/// The mesh is the image of a uniform grid on `[0, 1]`, so the mesh for `n`
/// steps is contained in the mesh for any multiple of `n`.
pub fn graded_mesh(horizon: f64, layer: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    let lam = (horizon / layer).ln_1p();
    let mut tau: Vec<f64> = (0..=n)
        .map(|i| layer * (lam * i as f64 / n as f64).exp_m1())
        .collect();
    tau[n] = horizon;
    tau
}

pub(crate) fn boundary_layer(params: &ModelParams) -> f64 {
    let a = 2.0 * (params.k() * (params.b() * params.beta() + params.phi())).sqrt();
    2.0 * params.k() / params.penalty_gap().max(a)
}

/// Backward integration in time-to-maturity of `y' = f(tau, y)` from `y(0) = y0`
/// on `tau_grid`, returning one state per node.
pub(crate) fn integrate_on<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    y0: [f64; N],
    tau_grid: &[f64],
) -> Result<Vec<[f64; N]>> {
    let mut out = Vec::with_capacity(tau_grid.len());
    out.push(y0);
    let mut y = y0;
    for w in tau_grid.windows(2) {
        y = rk4_step(&f, w[0], &y, w[1] - w[0]);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("ODE state at tau = {}", w[1])));
        }
        out.push(y);
    }
    Ok(out)
}

/// Coefficients of the quadratic value function `h0 + h1 q^2 + h2 z^2 + h3 q z`
/// on an ascending time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HCoefficients {
    t_grid: Vec<f64>,
    h0: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    h3: Vec<f64>,
}

/// Right-hand side in time-to-maturity `tau = T - t` (the sign-flipped system).
fn h_rhs(params: &ModelParams) -> impl Fn(f64, &[f64; 4]) -> [f64; 4] {
    let (k, b, beta, phi) = (params.k(), params.b(), params.beta(), params.phi());
    let sig2 = params.basis_variance();
    move |_, h| {
        let f = b * (1.0 + h[3]) + 2.0 * h[1];
        let g = 2.0 * b * h[2] + h[3];
        [
            sig2 * h[2],
            f * f / (4.0 * k) - phi,
            g * g / (4.0 * k),
            f * g / (2.0 * k) - beta,
        ]
    }
}

/// Solves the four coupled Riccati-type equations for the value coefficients
/// backward from `h(T) = (0, -alpha, 0, 0)` with `n_steps` RK4 steps.
pub fn solve_h_system(params: &ModelParams, n_steps: usize) -> Result<HCoefficients> {
    if n_steps < 2 {
        return Err(Error::Config(format!("n_steps must be at least 2, got {n_steps}")));
    }
    let horizon = params.horizon();
    let tau = graded_mesh(horizon, boundary_layer(params), n_steps);
    let states = integrate_on(h_rhs(params), [0.0, -params.alpha(), 0.0, 0.0], &tau)?;
    let n = tau.len();
    let mut c = HCoefficients {
        t_grid: Vec::with_capacity(n),
        h0: Vec::with_capacity(n),
        h1: Vec::with_capacity(n),
        h2: Vec::with_capacity(n),
        h3: Vec::with_capacity(n),
    };
    for (tau_i, h) in tau.iter().zip(&states).rev() {
        c.t_grid.push(horizon - tau_i);
        c.h0.push(h[0]);
        c.h1.push(h[1]);
        c.h2.push(h[2]);
        c.h3.push(h[3]);
    }
    c.t_grid[0] = 0.0;
    Ok(c)
}

impl HCoefficients {
    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }
    pub fn h0(&self) -> &[f64] {
        &self.h0
    }
    pub fn h1(&self) -> &[f64] {
        &self.h1
    }
    pub fn h2(&self) -> &[f64] {
        &self.h2
    }
    pub fn h3(&self) -> &[f64] {
        &self.h3
    }

    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    /// `(h0, h1, h2, h3)` at grid node `i`.
    pub fn node(&self, i: usize) -> [f64; 4] {
        [self.h0[i], self.h1[i], self.h2[i], self.h3[i]]
    }

    /// Linearly interpolated coefficients at time `t`.
    pub fn at(&self, t: f64) -> Result<[f64; 4]> {
        let (start, end) = (self.t_grid[0], self.t_grid[self.len() - 1]);
        let tol = 1e-12 * end.abs().max(1.0);
        if !(t >= start - tol && t <= end + tol) {
            return Err(Error::TimeOutOfGrid { t, start, end });
        }
        let t = t.clamp(start, end);
        let j = self.t_grid.partition_point(|&x| x <= t);
        if j >= self.len() {
            return Ok(self.node(self.len() - 1));
        }
        let i = j - 1;
        let w = (t - self.t_grid[i]) / (self.t_grid[j] - self.t_grid[i]);
        let (a, b) = (self.node(i), self.node(j));
        Ok(std::array::from_fn(|m| a[m] + w * (b[m] - a[m])))
    }

    /// Feedback coefficients `f = 2 h1 + b (1 + h3)` and `g = h3 + 2 b h2` at node `i`.
    pub fn fg_node(&self, i: usize, b: f64) -> (f64, f64) {
        let h = self.node(i);
        (2.0 * h[1] + b * (1.0 + h[3]), h[3] + 2.0 * b * h[2])
    }
}

/// Value `x + q p + h0 + h1 q^2 + h2 z^2 + h3 q z` for the identity payoff.
pub fn value_identity(state: &MarketState, coeffs: &HCoefficients) -> Result<f64> {
    let [h0, h1, h2, h3] = coeffs.at(state.t)?;
    let (q, z) = (state.q, state.z());
    Ok(state.x + q * state.p + h0 + h1 * q * q + h2 * z * z + h3 * q * z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamsRecord;
    use crate::ode::quadrature::simpson;
    use approx::assert_relative_eq;

    fn inventory_params() -> ModelParams {
        ModelParams::try_from(ParamsRecord::inventory_density()).unwrap()
    }

    #[test]
    fn terminal_slice() {
        let p = inventory_params();
        let c = solve_h_system(&p, 200).unwrap();
        assert_eq!(c.node(c.len() - 1), [0.0, -100.0, 0.0, 0.0]);
        assert_eq!(c.t_grid()[c.len() - 1], 1.0);
        assert_eq!(c.t_grid()[0], 0.0);
        assert!(c.t_grid().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_tiny_step_counts() {
        assert!(solve_h_system(&inventory_params(), 1).is_err());
    }

    #[test]
    fn reference_values_at_time_zero() {
        let c = solve_h_system(&inventory_params(), DEFAULT_H_STEPS).unwrap();
        let h = c.node(0);
        let expect = [1.12558156, -0.19581051, 2.62346682, -1.97779997];
        for i in 0..4 {
            assert_relative_eq!(h[i], expect[i], max_relative = 1e-7);
        }
    }

    #[test]
    fn no_funding_no_penalty_decouples() {
        let p = inventory_params().with_beta(0.0).unwrap();
        let p = ModelParams::try_from(ParamsRecord { phi: 0.0, ..p.record() }).unwrap();
        let c = solve_h_system(&p, 1000).unwrap();
        assert!(c.h2().iter().all(|&v| v == 0.0));
        assert!(c.h3().iter().all(|&v| v == 0.0));
        // With h3 = 0 the h1 equation is h1' = (b + 2 h1)^2 / 4k, solvable exactly.
        let (k, b, alpha) = (p.k(), p.b(), p.alpha());
        for (i, &t) in c.t_grid().iter().enumerate() {
            let u0 = b - 2.0 * alpha;
            let u = u0 / (1.0 - u0 * (1.0 - t) / (2.0 * k));
            assert_relative_eq!(c.h1()[i], (u - b) / 2.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn h0_is_integral_of_h2() {
        let p = inventory_params();
        let c = solve_h_system(&p, 4000).unwrap();
        let i = c.t_grid().partition_point(|&t| t < 0.5);
        let t0 = c.t_grid()[i];
        let integral = simpson(t0, 1.0, 2000, |u| c.at(u).unwrap()[2]);
        assert_relative_eq!(c.h0()[i], p.basis_variance() * integral, max_relative = 1e-5);
    }

    #[test]
    fn interpolation_and_range() {
        let c = solve_h_system(&inventory_params(), 100).unwrap();
        let mid = 0.5 * (c.t_grid()[3] + c.t_grid()[4]);
        let v = c.at(mid).unwrap();
        assert_relative_eq!(v[1], 0.5 * (c.h1()[3] + c.h1()[4]), max_relative = 1e-14);
        assert!(matches!(c.at(1.5), Err(Error::TimeOutOfGrid { .. })));
        assert!(matches!(c.at(-0.1), Err(Error::TimeOutOfGrid { .. })));
    }

    #[test]
    fn value_identity_edge_cases() {
        let p = inventory_params();
        let c = solve_h_system(&p, 500).unwrap();
        let terminal = MarketState::new(1.0, 3.0, 10.0, 101.0, 100.0);
        assert_relative_eq!(
            value_identity(&terminal, &c).unwrap(),
            3.0 + 1010.0 - 100.0 * 100.0,
            max_relative = 1e-14
        );
        let flat = MarketState::new(0.0, 2.0, 0.0, 100.0, 100.0);
        assert_eq!(value_identity(&flat, &c).unwrap(), 2.0 + c.h0()[0]);
    }

    #[test]
    fn graded_meshes_nest() {
        let coarse = graded_mesh(1.0, 1e-3, 500);
        let fine = graded_mesh(1.0, 1e-3, 1000);
        for (i, &x) in coarse.iter().enumerate() {
            assert_relative_eq!(x, fine[2 * i], max_relative = 1e-14);
        }
    }
}
