//! Overflow-free evaluation of the scalar Riccati solution shared by the
//! closed-form control and the small-funding expansion.
//!
//! With `c = 2 alpha - b > 0`, `a >= 0` and `omega = a / 2k`, the solution is
//! built from `D(tau) = cosh(omega tau) + (c/a) sinh(omega tau)`. Every
//! quantity is carried in the scaled form `Ds = exp(-omega tau) D`, which
//! only involves exponentials of nonpositive arguments and has a smooth limit
//! as `a -> 0`.

use crate::ode::quadrature::legendre16;

/// `(1 - exp(-y)) / y`, continuous at `y = 0`.
pub(crate) fn exprel_neg(y: f64) -> f64 {
    if y.abs() < 1e-8 {
        1.0 - 0.5 * y
    } else {
        -(-y).exp_m1() / y
    }
}

/// Below this value of `omega tau` the gamma2 closed form loses digits to
/// cancellation; a quadrature of the defining integral is used instead.
const GAMMA2_SWITCH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RiccatiKernel {
    pub k: f64,
    pub c: f64,
    pub a: f64,
    pub omega: f64,
    pub phi: f64,
}

impl RiccatiKernel {
    /// Kernel of the full problem: `a = 2 sqrt(k (b beta + phi))`.
    pub fn full(k: f64, b: f64, alpha: f64, phi: f64, beta: f64) -> Self {
        Self::with_rate(k, b, alpha, phi, b * beta + phi)
    }

    /// Kernel with funding switched off: `a = 2 sqrt(k phi)`.
    pub fn tilde(k: f64, b: f64, alpha: f64, phi: f64) -> Self {
        Self::with_rate(k, b, alpha, phi, phi)
    }

    fn with_rate(k: f64, b: f64, alpha: f64, phi: f64, rate: f64) -> Self {
        let a = 2.0 * (k * rate).sqrt();
        Self {
            k,
            c: 2.0 * alpha - b,
            a,
            omega: a / (2.0 * k),
            phi,
        }
    }

    /// `exp(-omega tau) D(tau)`.
    pub fn ds(&self, tau: f64) -> f64 {
        let y = 2.0 * self.omega * tau;
        0.5 * (1.0 + (-y).exp()) + self.c * tau / (2.0 * self.k) * exprel_neg(y)
    }

    /// `exp(-omega tau) D'(tau)`.
    pub fn ds_prime(&self, tau: f64) -> f64 {
        let e = (-2.0 * self.omega * tau).exp();
        self.omega * 0.5 * (1.0 - e) + self.c / (2.0 * self.k) * 0.5 * (1.0 + e)
    }

    /// `exp(-omega tau) * integral_0^tau D(x) dx`.
    pub fn is(&self, tau: f64) -> f64 {
        let e1 = exprel_neg(self.omega * tau);
        tau * exprel_neg(2.0 * self.omega * tau) + self.c / (2.0 * self.k) * 0.5 * tau * tau * e1 * e1
    }

    /// Solution of `d xi / d tau = xi^2 / 2k - a^2 / 2k` with `xi = -c` at `tau = 0`.
    pub fn xi(&self, tau: f64) -> f64 {
        let e = (-2.0 * self.omega * tau).exp();
        -(self.a * 0.5 * (1.0 - e) + self.c * 0.5 * (1.0 + e)) / self.ds(tau)
    }

    /// Solution of `d pi / d tau = xi pi / 2k - 2 phi` with `pi = -c` at `tau = 0`.
    pub fn pi(&self, tau: f64) -> f64 {
        (-self.c * (-self.omega * tau).exp() - 2.0 * self.phi * self.is(tau)) / self.ds(tau)
    }

    /// `integral_0^tau D(x) dx / D(tau)`.
    pub fn weight_integral(&self, tau: f64) -> f64 {
        self.is(tau) / self.ds(tau)
    }

    /// `D(tau_u) / D(tau_t)` for `0 <= tau_u <= tau_t`.
    pub fn decay_ratio(&self, tau_u: f64, tau_t: f64) -> f64 {
        (-self.omega * (tau_t - tau_u)).exp() * self.ds(tau_u) / self.ds(tau_t)
    }

    /// `b * integral_0^tau D'(x) I(x) dx / D(tau)^2` where `I` is the running integral of `D`.
    pub fn gamma2(&self, b: f64, tau: f64) -> f64 {
        if tau <= 0.0 {
            0.0
        } else if self.omega * tau < GAMMA2_SWITCH {
            self.gamma2_quadrature(b, tau)
        } else {
            self.gamma2_closed(b, tau)
        }
    }

    fn gamma2_quadrature(&self, b: f64, tau: f64) -> f64 {
        let w = self.omega;
        let d = self.ds(tau);
        let integral = legendre16().integrate(0.0, tau, |x| {
            (-2.0 * w * (tau - x)).exp() * self.ds_prime(x) * self.is(x)
        });
        b * integral / (d * d)
    }

    fn gamma2_closed(&self, b: f64, tau: f64) -> f64 {
        let w = self.omega;
        let cc = (self.a - self.c) / (self.a + self.c);
        let e1 = (-w * tau).exp();
        let e2 = e1 * e1;
        let e3 = e2 * e1;
        let e4 = e2 * e2;
        let bracket = 4.0 * w * cc * tau * e2 - 2.0 * (1.0 - cc) * (e2 - e1)
            + 2.0 * (cc * cc - cc) * (e2 - e3)
            + (e2 - 1.0)
            - cc * cc * (e2 - e4);
        let den = cc * e2 + 1.0;
        -b / (2.0 * w * den * den) * bracket
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inventory_kernel() -> RiccatiKernel {
        RiccatiKernel::full(0.1, 0.1, 100.0, 0.5, 5.0)
    }

    /// Literal hyperbolic forms, fine for moderate omega tau.
    fn literal_xi(kern: &RiccatiKernel, tau: f64) -> f64 {
        let cc = (kern.a - kern.c) / (kern.a + kern.c);
        let e = cc * (-2.0 * kern.omega * tau).exp();
        kern.a * (e - 1.0) / (e + 1.0)
    }

    fn literal_pi(kern: &RiccatiKernel, tau: f64) -> f64 {
        let (a, k, w) = (kern.a, kern.k, kern.omega);
        let cc = (a - kern.c) / (a + kern.c);
        let e1 = (-w * tau).exp();
        let e2 = e1 * e1;
        -4.0 * k * kern.phi * (cc * e1 + 1.0) * (1.0 - e1) / (a * (cc * e2 + 1.0))
            + e1 * (cc + 1.0) * (-kern.c) / (cc * e2 + 1.0)
    }

    #[test]
    fn matches_literal_forms() {
        let kern = inventory_kernel();
        for i in 0..=20 {
            let tau = i as f64 * 0.05;
            assert_relative_eq!(kern.xi(tau), literal_xi(&kern, tau), max_relative = 1e-12);
            assert_relative_eq!(kern.pi(tau), literal_pi(&kern, tau), max_relative = 1e-11);
        }
    }

    #[test]
    fn terminal_values() {
        let kern = inventory_kernel();
        assert_eq!(kern.xi(0.0), -199.9);
        assert_eq!(kern.pi(0.0), -199.9);
        assert_eq!(kern.weight_integral(0.0), 0.0);
        assert_eq!(kern.gamma2(0.1, 0.0), 0.0);
        assert_eq!(kern.decay_ratio(0.3, 0.3), 1.0);
    }

    #[test]
    fn large_frequency_stays_finite() {
        let kern = RiccatiKernel::full(2e-5, 0.1, 100.0, 0.5, 5.0);
        for tau in [0.0, 1e-3, 0.5, 5.0] {
            assert!(kern.xi(tau).is_finite());
            assert!(kern.pi(tau).is_finite());
            assert!(kern.weight_integral(tau).is_finite());
        }
        assert_relative_eq!(kern.xi(5.0), -kern.a, max_relative = 1e-12);
    }

    #[test]
    fn zero_frequency_limit() {
        let kern = RiccatiKernel::tilde(0.1, 0.1, 0.1, 0.0);
        assert_eq!(kern.a, 0.0);
        let c = 0.1;
        for tau in [0.1, 0.5, 2.0] {
            let d = 1.0 + c * tau / 0.2;
            assert_relative_eq!(kern.xi(tau), -c / d, max_relative = 1e-14);
            assert_relative_eq!(
                kern.decay_ratio(0.05, tau),
                (1.0 + c * 0.05 / 0.2) / d,
                max_relative = 1e-14
            );
            assert!(kern.gamma2(0.1, tau).is_finite());
        }
    }

    /// RK4 on the tau-form ODEs of the funding-free coefficients:
    /// `g1' = -1 + (xi/2k) g1`, `g2' = (xi/2k)(b g1 + 2 g2)` with zero initial values.
    fn gamma_ode(kern: &RiccatiKernel, b: f64, tau: f64, n: usize) -> (f64, f64) {
        let rhs = |x: f64, y: [f64; 2]| {
            let m = kern.xi(x) / (2.0 * kern.k);
            [-1.0 + m * y[0], m * (b * y[0] + 2.0 * y[1])]
        };
        let h = tau / n as f64;
        let mut y = [0.0, 0.0];
        for i in 0..n {
            let x = i as f64 * h;
            let k1 = rhs(x, y);
            let k2 = rhs(x + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
            let k3 = rhs(x + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
            let k4 = rhs(x + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for j in 0..2 {
                y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        (y[0], y[1])
    }

    #[test]
    fn gamma_coefficients_solve_their_odes() {
        for (phi, alpha) in [(0.5, 0.1), (0.5, 100.0), (1e-6, 0.1), (0.0, 0.1)] {
            let kern = RiccatiKernel::tilde(0.1, 0.1, alpha, phi);
            for tau in [0.01, 0.05, 0.2, 0.5] {
                let (g1, g2) = gamma_ode(&kern, 0.1, tau, 4000);
                assert_relative_eq!(-kern.weight_integral(tau), g1, max_relative = 1e-8);
                assert_relative_eq!(kern.gamma2(0.1, tau), g2, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn gamma2_branches_agree_at_switch() {
        let kern = RiccatiKernel::tilde(0.1, 0.1, 0.1, 0.5);
        let tau = GAMMA2_SWITCH / kern.omega;
        let quad = kern.gamma2_quadrature(0.1, tau);
        let closed = kern.gamma2_closed(0.1, tau);
        assert_relative_eq!(quad, closed, max_relative = 1e-11);
        // Arbitrary-precision reference for this point.
        assert_relative_eq!(closed, 1.407_690_655_476_261e-5, max_relative = 1e-11);
    }
}
