pub mod expectation;
pub mod quadrature;
pub mod rk4;

pub use expectation::{gamma0, gaussian_expectation, Gamma0Rule, Gamma0Table, DEFAULT_GAMMA0_PANELS};
pub use quadrature::{simpson, GaussHermiteRule, QuadratureRule, DEFAULT_HERMITE_NODES};
pub use rk4::{graded_mesh, rk4_step, solve_h_system, value_identity, HCoefficients, DEFAULT_H_STEPS};
