//! Moment dynamics, stability tests and parameter checks.
//!
//! Everything here assumes a scalar quadratic objective with curvature `mu`
//! unless stated otherwise.

pub mod expectation;
pub mod feasibility;
pub mod jury;
pub mod linalg;
pub mod moments;
pub mod practical;

pub use expectation::{build_expectation_matrix, jury_quadratic, propagate_expectation, ExpectationMatrix};
pub use feasibility::{check_feasibility, check_feasibility_per_coordinate, sweep_rho, StabilityReport, SweepResult};
pub use jury::{jury_quintic, jury_quintic_coeffs, jury_test, Condition, JuryReport};
pub use linalg::spectral_radius;
pub use moments::{
    bound_abs_expectation, build_moment_matrix, initial_moments, propagate_moment_bounds, t1, t2,
    theoretical_bounds, MomentMatrix, TheoreticalBounds,
};
pub use practical::{verify_practical_convergence, PracticalOptions, PracticalProblem, PracticalReport};
