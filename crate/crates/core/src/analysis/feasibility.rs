//! Computable parameter checks and the step-size sweep.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::expectation::{build_expectation_matrix, jury_quadratic};
use super::jury::{jury_quintic, Condition};
use super::linalg::spectral_radius;
use super::moments::build_moment_matrix;
use crate::dither::DitherSpec;
use crate::dynamics::AlgoParams;
use crate::error::Result;
use crate::objectives::QuadraticForm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub feasible: bool,
    pub mu: f64,
    pub reasons: Vec<Condition>,
    pub spectral_radius_ae: f64,
    pub spectral_radius_ams: f64,
    pub spectral_radius_upper: f64,
    /// Jury verdict on the quintic factor of the second-moment polynomial.
    /// Informational; not part of `feasible`.
    pub jury_quintic_pass: bool,
}

fn dense(m: &nalgebra::Matrix6<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(6, 6, m.iter().copied())
}

/// Checks, for curvature `mu`:
/// 1. `beta > mu rho gamma`
/// 2. the Jury conditions of the expectation dynamics
/// 3. `spectral_radius(A_ms) < 1`
/// 4. `spectral_radius(A_ms + eps Q2) < 1`
pub fn check_feasibility(p: &AlgoParams, mu: f64) -> StabilityReport {
    let mut reasons = vec![Condition::less_than(
        "beta > mu rho gamma",
        mu * p.rho() * p.gamma(),
        p.beta(),
    )];
    reasons.extend(jury_quadratic(p, mu).conditions);
    let mm = build_moment_matrix(p, mu);
    let sr_ams = spectral_radius(&dense(&mm.a_ms));
    let sr_up = spectral_radius(&dense(&mm.upper_matrix()));
    reasons.push(Condition::less_than("spectral radius of A_ms < 1", sr_ams, 1.0));
    reasons.push(Condition::less_than("spectral radius of A_ms + eps Q2 < 1", sr_up, 1.0));
    let q1 = p.chi() * mu * mu;
    let q2 = p.psi() / p.rho().powi(4);
    StabilityReport {
        feasible: reasons.iter().all(|c| c.holds),
        mu,
        reasons,
        spectral_radius_ae: build_expectation_matrix(p, mu).spectral_radius(),
        spectral_radius_ams: sr_ams,
        spectral_radius_upper: sr_up,
        jury_quintic_pass: jury_quintic(p.rho(), p.beta(), q1, q2).pass,
    }
}

/// Scalar surrogate check for each coordinate of a multidimensional
/// quadratic, using the diagonal curvature `(H + H^T)_ii`.
pub fn check_feasibility_per_coordinate(p: &AlgoParams, quad: &QuadraticForm) -> Vec<StabilityReport> {
    let c = quad.curvature_matrix();
    (0..quad.dim()).map(|i| check_feasibility(p, c[(i, i)])).collect()
}

/// Feasible step-size intervals at fixed `beta`, `eps` and dither.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub beta: f64,
    pub mu: f64,
    pub rho_max: f64,
    pub intervals: Vec<(f64, f64)>,
}

/// Scans `rho` over `(0, rho_max]` on a log grid of `n_grid` points and
/// refines every feasibility edge by bisection to relative width `tol`.
pub fn sweep_rho(
    beta: f64,
    eps: f64,
    dither: DitherSpec,
    mu: f64,
    rho_max: f64,
    n_grid: usize,
    tol: f64,
) -> Result<SweepResult> {
    if !(rho_max > 0.0 && rho_max.is_finite()) {
        return Err(crate::error::invalid("rho_max", "must be positive"));
    }
    if n_grid < 2 {
        return Err(crate::error::invalid("n_grid", "must be at least 2"));
    }
    // Validates beta and eps once.
    AlgoParams::new(rho_max, beta, eps, dither)?;
    let feasible = |rho: f64| -> bool {
        AlgoParams::new(rho, beta, eps, dither)
            .map(|p| check_feasibility(&p, mu).feasible)
            .unwrap_or(false)
    };
    let lo_exp = (rho_max * 1e-6).ln();
    let hi_exp = rho_max.ln();
    let grid: Vec<f64> = (0..n_grid)
        .map(|i| (lo_exp + (hi_exp - lo_exp) * i as f64 / (n_grid - 1) as f64).exp())
        .collect();
    let flags: Vec<bool> = grid.iter().map(|&r| feasible(r)).collect();

    let refine = |mut a: f64, mut b: f64, a_ok: bool| -> f64 {
        // Invariant: feasible(a) == a_ok, feasible(b) == !a_ok.
        while (b - a).abs() > tol * b.abs().max(f64::MIN_POSITIVE) {
            let mid = 0.5 * (a + b);
            if feasible(mid) == a_ok {
                a = mid;
            } else {
                b = mid;
            }
        }
        if a_ok {
            a
        } else {
            b
        }
    };

    let mut intervals = Vec::new();
    let mut start: Option<f64> = None;
    for i in 0..n_grid {
        match (flags[i], start) {
            (true, None) => {
                start = Some(if i == 0 { grid[0] } else { refine(grid[i - 1], grid[i], false) });
            }
            (false, Some(s)) => {
                intervals.push((s, refine(grid[i - 1], grid[i], true)));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push((s, rho_max));
    }
    Ok(SweepResult {
        beta,
        mu,
        rho_max,
        intervals,
    })
}
