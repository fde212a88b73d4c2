//! Numerical check of practical convergence for bracketed sequences.
//!
//! A sequence with
//! `(a + eta q1) theta_k + eta b1 <= theta_{k+1} <= (a + eta q2) theta_k + eta b2`
//! (element-wise) and Schur-stable `a` should settle in an `O(eta)` ball.
//! The verifier drives such sequences with uniform draws inside the bracket
//! and compares the observed tail size against a certificate.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{spectral_radius, GUARD};
use super::moments::MomentMatrix;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PracticalProblem {
    pub a: DMatrix<f64>,
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub b2: DVector<f64>,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PracticalOptions {
    pub trials: usize,
    pub steps: usize,
    pub seed: u64,
    /// Starting point; zero when absent.
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
}

impl Default for PracticalOptions {
    fn default() -> Self {
        Self {
            trials: 64,
            steps: 2000,
            seed: 0,
            theta0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PracticalReport {
    /// Solution of `a^T P a - P = -I`, row-major.
    pub lyapunov: Vec<Vec<f64>>,
    /// Max-abs residual of the Lyapunov equation.
    pub lyapunov_residual: f64,
    pub spectral_radius_a: f64,
    pub spectral_radius_lower: f64,
    pub spectral_radius_upper: f64,
    /// Largest `||theta_k||_2` over the second half of every trial.
    pub limsup: f64,
    /// `c = 2 * ||(I - a - eta q2)^-1||_2 * max(||b1||, ||b2||) * 2`.
    pub certificate: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Solves `a^T P a - P = -I` through `(I - a^T (x) a^T) vec(P) = vec(I)`.
pub fn solve_discrete_lyapunov(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let at = a.transpose();
    let k = at.kronecker(&at);
    let lhs = DMatrix::<f64>::identity(n * n, n * n) - k;
    let rhs = DVector::from_iterator(n * n, DMatrix::<f64>::identity(n, n).iter().copied());
    let vec_p = lhs.lu().solve(&rhs).ok_or(Error::Singular("lyapunov system"))?;
    Ok(DMatrix::from_iterator(n, n, vec_p.iter().copied()))
}

impl PracticalProblem {
    /// The bracket of the second-moment recursion with `eta = eps`.
    pub fn from_moments(m: &MomentMatrix) -> Self {
        let d = |x: &nalgebra::Matrix6<f64>| DMatrix::from_iterator(6, 6, x.iter().copied());
        let v = |x: &nalgebra::Vector6<f64>| DVector::from_iterator(6, x.iter().copied());
        PracticalProblem {
            a: d(&m.a_ms),
            q1: d(&m.q1),
            q2: d(&m.q2),
            b1: v(&m.b1),
            b2: v(&m.b2),
            eta: m.eps,
        }
    }
}

pub fn verify_practical_convergence(prob: &PracticalProblem, opts: &PracticalOptions) -> Result<PracticalReport> {
    let n = prob.a.nrows();
    for (name, m) in [("a", &prob.a), ("q1", &prob.q1), ("q2", &prob.q2)] {
        if m.nrows() != n || m.ncols() != n {
            return Err(invalid(name, format!("must be {n}x{n}")));
        }
    }
    for (name, v) in [("b1", &prob.b1), ("b2", &prob.b2)] {
        if v.len() != n {
            return Err(invalid(name, format!("must have length {n}")));
        }
    }
    if !(prob.eta > 0.0 && prob.eta.is_finite()) {
        return Err(invalid("eta", "must be positive"));
    }
    let lower_m = &prob.a + &prob.q1 * prob.eta;
    let upper_m = &prob.a + &prob.q2 * prob.eta;
    let sr_a = spectral_radius(&prob.a);
    let sr_lo = spectral_radius(&lower_m);
    let sr_up = spectral_radius(&upper_m);
    for sr in [sr_a, sr_lo, sr_up] {
        if 1.0 - sr <= GUARD {
            return Err(Error::Unstable(sr));
        }
    }

    let p = solve_discrete_lyapunov(&prob.a)?;
    let resid = prob.a.transpose() * &p * &prob.a - &p + DMatrix::<f64>::identity(n, n);
    let lyapunov_residual = resid.amax();

    let inv = (DMatrix::<f64>::identity(n, n) - &upper_m)
        .try_inverse()
        .ok_or(Error::Singular("I - a - eta q2"))?;
    let inv_norm = inv.singular_values().max();
    let certificate = 2.0 * inv_norm * prob.b1.norm().max(prob.b2.norm()) * 2.0;
    let bound = certificate * prob.eta;

    let theta0 = match &opts.theta0 {
        Some(t) if t.len() == n => DVector::from_vec(t.clone()),
        Some(_) => return Err(invalid("theta0", format!("must have length {n}"))),
        None => DVector::zeros(n),
    };
    let lo_b = &prob.b1 * prob.eta;
    let up_b = &prob.b2 * prob.eta;
    let tail_start = opts.steps / 2;
    let mut limsup = 0.0f64;
    for trial in 0..opts.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(trial as u64);
        let mut theta = theta0.clone();
        for k in 0..opts.steps {
            let lo = &lower_m * &theta + &lo_b;
            let hi = &upper_m * &theta + &up_b;
            for i in 0..n {
                if lo[i] > hi[i] {
                    return Err(Error::EmptyBracket {
                        step: k,
                        index: i,
                        lower: lo[i],
                        upper: hi[i],
                    });
                }
                let u: f64 = rng.random();
                theta[i] = lo[i] + (hi[i] - lo[i]) * u;
            }
            if k + 1 >= tail_start {
                limsup = limsup.max(theta.norm());
            }
        }
    }

    Ok(PracticalReport {
        lyapunov: (0..n).map(|i| p.row(i).iter().copied().collect()).collect(),
        lyapunov_residual,
        spectral_radius_a: sr_a,
        spectral_radius_lower: sr_lo,
        spectral_radius_upper: sr_up,
        limsup,
        certificate,
        bound,
        pass: limsup <= bound,
    })
}
