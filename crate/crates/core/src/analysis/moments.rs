//! Second-moment dynamics on a scalar quadratic and their bracketing
//! affine recursions.
//!
//! The state is
//! `zeta_k = [x~_{k-1}^2, x~_k^2, y_{k-1}^2, y_k^2, x~_{k-1} y_{k-1}, x~_k y_k]`
//! (in expectation). With `eps = 0` it evolves as `zeta_{k+1} = A_ms zeta_k`;
//! for `eps > 0` the remainder is enclosed by
//! `(A_ms + eps Q1) zeta + eps b1 <= zeta_{k+1} <= (A_ms + eps Q2) zeta + eps b2`.

use nalgebra::{Matrix6, Vector6};

use super::expectation::{build_expectation_matrix, propagate_expectation};
use crate::dynamics::AlgoParams;
use crate::error::{invalid, Error, Result};

/// `A_ms` with its perturbation data.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    pub a_ms: Matrix6<f64>,
    pub q1: Matrix6<f64>,
    pub q2: Matrix6<f64>,
    pub b1: Vector6<f64>,
    pub b2: Vector6<f64>,
    /// Supremum of `T1`.
    pub m: f64,
    /// Supremum of `T2`.
    pub f: f64,
    pub c_bar: f64,
    pub eps: f64,
}

impl MomentMatrix {
    pub fn lower_matrix(&self) -> Matrix6<f64> {
        self.a_ms + self.q1 * self.eps
    }

    pub fn upper_matrix(&self) -> Matrix6<f64> {
        self.a_ms + self.q2 * self.eps
    }
}

/// `T1(y, eps) = (eps + 2|y|) / (|y| + eps)^2`; at most `1 / eps`.
pub fn t1(y: f64, eps: f64) -> f64 {
    let a = y.abs() + eps;
    (eps + 2.0 * y.abs()) / (a * a)
}

/// `T2(y, eps) = eps (eps + 2|y|)^2 / (|y| + eps)^2`; at most `4 eps`.
pub fn t2(y: f64, eps: f64) -> f64 {
    let a = y.abs() + eps;
    let b = eps + 2.0 * y.abs();
    eps * (b / a) * (b / a)
}

/// `E|y| <= 1/4 + E[y^2]`.
pub fn bound_abs_expectation(second_moment: f64) -> Result<f64> {
    if !(second_moment >= 0.0) {
        return Err(invalid("second_moment", format!("must be non-negative, got {second_moment}")));
    }
    Ok(0.25 + second_moment)
}

/// Builds `A_ms`, `Q1`, `Q2`, `b1`, `b2` with `M = 1/eps`, `F = 4 eps` and
/// both interval ends `eps_0` set to `eps`.
pub fn build_moment_matrix(p: &AlgoParams, mu: f64) -> MomentMatrix {
    let rho = p.rho();
    let beta = p.beta();
    let chi = p.chi();
    let psi = p.psi();
    let g = p.gamma();
    let eps = p.eps();
    let g2 = g * g;
    let r2 = rho * rho;
    let mu2 = mu * mu;
    let ob = 1.0 - beta;

    #[rustfmt::skip]
    let a_ms = Matrix6::new(
        0.0, 1.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, r2 + psi, 0.0, -2.0 * rho,
        0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
        mu2 * (g2 + r2 * chi), 0.0, mu2 / 4.0 * (r2 * r2 * chi + 6.0 * g2 * r2 + g2 * psi), ob * ob,
            -mu2 * rho * (3.0 * g2 + r2 * chi), 2.0 * ob * mu * g,
        0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        mu * g, 0.0, mu * g / 2.0 * (3.0 * r2 + psi), -rho * ob, -3.0 * mu * rho * g, ob - mu * rho * g,
    );

    let m = 1.0 / eps;
    let f = 4.0 * eps;
    let c_bar = r2 * (r2 * chi + 2.0 * g2) / 4.0;
    let e0 = eps;

    let mut q1 = Matrix6::zeros();
    q1[(3, 0)] = -mu2 * r2 * chi * m / 2.0;
    q1[(3, 1)] = -mu2 * r2 * chi * m / 2.0;

    let mut q2 = Matrix6::zeros();
    q2[(1, 3)] = 2.0 * psi;
    q2[(3, 2)] = mu2 * (g2 * psi / 2.0 + c_bar * m);
    q2[(5, 2)] = mu * g * psi;

    let b1 = Vector6::new(0.0, psi * e0, 0.0, mu2 * g2 * psi * e0 / 4.0, 0.0, mu * g * psi * e0 / 2.0);
    let b2 = Vector6::new(
        0.0,
        psi * (0.5 + e0),
        0.0,
        mu2 * (g2 * psi / 4.0 * (e0 + 0.5) + r2 * g2 * f / 2.0),
        0.0,
        mu * g * psi / 4.0 * (2.0 * e0 + 1.0),
    );

    MomentMatrix {
        a_ms,
        q1,
        q2,
        b1,
        b2,
        m,
        f,
        c_bar,
        eps,
    }
}

/// First and second moments at `k = 1` for a deterministic start
/// `(x~_0, y_0)` under the bootstrap `x_{-1} = x_0`, `y_{-1} = y_0`.
pub fn initial_moments(p: &AlgoParams, x_tilde0: f64, y0: f64) -> ([f64; 2], Vector6<f64>) {
    let x1 = x_tilde0 - p.rho() * y0;
    let y1 = (1.0 - p.beta()) * y0;
    let a = y0.abs() + p.eps();
    let nu1 = [x1, y1];
    let zeta1 = Vector6::new(
        x_tilde0 * x_tilde0,
        x1 * x1 + a * a * p.psi(),
        y0 * y0,
        y1 * y1,
        x_tilde0 * y0,
        x1 * y1,
    );
    (nu1, zeta1)
}

/// Bracketing sequences from a given starting moment vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSequences {
    pub lower: Vec<Vector6<f64>>,
    pub upper: Vec<Vector6<f64>>,
}

/// Iterates both affine recursions `k` times from `zeta0`.
pub fn propagate_moment_bounds(m: &MomentMatrix, zeta0: Vector6<f64>, k: usize) -> Result<BoundSequences> {
    for i in 0..4 {
        if zeta0[i] < 0.0 {
            return Err(invalid("zeta0", format!("entry {} must be non-negative", i + 1)));
        }
    }
    let cs_tol = |a: f64, b: f64| 1e-12 * (1.0 + a.abs().max(b.abs()));
    if zeta0[4] * zeta0[4] - zeta0[0] * zeta0[2] > cs_tol(zeta0[4] * zeta0[4], zeta0[0] * zeta0[2])
        || zeta0[5] * zeta0[5] - zeta0[1] * zeta0[3] > cs_tol(zeta0[5] * zeta0[5], zeta0[1] * zeta0[3])
    {
        return Err(invalid("zeta0", "violates Cauchy-Schwarz"));
    }
    let lo_m = m.lower_matrix();
    let up_m = m.upper_matrix();
    let lo_b = m.b1 * m.eps;
    let up_b = m.b2 * m.eps;
    let mut lower = Vec::with_capacity(k + 1);
    let mut upper = Vec::with_capacity(k + 1);
    let (mut lo, mut up) = (zeta0, zeta0);
    lower.push(lo);
    upper.push(up);
    for _ in 0..k {
        lo = lo_m * lo + lo_b;
        up = up_m * up + up_b;
        lower.push(lo);
        upper.push(up);
    }
    Ok(BoundSequences { lower, upper })
}

/// Theoretical mean and bounds for a deterministic start, indexed by
/// `k = 0..=n_steps`. Step 0 is exact; the recursions start at step 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoreticalBounds {
    /// `E[x~_k]`, `E[y_k]`.
    pub mean: Vec<[f64; 2]>,
    pub lower: Vec<Vector6<f64>>,
    pub upper: Vec<Vector6<f64>>,
    /// `sqrt(upper E[x~_k^2] - E[x~_k]^2)`.
    pub sigma_upper: Vec<f64>,
}

pub fn theoretical_bounds(
    p: &AlgoParams,
    mu: f64,
    x_tilde0: f64,
    y0: f64,
    n_steps: usize,
) -> Result<TheoreticalBounds> {
    let zeta0 = Vector6::new(
        x_tilde0 * x_tilde0,
        x_tilde0 * x_tilde0,
        y0 * y0,
        y0 * y0,
        x_tilde0 * y0,
        x_tilde0 * y0,
    );
    let mut mean = vec![[x_tilde0, y0]];
    let mut lower = vec![zeta0];
    let mut upper = vec![zeta0];
    if n_steps >= 1 {
        let (nu1, zeta1) = initial_moments(p, x_tilde0, y0);
        let ae = build_expectation_matrix(p, mu);
        mean.extend(propagate_expectation(&ae, nu1, n_steps - 1));
        let mm = build_moment_matrix(p, mu);
        let seq = propagate_moment_bounds(&mm, zeta1, n_steps - 1)?;
        lower.extend(seq.lower);
        upper.extend(seq.upper);
    }
    let sigma_upper = sigma_from_bounds(&mean, &upper)?;
    Ok(TheoreticalBounds {
        mean,
        lower,
        upper,
        sigma_upper,
    })
}

/// `sqrt(upper[k][1] - mean[k][0]^2)`, clamping rounding noise at zero.
pub fn sigma_from_bounds(mean: &[[f64; 2]], upper: &[Vector6<f64>]) -> Result<Vec<f64>> {
    mean.iter()
        .zip(upper)
        .enumerate()
        .map(|(k, (nu, z))| {
            let v = z[1] - nu[0] * nu[0];
            let tol = 1e-9f64.max(1e-12 * z[1].abs());
            if v < -tol {
                Err(Error::NegativeVariance { step: k, value: v })
            } else {
                Ok(v.max(0.0).sqrt())
            }
        })
        .collect()
}
