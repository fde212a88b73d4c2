//! Jury-type stability tests on characteristic polynomials.

use serde::{Deserialize, Serialize};

use super::linalg::GUARD;

/// One strict inequality `lhs < rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; the condition holds when this exceeds the guard band.
    pub margin: f64,
    pub holds: bool,
}

impl Condition {
    pub fn less_than(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        Condition {
            name: name.into(),
            lhs,
            rhs,
            margin,
            holds: margin > GUARD,
        }
    }
}

/// Outcome of a polynomial stability test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JuryReport {
    pub pass: bool,
    pub conditions: Vec<Condition>,
}

impl JuryReport {
    fn from_conditions(conditions: Vec<Condition>) -> Self {
        JuryReport {
            pass: conditions.iter().all(|c| c.holds),
            conditions,
        }
    }
}

fn eval_ascending(c: &[f64], z: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * z + ci)
}

/// Tests whether every root of `c[0] + c[1] z + ... + c[m] z^m` lies
/// strictly inside the unit circle.
///
/// Reports the necessary conditions `p(1) > 0` and `(-1)^m p(-1) > 0` (for a
/// positive leading coefficient) together with the Schur-Cohn chain
/// `|c0| < |cm|` on the successively reduced polynomials
/// `q_j = cm c_{j+1} - c0 c_{m-1-j}`.
pub fn jury_test(coeffs: &[f64]) -> JuryReport {
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    let m = c.len() - 1;
    let mut conds = Vec::new();
    if m == 0 {
        return JuryReport::from_conditions(conds);
    }
    let lead = c[m];
    let norm_sign = lead.signum();
    conds.push(Condition::less_than("p(1) > 0", 0.0, norm_sign * eval_ascending(&c, 1.0)));
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    conds.push(Condition::less_than(
        "(-1)^n p(-1) > 0",
        0.0,
        norm_sign * sign * eval_ascending(&c, -1.0),
    ));
    let mut level = 0;
    while c.len() > 1 {
        let m = c.len() - 1;
        let (c0, cm) = (c[0], c[m]);
        let scale = cm.abs().max(f64::MIN_POSITIVE);
        conds.push(Condition::less_than(
            format!("|c0| < |cn| (reduction {level})"),
            c0.abs() / scale,
            1.0,
        ));
        if c0.abs() >= cm.abs() {
            break;
        }
        let reduced: Vec<f64> = (0..m).map(|j| (cm * c[j + 1] - c0 * c[m - 1 - j]) / scale).collect();
        c = reduced;
        level += 1;
    }
    JuryReport::from_conditions(conds)
}

/// Coefficients `(a4, a3, a2, a1, a0)` of the quintic factor of the
/// second-moment characteristic polynomial, `lambda (lambda^5 + a4 lambda^4
/// + ... + a0)`, under the scaling `chi = q1 / mu^2`, `psi = q2 rho^4`.
pub fn jury_quintic_coeffs(rho: f64, beta: f64, q1: f64, q2: f64) -> [f64; 5] {
    let b = beta;
    let b2 = b * b;
    let b3 = b2 * b;
    let r3 = rho.powi(3);
    let r4 = rho.powi(4);
    let r6 = rho.powi(6);
    let r7 = rho.powi(7);
    let r8 = rho.powi(8);
    let r9 = rho.powi(9);
    let r11 = rho.powi(11);
    let s = (q1 * q2).sqrt();
    let q12 = q1 * q2;
    let q1q2s = q1 * q2 * q2;

    let a4 = 3.0 * b - b2 + s * r3 - 3.0;
    let a3 = 3.0 - 6.0 * b - 0.25 * q1 * r4 + 4.0 * b2 - b3 - 1.5 * q12 * r6 - 0.25 * q1q2s * r8
        + (3.0 - 2.0 * b + b2) * s * r3;
    let a2 = 3.0 * b - 1.5 * q1 * r4 - 3.0 * b2 + b3 + 0.75 * b * q1 * r4
        - 5.0 * q12 * r6
        - 1.5 * q1q2s * r8
        - 5.0 * s * r3
        - 0.25 * q1.powf(1.5) * q2.sqrt() * r7
        - 1.5 * q12.powf(1.5) * r9
        - 0.25 * q1.powf(1.5) * q2.powf(2.5) * r11
        + 8.0 * b * s * r3
        + 4.5 * b * q12 * r6
        - 4.0 * b2 * s * r3
        + 0.75 * b * q1q2s * r8
        - 1.0;
    let a1 = -0.25 * q1 * r4 + 0.25 * b * q1 * r4 + 2.5 * q12 * r6 - 0.25 * q1q2s * r8 + s * r3
        - 2.0 * b * s * r3
        - 2.5 * b * q12 * r6
        + b2 * s * r3
        + 0.25 * b * q1q2s * r8;
    let a0 = -0.25 * q1.powf(1.5) * q2.sqrt() * r7
        - 1.5 * q12.powf(1.5) * r9
        - 0.25 * q1.powf(1.5) * q2.powf(2.5) * r11;
    [a4, a3, a2, a1, a0]
}

/// Jury test on the quintic factor.
pub fn jury_quintic(rho: f64, beta: f64, q1: f64, q2: f64) -> JuryReport {
    let [a4, a3, a2, a1, a0] = jury_quintic_coeffs(rho, beta, q1, q2);
    jury_test(&[a0, a1, a2, a3, a4, 1.0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_gain() {
        assert_eq!(jury_quintic_coeffs(0.0, 1.0, 3.0, 5.0), [-1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_term_is_negative() {
        for &rho in &[0.01, 0.1, 0.5, 2.0] {
            let a0 = jury_quintic_coeffs(rho, 0.7, 2.0, 3.0)[4];
            assert!(a0 < 0.0);
        }
    }

    #[test]
    fn known_polynomials() {
        // (z - 0.5)(z + 0.5)
        assert!(jury_test(&[-0.25, 0.0, 1.0]).pass);
        // (z - 1.5)(z - 0.1)
        assert!(!jury_test(&[0.15, -1.6, 1.0]).pass);
        // z^2 + 1 is marginal
        assert!(!jury_test(&[1.0, 0.0, 1.0]).pass);
        // (z - 0.9)^3
        assert!(jury_test(&[-0.729, 2.43, -2.7, 1.0]).pass);
        // negative leading coefficient does not flip the verdict
        assert!(jury_test(&[0.25, 0.0, -1.0]).pass);
    }
}
