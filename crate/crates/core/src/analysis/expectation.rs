//! First-moment dynamics on a scalar quadratic.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::jury::{Condition, JuryReport};
use super::linalg::monic_quadratic_roots;
use crate::dynamics::AlgoParams;

/// `E[(x~, y)]_{k+1} = A_E E[(x~, y)]_k` with
/// `A_E = [[1, -rho], [mu gamma, 1 - beta]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationMatrix {
    pub a_e: [[f64; 2]; 2],
}

impl ExpectationMatrix {
    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.a_e[0][0], self.a_e[0][1], self.a_e[1][0], self.a_e[1][1])
    }

    pub fn trace(&self) -> f64 {
        self.a_e[0][0] + self.a_e[1][1]
    }

    pub fn det(&self) -> f64 {
        self.a_e[0][0] * self.a_e[1][1] - self.a_e[0][1] * self.a_e[1][0]
    }

    pub fn apply(&self, nu: [f64; 2]) -> [f64; 2] {
        [
            self.a_e[0][0] * nu[0] + self.a_e[0][1] * nu[1],
            self.a_e[1][0] * nu[0] + self.a_e[1][1] * nu[1],
        ]
    }

    pub fn spectral_radius(&self) -> f64 {
        let roots = monic_quadratic_roots(-self.trace(), self.det());
        roots.iter().map(|(re, im)| re.hypot(*im)).fold(0.0, f64::max)
    }
}

pub fn build_expectation_matrix(p: &AlgoParams, mu: f64) -> ExpectationMatrix {
    ExpectationMatrix {
        a_e: [[1.0, -p.rho()], [mu * p.gamma(), 1.0 - p.beta()]],
    }
}

/// Jury conditions for `lambda^2 - (2 - beta) lambda + (1 - beta + mu gamma rho)`.
pub fn jury_quadratic(p: &AlgoParams, mu: f64) -> JuryReport {
    let mgr = mu * p.gamma() * p.rho();
    let beta = p.beta();
    let conditions = vec![
        Condition::less_than("p(1) = mu gamma rho > 0", 0.0, mgr),
        Condition::less_than("p(-1) = 4 - 2 beta + mu gamma rho > 0", 0.0, 4.0 - 2.0 * beta + mgr),
        Condition::less_than("|1 - beta + mu gamma rho| < 1", (1.0 - beta + mgr).abs(), 1.0),
    ];
    JuryReport {
        pass: conditions.iter().all(|c| c.holds),
        conditions,
    }
}

/// `nu_j = A_E^j nu0` for `j = 0..=k`.
pub fn propagate_expectation(m: &ExpectationMatrix, nu0: [f64; 2], k: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(k + 1);
    let mut nu = nu0;
    out.push(nu);
    for _ in 0..k {
        nu = m.apply(nu);
        out.push(nu);
    }
    out
}
