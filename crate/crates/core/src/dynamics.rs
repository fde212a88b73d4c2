//! One-step transition maps.
//!
//! Four systems share the same trajectory memory:
//!
//! * `adaptive_1d`: `x+ = x - rho y + (|y| + eps) g(w_k)`,
//!   `y+ = (1 - beta) y + h(w_{k-1}) / (|y_{k-1}| + eps) (J(x_k) - J(x_{k-1}))`
//! * `nonadaptive_1d`: the same without the `|y| + eps` scaling
//! * `first_order`: `x+ = x - h(w_{k-1}) (J(x_k) - J(x_{k-1})) + g(w_k)`
//! * `multidim`: the vector form with a diagonal dither and the squared
//!   norm of `|y_{k-1}| + eps` in the denominator
//!
//! `J(x_{k-1})` is cached in the state, so each step evaluates the objective
//! exactly once. The delayed terms are bootstrapped with a virtual
//! `x_{-1} = x_0`, `y_{-1} = y_0` and a fresh draw `w_{-1}`.
//!
//! Dither slots: slot `0` holds `w_{-1}`, slot `k + 1` holds `w_k`.

use serde::{Deserialize, Serialize};

use crate::dither::{DitherDraw, DitherSpec, RandomStream};
use crate::error::{invalid, Error, Result};
use crate::objectives::{Objective, QuadraticForm};

/// Gains of the moment-based system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoParams {
    rho: f64,
    beta: f64,
    eps: f64,
    dither: DitherSpec,
}

impl AlgoParams {
    pub fn new(rho: f64, beta: f64, eps: f64, dither: DitherSpec) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(invalid("rho", format!("must be positive, got {rho}")));
        }
        if !(beta > 0.0 && beta < 2.0) {
            return Err(invalid("beta", format!("must lie in (0, 2), got {beta}")));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(invalid("eps", format!("must be positive, got {eps}")));
        }
        Ok(Self {
            rho,
            beta,
            eps,
            dither,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dither(&self) -> &DitherSpec {
        &self.dither
    }

    pub fn chi(&self) -> f64 {
        self.dither.chi()
    }

    pub fn psi(&self) -> f64 {
        self.dither.psi()
    }

    pub fn gamma(&self) -> f64 {
        self.dither.gamma()
    }
}

/// Maps of the first-order baseline: `h = sqrt(chi) w`, `g = sqrt(psi) w`.
/// With `decay` the exploration becomes `g_k = sqrt(psi) w_k / sqrt(max(k, 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderParams {
    pub dither: DitherSpec,
    pub decay: bool,
}

impl FirstOrderParams {
    /// `h_k = 1e-3 w_k`, `g_k = 9 w_k`.
    pub fn baseline() -> Self {
        Self {
            dither: DitherSpec::new(1e-6, 81.0).expect("valid constants"),
            decay: false,
        }
    }
}

/// Memory of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub y_prev: Vec<f64>,
    pub j_prev: f64,
    pub w_prev: Vec<DitherDraw>,
    pub k: usize,
}

impl TrajectoryState {
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    fn check_finite(&self) -> Result<()> {
        let ok = self.j_prev.is_finite()
            && self.x.iter().all(|v| v.is_finite())
            && self.y.iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::NonFinite { step: self.k })
        }
    }
}

/// Initial memory: `y_{-1} = y_0`, `J_prev = J(x_0)`, `w_{-1}` from slot 0.
pub fn init_state(
    x0: &[f64],
    y0: &[f64],
    obj: &Objective,
    dither: &DitherSpec,
    stream: &mut RandomStream,
) -> Result<TrajectoryState> {
    let n = obj.dim();
    for len in [x0.len(), y0.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let w_prev = (0..n).map(|j| dither.sample(stream, 0, j)).collect();
    let state = TrajectoryState {
        x: x0.to_vec(),
        y: y0.to_vec(),
        y_prev: y0.to_vec(),
        j_prev: obj.eval(x0),
        w_prev,
        k: 0,
    };
    state.check_finite()?;
    Ok(state)
}

fn require_1d(s: &TrajectoryState, obj: &Objective) -> Result<()> {
    if obj.dim() != 1 || s.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: obj.dim().max(s.dim()),
        });
    }
    Ok(())
}

/// In-place adaptive step.
pub fn advance_adaptive_1d(
    s: &mut TrajectoryState,
    p: &AlgoParams,
    obj: &Objective,
    stream: &mut RandomStream,
) -> Result<()> {
    let x = s.x[0];
    let y = s.y[0];
    let j = obj.eval1(x);
    let w = p.dither.sample(stream, s.k as u64 + 1, 0);
    let x_next = x - p.rho * y + (y.abs() + p.eps) * w.g;
    let y_next = (1.0 - p.beta) * y + s.w_prev[0].h / (s.y_prev[0].abs() + p.eps) * (j - s.j_prev);
    commit_1d(s, x_next, y_next, j, w)
}

/// In-place non-adaptive step.
pub fn advance_nonadaptive_1d(
    s: &mut TrajectoryState,
    p: &AlgoParams,
    obj: &Objective,
    stream: &mut RandomStream,
) -> Result<()> {
    let x = s.x[0];
    let y = s.y[0];
    let j = obj.eval1(x);
    let w = p.dither.sample(stream, s.k as u64 + 1, 0);
    let x_next = x - p.rho * y + w.g;
    let y_next = (1.0 - p.beta) * y + s.w_prev[0].h * (j - s.j_prev);
    commit_1d(s, x_next, y_next, j, w)
}

/// In-place first-order step; `y` stays untouched.
pub fn advance_first_order(
    s: &mut TrajectoryState,
    p: &FirstOrderParams,
    obj: &Objective,
    stream: &mut RandomStream,
) -> Result<()> {
    let x = s.x[0];
    let j = obj.eval1(x);
    let w = p.dither.sample(stream, s.k as u64 + 1, 0);
    let g = if p.decay {
        w.g / (s.k.max(1) as f64).sqrt()
    } else {
        w.g
    };
    let x_next = x - s.w_prev[0].h * (j - s.j_prev) + g;
    let y = s.y[0];
    commit_1d(s, x_next, y, j, w)
}

fn commit_1d(s: &mut TrajectoryState, x: f64, y: f64, j: f64, w: DitherDraw) -> Result<()> {
    s.y_prev[0] = s.y[0];
    s.x[0] = x;
    s.y[0] = y;
    s.j_prev = j;
    s.w_prev[0] = w;
    s.k += 1;
    s.check_finite()
}

/// In-place multidimensional step.
pub fn advance_multidim(
    s: &mut TrajectoryState,
    p: &AlgoParams,
    obj: &Objective,
    stream: &mut RandomStream,
) -> Result<()> {
    let n = obj.dim();
    if s.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s.dim(),
        });
    }
    let j = obj.eval(&s.x);
    let dj = j - s.j_prev;
    let norm_sq: f64 = s.y_prev.iter().map(|v| (v.abs() + p.eps).powi(2)).sum();
    let scale = dj / norm_sq;
    let slot = s.k as u64 + 1;
    for i in 0..n {
        let w = p.dither.sample(stream, slot, i);
        let y = s.y[i];
        let a_prev = s.y_prev[i].abs() + p.eps;
        let x_next = s.x[i] - p.rho * y + (y.abs() + p.eps) * w.g;
        let y_next = (1.0 - p.beta) * y + s.w_prev[i].h * a_prev * scale;
        s.y_prev[i] = y;
        s.x[i] = x_next;
        s.y[i] = y_next;
        s.w_prev[i] = w;
    }
    s.j_prev = j;
    s.k += 1;
    s.check_finite()
}

pub fn step_adaptive_1d(
    s: &TrajectoryState,
    p: &AlgoParams,
    obj: &Objective,
    stream: &mut RandomStream,
) -> Result<TrajectoryState> {
    require_1d(s, obj)?;
    let mut next = s.clone();
    advance_adaptive_1d(&mut next, p, obj, stream)?;
    Ok(next)
}

pub fn step_nonadaptive_1d(
    s: &TrajectoryState,
    p: &AlgoParams,
    obj: &Objective,
    stream: &mut RandomStream,
) -> Result<TrajectoryState> {
    require_1d(s, obj)?;
    let mut next = s.clone();
    advance_nonadaptive_1d(&mut next, p, obj, stream)?;
    Ok(next)
}

pub fn step_first_order(
    s: &TrajectoryState,
    p: &FirstOrderParams,
    obj: &Objective,
    stream: &mut RandomStream,
) -> Result<TrajectoryState> {
    require_1d(s, obj)?;
    let mut next = s.clone();
    advance_first_order(&mut next, p, obj, stream)?;
    Ok(next)
}

pub fn step_multidim(
    s: &TrajectoryState,
    p: &AlgoParams,
    obj: &Objective,
    stream: &mut RandomStream,
) -> Result<TrajectoryState> {
    let mut next = s.clone();
    advance_multidim(&mut next, p, obj, stream)?;
    Ok(next)
}

/// Which recursion to run, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum System {
    Adaptive1d(AlgoParams),
    Nonadaptive1d(AlgoParams),
    FirstOrder(FirstOrderParams),
    Multidim(AlgoParams),
}

impl System {
    pub fn name(&self) -> &'static str {
        match self {
            System::Adaptive1d(_) => "adaptive1d",
            System::Nonadaptive1d(_) => "nonadaptive1d",
            System::FirstOrder(_) => "firstorder",
            System::Multidim(_) => "multidim",
        }
    }

    /// Dither used for every slot, including the bootstrap draw.
    pub fn dither(&self) -> &DitherSpec {
        match self {
            System::Adaptive1d(p) | System::Nonadaptive1d(p) | System::Multidim(p) => &p.dither,
            System::FirstOrder(p) => &p.dither,
        }
    }

    pub fn is_one_dimensional(&self) -> bool {
        !matches!(self, System::Multidim(_))
    }

    pub fn init(
        &self,
        x0: &[f64],
        y0: &[f64],
        obj: &Objective,
        stream: &mut RandomStream,
    ) -> Result<TrajectoryState> {
        if self.is_one_dimensional() && obj.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: obj.dim(),
            });
        }
        init_state(x0, y0, obj, self.dither(), stream)
    }

    pub fn advance(&self, s: &mut TrajectoryState, obj: &Objective, stream: &mut RandomStream) -> Result<()> {
        match self {
            System::Adaptive1d(p) => advance_adaptive_1d(s, p, obj, stream),
            System::Nonadaptive1d(p) => advance_nonadaptive_1d(s, p, obj, stream),
            System::FirstOrder(p) => advance_first_order(s, p, obj, stream),
            System::Multidim(p) => advance_multidim(s, p, obj, stream),
        }
    }
}

/// Second-order expansion of one adaptive step on a scalar quadratic:
/// `J(x_k) = J(x_{k-1}) + mu * delta`, with no remainder.
pub fn delta_expansion(x_prev: f64, y_prev: f64, g_prev: f64, p: &AlgoParams, quad: &QuadraticForm) -> Result<f64> {
    if quad.dim() != 1 {
        return Err(Error::NotQuadratic);
    }
    let xt = x_prev - quad.center()[0];
    let a = y_prev.abs() + p.eps;
    let rho = p.rho;
    Ok((xt - rho * y_prev) * a * g_prev - rho * xt * y_prev
        + 0.5 * rho * rho * y_prev * y_prev
        + 0.5 * g_prev * g_prev * a * a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_paper_objective, ObjectiveId, ObjectiveParams};

    fn unit() -> DitherSpec {
        DitherSpec::new(1.0, 1.0).unwrap()
    }

    fn square() -> Objective {
        Objective::quadratic(QuadraticForm::scalar(0.0, 0.0, 2.0).unwrap())
    }

    /// Finds a stream whose first two slots have the requested signs.
    fn stream_with(signs: &[(u64, f64)]) -> (u64, RandomStream) {
        for seed in 0.. {
            let mut s = RandomStream::new(seed, 0, 1);
            if signs.iter().all(|&(slot, sg)| s.sign(slot, 0) == sg) {
                return (seed, RandomStream::new(seed, 0, 1));
            }
        }
        unreachable!()
    }

    fn hand_state(x: f64, y: f64, y_prev: f64, j_prev: f64, w_prev: DitherDraw) -> TrajectoryState {
        TrajectoryState {
            x: vec![x],
            y: vec![y],
            y_prev: vec![y_prev],
            j_prev,
            w_prev: vec![w_prev],
            k: 0,
        }
    }

    #[test]
    fn adaptive_hand_example() {
        let p = AlgoParams::new(0.1, 0.5, 0.01, unit()).unwrap();
        let s = hand_state(1.0, 0.5, 0.5, 0.64, unit().draw_from_sign(1.0));
        let (_, mut st) = stream_with(&[(1, 1.0)]);
        let n = step_adaptive_1d(&s, &p, &square(), &mut st).unwrap();
        assert!((n.x[0] - 1.46).abs() < 1e-14);
        assert!((n.y[0] - (0.25 + 0.36 / 0.51)).abs() < 1e-14);
        assert!((n.y[0] - 0.955_882_352_941_176_5).abs() < 1e-12);
        assert_eq!(n.y_prev[0], 0.5);
        assert_eq!(n.j_prev, 1.0);
        assert_eq!(n.k, 1);
    }

    #[test]
    fn nonadaptive_hand_example() {
        let p = AlgoParams::new(0.1, 0.5, 0.01, unit()).unwrap();
        let s = hand_state(1.0, 0.5, 0.5, 0.64, unit().draw_from_sign(1.0));
        let (_, mut st) = stream_with(&[(1, 1.0)]);
        let n = step_nonadaptive_1d(&s, &p, &square(), &mut st).unwrap();
        assert!((n.x[0] - 1.95).abs() < 1e-14);
        assert!((n.y[0] - 0.61).abs() < 1e-14);
    }

    #[test]
    fn first_order_hand_example() {
        let obj = make_paper_objective(
            ObjectiveId::Quad1d,
            &ObjectiveParams {
                center: vec![25.0],
                hessian: None,
            },
        )
        .unwrap();
        let p = FirstOrderParams::baseline();
        let s = hand_state(26.0, 0.0, 0.0, obj.eval1(27.0), p.dither.draw_from_sign(1.0));
        let (_, mut st) = stream_with(&[(1, -1.0)]);
        let n = step_first_order(&s, &p, &obj, &mut st).unwrap();
        assert!((n.x[0] - 17.003).abs() < 1e-12, "{}", n.x[0]);
    }

    #[test]
    fn first_order_flat_step() {
        let p = FirstOrderParams::baseline();
        let s = hand_state(3.0, 0.0, 0.0, 9.0, p.dither.draw_from_sign(-1.0));
        let (_, mut st) = stream_with(&[(1, 1.0)]);
        let n = step_first_order(&s, &p, &square(), &mut st).unwrap();
        assert!((n.x[0] - 12.0).abs() < 1e-12);
    }

    #[test]
    fn decayed_exploration_shrinks() {
        let p = FirstOrderParams {
            decay: true,
            ..FirstOrderParams::baseline()
        };
        let mut s = hand_state(3.0, 0.0, 0.0, 9.0, p.dither.draw_from_sign(-1.0));
        s.k = 3;
        let mut st = RandomStream::new(0, 0, 1);
        let sign = st.sign(4, 0);
        let n = step_first_order(&s, &p, &square(), &mut st).unwrap();
        assert!((n.x[0] - (3.0 + sign * 9.0 / 3f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn resting_at_minimizer() {
        let p = AlgoParams::new(0.1, 0.5, 0.01, unit()).unwrap();
        let s = hand_state(0.0, 0.0, 0.0, 0.0, unit().draw_from_sign(1.0));
        let mut st = RandomStream::new(9, 0, 1);
        let n = step_adaptive_1d(&s, &p, &square(), &mut st).unwrap();
        assert!((n.x[0].abs() - 0.01).abs() < 1e-16);
        assert_eq!(n.y[0], 0.0);
    }

    #[test]
    fn tiny_eps_keeps_x() {
        let p = AlgoParams::new(0.1, 0.5, 1e-300, unit()).unwrap();
        let s = hand_state(2.0, 0.0, 0.0, 4.0, unit().draw_from_sign(1.0));
        let mut st = RandomStream::new(9, 0, 1);
        let n = step_adaptive_1d(&s, &p, &square(), &mut st).unwrap();
        assert_eq!(n.x[0], 2.0);
    }

    #[test]
    fn init_uses_current_objective() {
        let obj = make_paper_objective(
            ObjectiveId::Quad1d,
            &ObjectiveParams {
                center: vec![25.0],
                hessian: None,
            },
        )
        .unwrap();
        let mut st = RandomStream::new(1, 0, 1);
        let s = init_state(&[-40.0], &[3.7], &obj, &unit(), &mut st).unwrap();
        assert_eq!(s.j_prev, 14_225.0);
        assert_eq!(s.y_prev, vec![3.7]);
        let s = init_state(&[25.0], &[0.0], &obj, &unit(), &mut st).unwrap();
        assert_eq!(s.j_prev, 10_000.0);
        assert!(init_state(&[1.0, 2.0], &[0.0], &obj, &unit(), &mut st).is_err());
    }

    #[test]
    fn first_update_contracts_y() {
        let obj = square();
        let p = AlgoParams::new(0.1, 0.25, 1e-3, unit()).unwrap();
        let mut st = RandomStream::new(5, 0, 1);
        let mut s = init_state(&[4.0], &[2.0], &obj, &unit(), &mut st).unwrap();
        advance_adaptive_1d(&mut s, &p, &obj, &mut st).unwrap();
        assert_eq!(s.y[0], 0.75 * 2.0);
    }

    #[test]
    fn multidim_flat_step() {
        let obj = Objective::custom(2, None, |_| 7.0).unwrap();
        let p = AlgoParams::new(0.25, 0.93, 0.5, DitherSpec::new(0.2025, 0.01).unwrap()).unwrap();
        let mut st = RandomStream::new(3, 0, 2);
        let s = init_state(&[1.0, -1.0], &[0.0, 0.0], &obj, p.dither(), &mut st).unwrap();
        let signs = [st.sign(1, 0), st.sign(1, 1)];
        let n = step_multidim(&s, &p, &obj, &mut st).unwrap();
        for i in 0..2 {
            let want = s.x[i] + 0.1 * 0.5 * signs[i];
            assert!((n.x[i] - want).abs() < 1e-15);
            assert_eq!(n.y[i], 0.0);
        }
    }

    #[test]
    fn multidim_reduces_to_scalar() {
        let obj = square();
        let p = AlgoParams::new(0.12, 0.75, 1e-2, DitherSpec::new(30.25, 0.01).unwrap()).unwrap();
        let mut a = RandomStream::new(17, 4, 1);
        let mut b = RandomStream::new(17, 4, 1);
        let mut s1 = init_state(&[-3.0], &[1.5], &obj, p.dither(), &mut a).unwrap();
        let mut s2 = init_state(&[-3.0], &[1.5], &obj, p.dither(), &mut b).unwrap();
        for _ in 0..50 {
            advance_adaptive_1d(&mut s1, &p, &obj, &mut a).unwrap();
            advance_multidim(&mut s2, &p, &obj, &mut b).unwrap();
            let tol = 1e-12 * (1.0 + s1.x[0].abs() + s1.y[0].abs());
            assert!((s1.x[0] - s2.x[0]).abs() < tol);
            assert!((s1.y[0] - s2.y[0]).abs() < tol);
            s2.x[0] = s1.x[0];
            s2.y[0] = s1.y[0];
            s2.y_prev[0] = s1.y_prev[0];
            s2.j_prev = s1.j_prev;
        }
    }

    #[test]
    fn delta_examples() {
        let p = AlgoParams::new(0.3, 0.5, 0.01, unit()).unwrap();
        let q = QuadraticForm::scalar(5.0, 2.0, 2.0).unwrap();
        let d = delta_expansion(7.0, 0.0, 1.0, &p, &q).unwrap();
        assert!((d - (5.0 * 0.01 + 0.00005)).abs() < 1e-15);
        let d = delta_expansion(2.0, 0.0, 1.0, &p, &q).unwrap();
        assert!((d - 0.5 * 0.01 * 0.01).abs() < 1e-18);
    }

    #[test]
    fn nonfinite_is_flagged() {
        let obj = Objective::custom(1, None, |x| if x[0] > 10.0 { f64::INFINITY } else { 0.0 }).unwrap();
        let p = AlgoParams::new(0.1, 0.5, 0.01, unit()).unwrap();
        let s = hand_state(11.0, 0.0, 0.0, 0.0, unit().draw_from_sign(1.0));
        let mut st = RandomStream::new(0, 0, 1);
        assert!(matches!(
            step_adaptive_1d(&s, &p, &obj, &mut st),
            Err(Error::NonFinite { step: 1 })
        ));
    }

    #[test]
    fn parameter_validation() {
        assert!(AlgoParams::new(0.05, 0.4, 1e-7, DitherSpec::new(0.81, 0.01).unwrap()).is_ok());
        assert!(AlgoParams::new(0.25, 0.93, 1e-7, DitherSpec::new(0.2025, 0.01).unwrap()).is_ok());
        assert!(AlgoParams::new(0.0, 0.5, 1e-7, unit()).is_err());
        assert!(AlgoParams::new(0.1, 2.0, 1e-7, unit()).is_err());
        assert!(AlgoParams::new(0.1, 0.5, 0.0, unit()).is_err());
    }
}
