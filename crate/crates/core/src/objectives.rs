//! Objective functions used by the experiments.
//!
//! All built-in objectives share the constant offset `10000`. Quadratics
//! carry their exact curvature; the others fall back to a central finite
//! difference at the minimizer.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Constant offset shared by the built-in objectives.
pub const OFFSET: f64 = 10_000.0;

/// Identifier of a built-in objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveId {
    /// `10000 + (x - x*)^2`
    Quad1d,
    /// `10000 + x^2 cos(0.2 x)`
    X2cos,
    /// `10000 + log(1 + e^(x - x*)) + log(1 + e^(x* - x))`
    Logistic,
    /// `10000 + (x - x*)^T H (x - x*)`
    Quadnd,
}

impl ObjectiveId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectiveId::Quad1d => "quad1d",
            ObjectiveId::X2cos => "x2cos",
            ObjectiveId::Logistic => "logistic",
            ObjectiveId::Quadnd => "quadnd",
        }
    }
}

impl std::str::FromStr for ObjectiveId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quad1d" => Ok(ObjectiveId::Quad1d),
            "x2cos" => Ok(ObjectiveId::X2cos),
            "logistic" => Ok(ObjectiveId::Logistic),
            "quadnd" => Ok(ObjectiveId::Quadnd),
            other => Err(invalid("objective", format!("unknown objective `{other}`"))),
        }
    }
}

/// `offset + (x - center)^T H (x - center)`.
///
/// `H` is kept exactly as given, asymmetric or not; only its symmetric part
/// affects the value and it is that part which must be positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    offset: f64,
    center: Vec<f64>,
    hessian: DMatrix<f64>,
}

impl QuadraticForm {
    pub fn new(offset: f64, center: Vec<f64>, hessian: DMatrix<f64>) -> Result<Self> {
        let n = center.len();
        if n == 0 {
            return Err(invalid("center", "must have at least one coordinate"));
        }
        if hessian.nrows() != n || hessian.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: hessian.nrows().max(hessian.ncols()),
            });
        }
        if !offset.is_finite()
            || center.iter().any(|c| !c.is_finite())
            || hessian.iter().any(|h| !h.is_finite())
        {
            return Err(invalid("quadratic", "entries must be finite"));
        }
        let sym = (&hessian + hessian.transpose()) * 0.5;
        let min_eigenvalue = sym.symmetric_eigenvalues().min();
        if min_eigenvalue <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        Ok(Self {
            offset,
            center,
            hessian,
        })
    }

    /// Scalar quadratic `offset + (mu / 2) (x - center)^2`.
    pub fn scalar(offset: f64, center: f64, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::NonPositiveCurvature(mu));
        }
        Self::new(offset, vec![center], DMatrix::from_element(1, 1, mu / 2.0))
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    /// True second-derivative matrix `H + H^T`.
    pub fn curvature_matrix(&self) -> DMatrix<f64> {
        &self.hessian + self.hessian.transpose()
    }

    /// `mu` for a one-dimensional form.
    pub fn mu(&self) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::NotQuadratic);
        }
        Ok(2.0 * self.hessian[(0, 0)])
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            let di = x[i] - self.center[i];
            let mut row = 0.0;
            for j in 0..n {
                row += self.hessian[(i, j)] * (x[j] - self.center[j]);
            }
            acc += di * row;
        }
        self.offset + acc
    }
}

type CustomFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Quadratic(QuadraticForm),
    X2cos,
    Logistic { center: f64 },
    Custom(CustomFn),
}

/// An evaluatable objective with optional minimizer metadata.
#[derive(Clone)]
pub struct Objective {
    kind: Kind,
    id: Option<ObjectiveId>,
    dim: usize,
    minimizer: Option<Vec<f64>>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("minimizer", &self.minimizer)
            .finish()
    }
}

/// Parameters for [`make_paper_objective`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParams {
    /// `x*`. For `x2cos` this is a starting guess for the local minimizer.
    pub center: Vec<f64>,
    /// Row-major `H` for `quadnd`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hessian: Option<Vec<Vec<f64>>>,
}

/// Builds one of the built-in objectives.
///
/// ```
/// use tdes::objectives::{make_paper_objective, ObjectiveId, ObjectiveParams};
/// let params = ObjectiveParams { center: vec![25.0], hessian: None };
/// let obj = make_paper_objective(ObjectiveId::Quad1d, &params).unwrap();
/// assert_eq!(obj.eval(&[25.0]), 10_000.0);
/// assert_eq!(obj.eval(&[-40.0]), 14_225.0);
/// ```
pub fn make_paper_objective(id: ObjectiveId, params: &ObjectiveParams) -> Result<Objective> {
    let scalar_center = || -> Result<f64> {
        match params.center.as_slice() {
            [c] if c.is_finite() => Ok(*c),
            [_] => Err(invalid("center", "must be finite")),
            other => Err(Error::DimensionMismatch {
                expected: 1,
                got: other.len(),
            }),
        }
    };
    let mut obj = match id {
        ObjectiveId::Quad1d => Objective::quadratic(QuadraticForm::scalar(OFFSET, scalar_center()?, 2.0)?),
        ObjectiveId::X2cos => {
            let guess = if params.center.is_empty() {
                0.0
            } else {
                scalar_center()?
            };
            Objective {
                kind: Kind::X2cos,
                id: None,
                dim: 1,
                minimizer: Some(vec![x2cos_local_minimizer(guess)?]),
            }
        }
        ObjectiveId::Logistic => {
            let center = scalar_center()?;
            Objective {
                kind: Kind::Logistic { center },
                id: None,
                dim: 1,
                minimizer: Some(vec![center]),
            }
        }
        ObjectiveId::Quadnd => {
            let rows = params
                .hessian
                .as_ref()
                .ok_or_else(|| invalid("hessian", "required for quadnd"))?;
            let n = params.center.len();
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: rows.len(),
                });
            }
            let h = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            Objective::quadratic(QuadraticForm::new(OFFSET, params.center.clone(), h)?)
        }
    };
    obj.id = Some(id);
    Ok(obj)
}

impl Objective {
    pub fn quadratic(q: QuadraticForm) -> Self {
        Objective {
            dim: q.dim(),
            minimizer: Some(q.center.clone()),
            kind: Kind::Quadratic(q),
            id: None,
        }
    }

    /// Wraps an arbitrary function. `minimizer`, when given, must be a
    /// global minimizer.
    pub fn custom<F>(dim: usize, minimizer: Option<Vec<f64>>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        if let Some(m) = &minimizer {
            if m.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.len(),
                });
            }
        }
        Ok(Objective {
            kind: Kind::Custom(Arc::new(f)),
            id: None,
            dim,
            minimizer,
        })
    }

    pub fn id(&self) -> Option<ObjectiveId> {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Known minimizer. Global for every built-in except `x2cos`, which is
    /// unbounded below and only has local minimizers.
    pub fn known_minimizer(&self) -> Option<&[f64]> {
        self.minimizer.as_deref()
    }

    /// Exact `mu` for one-dimensional quadratics.
    pub fn known_curvature(&self) -> Option<f64> {
        self.as_quadratic().and_then(|q| q.mu().ok())
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticForm> {
        match &self.kind {
            Kind::Quadratic(q) => Some(q),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kind {
            Kind::Quadratic(q) => q.eval(x),
            Kind::X2cos => x2cos(x[0]),
            Kind::Logistic { center } => logistic(x[0], *center),
            Kind::Custom(f) => f(x),
        }
    }

    /// Scalar shortcut for one-dimensional objectives.
    pub fn eval1(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Quadratic(q) if q.dim() == 1 => {
                let d = x - q.center[0];
                q.offset + q.hessian[(0, 0)] * d * d
            }
            Kind::X2cos => x2cos(x),
            Kind::Logistic { center } => logistic(x, *center),
            _ => self.eval(&[x]),
        }
    }
}

fn x2cos(x: f64) -> f64 {
    OFFSET + x * x * (0.2 * x).cos()
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn logistic(x: f64, center: f64) -> f64 {
    OFFSET + softplus(x - center) + softplus(center - x)
}

/// Local minimizer of `x^2 cos(0.2 x)` nearest to `guess`.
///
/// Away from zero the stationary points solve `u tan u = 2` with `u = 0.2 x`;
/// Newton iteration on `2 cos u - u sin u` starting from `0.2 guess`.
pub fn x2cos_local_minimizer(guess: f64) -> Result<f64> {
    if !guess.is_finite() {
        return Err(invalid("center", "must be finite"));
    }
    if guess.abs() < 5.0 {
        return Ok(0.0);
    }
    let mut u = 0.2 * guess;
    for _ in 0..100 {
        let f = 2.0 * u.cos() - u * u.sin();
        let df = -3.0 * u.sin() - u * u.cos();
        let step = f / df;
        u -= step;
        if step.abs() < 1e-15 * (1.0 + u.abs()) {
            break;
        }
    }
    let x = 5.0 * u;
    let h = 1e-4 * (1.0 + x.abs());
    if x2cos(x + h) + x2cos(x - h) - 2.0 * x2cos(x) <= 0.0 {
        return Err(invalid("center", format!("no local minimizer near {guess}")));
    }
    Ok(x)
}

/// Second derivative of a one-dimensional objective at `x` by central
/// differences with step `1e-4 (1 + |x|)`.
pub fn finite_difference_curvature(obj: &Objective, x: f64) -> f64 {
    let h = 1e-4 * (1.0 + x.abs());
    (obj.eval1(x + h) - 2.0 * obj.eval1(x) + obj.eval1(x - h)) / (h * h)
}

/// `mu` at the known minimizer: exact for quadratics, finite difference
/// otherwise.
pub fn curvature_at_minimizer(obj: &Objective) -> Result<f64> {
    if obj.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: obj.dim(),
        });
    }
    if let Some(mu) = obj.known_curvature() {
        return Ok(mu);
    }
    let x = obj.known_minimizer().ok_or(Error::NoKnownMinimizer)?[0];
    let mu = finite_difference_curvature(obj, x);
    if mu > 0.0 && mu.is_finite() {
        Ok(mu)
    } else {
        Err(Error::NonPositiveCurvature(mu))
    }
}

/// Row-major `H` used by the multidimensional experiment. Not symmetric.
pub fn multidim_hessian() -> Vec<Vec<f64>> {
    vec![
        vec![0.7, 0.1, 0.2],
        vec![0.3, 0.4, 0.3],
        vec![0.4, 0.0, 0.5],
    ]
}

/// Minimizer used by the multidimensional experiment.
pub fn multidim_center() -> Vec<f64> {
    vec![5.2e5, 1.23e5, -3.2e5]
}
