//! Per-example losses with analytic gradients and certified constants.
//!
//! ZoSS only ever calls [`LossModel::evaluate`]; gradients are used by the SGD/GD
//! baselines and as ground truth in tests. The Lipschitz constant `L` and the
//! smoothness constant `beta` are derived analytically for each model, assuming
//! feature vectors lie in a ball of radius `feature_radius` (see [`crate::data`]).
//!
//! Notation: tabulated forms of the bounds often write `B` for the smoothness
//! constant; here it is always `beta`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, ZossError};
use crate::stats::dot;

/// One observation `z = (x, y)`. Classification models expect `y = ±1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: f64,
}

impl Example {
    pub fn new(features: Vec<f64>, label: f64) -> Self {
        Self { features, label }
    }
}

/// The black-box loss `f(w, z)` and its gradient.
pub trait Objective: Send + Sync + fmt::Debug {
    fn evaluate(&self, w: &[f64], z: &Example) -> f64;
    /// Writes `∇_w f(w, z)` into `out` (overwrites).
    fn gradient(&self, w: &[f64], z: &Example, out: &mut [f64]);
}

#[derive(Clone)]
pub struct LossModel {
    name: String,
    dim: usize,
    lipschitz: f64,
    smoothness: f64,
    convex: bool,
    bounded01: bool,
    feature_radius: f64,
    objective: Arc<dyn Objective>,
}

impl fmt::Debug for LossModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .field("smoothness", &self.smoothness)
            .field("convex", &self.convex)
            .field("bounded01", &self.bounded01)
            .field("feature_radius", &self.feature_radius)
            .finish()
    }
}

impl LossModel {
    /// Builds a model from an arbitrary objective. The caller certifies the
    /// constants; `smoothness` may be zero for affine losses.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        lipschitz: f64,
        smoothness: f64,
        convex: bool,
        bounded01: bool,
        feature_radius: f64,
        objective: Arc<dyn Objective>,
    ) -> Result<Self> {
        if dim < 1 {
            return Err(invalid("dim must be >= 1"));
        }
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(invalid("lipschitz constant must be positive"));
        }
        if !(smoothness >= 0.0 && smoothness.is_finite()) {
            return Err(invalid("smoothness constant must be non-negative"));
        }
        if !(feature_radius > 0.0 && feature_radius.is_finite()) {
            return Err(invalid("feature radius must be positive"));
        }
        Ok(Self {
            name: name.into(),
            dim,
            lipschitz,
            smoothness,
            convex,
            bounded01,
            feature_radius,
            objective,
        })
    }

    /// Registry lookup used by configs and the CLI.
    pub fn from_name(name: &str, dim: usize, radius: f64) -> Result<Self> {
        match name {
            "quadratic" => make_quadratic_loss(dim, radius),
            "logistic" => make_logistic_loss(dim, radius),
            "sigmoid01" => make_sigmoid_nonconvex_loss(dim, radius),
            other => Err(ZossError::UnknownModel(other.to_string())),
        }
    }

    pub const REGISTERED: [&'static str; 3] = ["quadratic", "logistic", "sigmoid01"];

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }
    pub fn convex(&self) -> bool {
        self.convex
    }
    pub fn bounded01(&self) -> bool {
        self.bounded01
    }
    pub fn feature_radius(&self) -> f64 {
        self.feature_radius
    }

    #[inline]
    pub fn evaluate(&self, w: &[f64], z: &Example) -> f64 {
        self.objective.evaluate(w, z)
    }

    pub fn gradient(&self, w: &[f64], z: &Example) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.objective.gradient(w, z, &mut g);
        g
    }

    pub fn gradient_into(&self, w: &[f64], z: &Example, out: &mut [f64]) {
        self.objective.gradient(w, z, out);
    }
}

#[inline]
pub(crate) fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Huber-type distance loss `h(‖w − x‖)`: quadratic below `radius`, linear above.
#[derive(Debug, Clone)]
struct Huber {
    radius: f64,
    scale: f64,
}

impl Objective for Huber {
    fn evaluate(&self, w: &[f64], z: &Example) -> f64 {
        let r = crate::stats::dist(w, &z.features);
        if r <= self.radius {
            0.5 * self.scale * r * r
        } else {
            self.scale * self.radius * (r - 0.5 * self.radius)
        }
    }

    fn gradient(&self, w: &[f64], z: &Example, out: &mut [f64]) {
        let r = crate::stats::dist(w, &z.features);
        let k = if r <= self.radius {
            self.scale
        } else {
            self.scale * self.radius / r
        };
        for ((o, wi), xi) in out.iter_mut().zip(w).zip(&z.features) {
            *o = k * (wi - xi);
        }
    }
}

/// `1 − σ(y⟨w, x⟩)`, bounded in [0, 1] and nonconvex.
#[derive(Debug, Clone)]
struct Sigmoid01;

impl Objective for Sigmoid01 {
    fn evaluate(&self, w: &[f64], z: &Example) -> f64 {
        sigmoid(-z.label * dot(w, &z.features))
    }

    fn gradient(&self, w: &[f64], z: &Example, out: &mut [f64]) {
        let s = z.label * dot(w, &z.features);
        let ds = sigmoid(s) * sigmoid(-s);
        for (o, xi) in out.iter_mut().zip(&z.features) {
            *o = -ds * z.label * xi;
        }
    }
}

/// `log(1 + exp(−y⟨w, x⟩))`.
#[derive(Debug, Clone)]
struct Logistic;

impl Objective for Logistic {
    fn evaluate(&self, w: &[f64], z: &Example) -> f64 {
        softplus(-z.label * dot(w, &z.features))
    }

    fn gradient(&self, w: &[f64], z: &Example, out: &mut [f64]) {
        let s = z.label * dot(w, &z.features);
        let p = sigmoid(-s);
        for (o, xi) in out.iter_mut().zip(&z.features) {
            *o = -z.label * xi * p;
        }
    }
}

/// `⟨a, w⟩`, independent of `z`.
#[derive(Debug, Clone)]
struct Linear {
    a: Vec<f64>,
}

impl Objective for Linear {
    fn evaluate(&self, w: &[f64], _z: &Example) -> f64 {
        dot(&self.a, w)
    }

    fn gradient(&self, _w: &[f64], _z: &Example, out: &mut [f64]) {
        out.copy_from_slice(&self.a);
    }
}

/// Convex Huber loss with unit curvature: `L = radius`, `beta = 1`.
pub fn make_quadratic_loss(dim: usize, radius: f64) -> Result<LossModel> {
    make_quadratic_loss_scaled(dim, radius, 1.0)
}

/// Huber loss with curvature `scale`: `L = scale·radius`, `beta = scale`.
pub fn make_quadratic_loss_scaled(dim: usize, radius: f64, scale: f64) -> Result<LossModel> {
    if dim < 1 {
        return Err(invalid("dim must be >= 1"));
    }
    if radius.is_nan() || radius <= 0.0 || scale.is_nan() || scale <= 0.0 {
        return Err(invalid("radius and scale must be positive"));
    }
    LossModel::new(
        "quadratic",
        dim,
        scale * radius,
        scale,
        true,
        false,
        radius,
        Arc::new(Huber { radius, scale }),
    )
}

/// Bounded nonconvex loss `1 − σ(y⟨w,x⟩)` with `‖x‖ ≤ B`:
/// `L = B/4` (max of σ') and `beta = B²/(6√3)` (max of |σ''|).
pub fn make_sigmoid_nonconvex_loss(dim: usize, feature_radius: f64) -> Result<LossModel> {
    if dim < 1 {
        return Err(invalid("dim must be >= 1"));
    }
    if feature_radius.is_nan() || feature_radius <= 0.0 {
        return Err(invalid("feature radius must be positive"));
    }
    let b = feature_radius;
    LossModel::new(
        "sigmoid01",
        dim,
        b / 4.0,
        b * b / (6.0 * 3f64.sqrt()),
        false,
        true,
        b,
        Arc::new(Sigmoid01),
    )
}

/// Logistic loss with `‖x‖ ≤ R`: `L = R`, `beta = R²/4`, convex, unbounded.
pub fn make_logistic_loss(dim: usize, feature_radius: f64) -> Result<LossModel> {
    if dim < 1 {
        return Err(invalid("dim must be >= 1"));
    }
    if feature_radius.is_nan() || feature_radius <= 0.0 {
        return Err(invalid("feature radius must be positive"));
    }
    let r = feature_radius;
    LossModel::new("logistic", dim, r, r * r / 4.0, true, false, r, Arc::new(Logistic))
}

/// Affine loss `⟨a, w⟩`. Its smoothed gradient has no bias, which makes it the
/// reference case for exact estimator identities.
pub fn make_linear_loss(a: Vec<f64>) -> Result<LossModel> {
    let dim = a.len();
    let l = crate::stats::norm(&a);
    if dim < 1 || l.is_nan() || l <= 0.0 {
        return Err(invalid("linear loss needs a non-zero coefficient vector"));
    }
    LossModel::new("linear", dim, l, 0.0, true, false, 1.0, Arc::new(Linear { a }))
}
