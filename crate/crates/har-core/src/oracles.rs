//! Composite problem abstraction `F = f + psi` and stationarity measures.
//!
//! A [`ProblemInstance`] bundles a smooth oracle (value / gradient / Hessian)
//! with a simple convex term [`CompositeTerm`] handled through its proximal
//! map. Stationarity is measured as `dist(0, ∂F(x))`, computed from the
//! closed-form minimal-norm subgradient of each supported composite variant.

use std::cell::Cell;
use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::linalg;
use crate::{Error, Result};

/// Smooth part of the objective. Implementations must be pure functions of
/// the query point so instances can be shared across concurrent runs.
pub trait SmoothOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Array1<f64>) -> f64;
    fn gradient(&self, x: &Array1<f64>) -> Array1<f64>;
    /// Dense symmetric Hessian; `None` when the oracle does not provide one
    /// (first-order-only problems).
    fn hessian(&self, x: &Array1<f64>) -> Option<Array2<f64>> {
        let _ = x;
        None
    }
}

/// The simple convex term psi, with closed-form prox and subgradients.
#[derive(Clone, Debug)]
pub enum CompositeTerm {
    /// psi = 0.
    Zero,
    /// psi(x) = weight * |x|_1, weight >= 0.
    L1 { weight: f64 },
    /// Indicator of the box `lower <= x <= upper` (componentwise).
    BoxIndicator {
        lower: Array1<f64>,
        upper: Array1<f64>,
    },
}

impl CompositeTerm {
    pub fn is_zero(&self) -> bool {
        matches!(self, CompositeTerm::Zero)
    }

    /// psi(x); `+inf` outside the domain.
    pub fn value(&self, x: &Array1<f64>) -> f64 {
        match self {
            CompositeTerm::Zero => 0.0,
            CompositeTerm::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            CompositeTerm::BoxIndicator { lower, upper } => {
                let feasible = x
                    .iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .all(|(&xi, (&lo, &hi))| xi >= lo && xi <= hi);
                if feasible {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn feasible(&self, x: &Array1<f64>) -> bool {
        self.value(x).is_finite()
    }

    /// Proximal map `argmin_y psi(y) + |y - u|^2 / (2t)`, `t > 0`.
    pub fn prox(&self, u: &Array1<f64>, t: f64) -> Array1<f64> {
        debug_assert!(t > 0.0);
        match self {
            CompositeTerm::Zero => u.clone(),
            CompositeTerm::L1 { weight } => {
                let threshold = t * weight;
                u.mapv(|v| v.signum() * (v.abs() - threshold).max(0.0))
            }
            CompositeTerm::BoxIndicator { lower, upper } => {
                let mut out = u.clone();
                for (i, v) in out.iter_mut().enumerate() {
                    *v = v.clamp(lower[i], upper[i]);
                }
                out
            }
        }
    }

    /// Minimal-norm element of `grad + ∂psi(x)`, i.e. `dist(0, ∂F(x))` given
    /// the smooth gradient at a feasible point.
    pub fn subgradient_distance(&self, x: &Array1<f64>, grad: &Array1<f64>) -> f64 {
        match self {
            CompositeTerm::Zero => grad.dot(grad).sqrt(),
            CompositeTerm::L1 { weight } => {
                let mut sq = 0.0;
                for (&xi, &gi) in x.iter().zip(grad.iter()) {
                    let r = if xi != 0.0 {
                        gi + weight * xi.signum()
                    } else {
                        (gi.abs() - weight).max(0.0)
                    };
                    sq += r * r;
                }
                sq.sqrt()
            }
            CompositeTerm::BoxIndicator { lower, upper } => {
                // Norm of the gradient projected on the tangent cone of the box.
                let mut sq = 0.0;
                for i in 0..x.len() {
                    let gi = grad[i];
                    let at_lower = x[i] <= lower[i];
                    let at_upper = x[i] >= upper[i];
                    let r = if at_lower && at_upper {
                        0.0
                    } else if at_lower {
                        (-gi).max(0.0)
                    } else if at_upper {
                        gi.max(0.0)
                    } else {
                        gi
                    };
                    sq += r * r;
                }
                sq.sqrt()
            }
        }
    }
}

/// Stationarity measures of a point, per the two optimality definitions.
#[derive(Clone, Debug, PartialEq)]
pub struct StationarityReport {
    /// `dist(0, ∂F(x))`; equals the gradient norm when psi = 0.
    pub first_order: f64,
    /// Smallest Hessian eigenvalue of F; present only for smooth problems
    /// when explicitly requested.
    pub second_order: Option<f64>,
}

/// A composite optimization problem `min F(x) = f(x) + psi(x)`.
#[derive(Clone)]
pub struct ProblemInstance {
    pub name: String,
    pub dim: usize,
    smooth: Arc<dyn SmoothOracle>,
    pub psi: CompositeTerm,
    pub known_lipschitz: Option<f64>,
    pub known_optimum: Option<f64>,
    pub x0: Array1<f64>,
    pub convex: bool,
}

impl std::fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("psi", &self.psi)
            .field("known_lipschitz", &self.known_lipschitz)
            .field("known_optimum", &self.known_optimum)
            .field("convex", &self.convex)
            .finish()
    }
}

impl ProblemInstance {
    /// The starting point must lie in `dom(psi)`.
    pub fn new(
        name: impl Into<String>,
        smooth: Arc<dyn SmoothOracle>,
        psi: CompositeTerm,
        x0: Array1<f64>,
    ) -> Result<Self> {
        let dim = smooth.dim();
        if dim == 0 {
            return Err(Error::InvalidConfig(
                "problem dimension must be >= 1".into(),
            ));
        }
        if x0.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x0.len(),
            });
        }
        if !psi.feasible(&x0) {
            return Err(Error::InvalidConfig(
                "initial point is infeasible for psi".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            dim,
            smooth,
            psi,
            known_lipschitz: None,
            known_optimum: None,
            x0,
            convex: false,
        })
    }

    pub fn with_known_optimum(mut self, f_star: f64) -> Self {
        self.known_optimum = Some(f_star);
        self
    }

    pub fn with_known_lipschitz(mut self, l_p: f64) -> Self {
        self.known_lipschitz = Some(l_p);
        self
    }

    pub fn with_convex(mut self, convex: bool) -> Self {
        self.convex = convex;
        self
    }

    pub fn f_value(&self, x: &Array1<f64>) -> f64 {
        self.smooth.value(x)
    }

    pub fn f_gradient(&self, x: &Array1<f64>) -> Array1<f64> {
        self.smooth.gradient(x)
    }

    pub fn f_hessian(&self, x: &Array1<f64>) -> Option<Array2<f64>> {
        self.smooth.hessian(x)
    }

    pub fn has_hessian(&self) -> bool {
        self.smooth.hessian(&self.x0).is_some()
    }
}

/// `F(x) = f(x) + psi(x)`. Infeasible points return `+inf` without querying
/// the smooth oracle; non-finite smooth values are an oracle failure.
pub fn evaluate_composite(problem: &ProblemInstance, x: &Array1<f64>) -> Result<f64> {
    if x.len() != problem.dim {
        return Err(Error::DimensionMismatch {
            expected: problem.dim,
            got: x.len(),
        });
    }
    let psi = problem.psi.value(x);
    if psi.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let f = problem.f_value(x);
    if !f.is_finite() {
        return Err(Error::OracleFailure { x: x.to_vec() });
    }
    Ok(f + psi)
}

/// Proximal step on the composite term alone; closed form for every variant.
pub fn prox_step(psi: &CompositeTerm, u: &Array1<f64>, t: f64) -> Array1<f64> {
    psi.prox(u, t)
}

/// Stationarity measures at `x`. The second-order measure (smallest Hessian
/// eigenvalue) is only defined for psi = 0, and is present only when
/// requested and a Hessian oracle exists.
pub fn stationarity(
    problem: &ProblemInstance,
    x: &Array1<f64>,
    want_second_order: bool,
) -> Result<StationarityReport> {
    if want_second_order && !problem.psi.is_zero() {
        return Err(Error::UnsupportedMeasure);
    }
    let grad = problem.f_gradient(x);
    let first_order = problem.psi.subgradient_distance(x, &grad);
    let second_order = if want_second_order {
        problem
            .f_hessian(x)
            .map(|h| linalg::smallest_eigenpair(&h, 1e-10).0)
    } else {
        None
    };
    Ok(StationarityReport {
        first_order,
        second_order,
    })
}

/// Cumulative oracle call counters for one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct EvalCounts {
    pub n_f: u64,
    pub n_g: u64,
    pub n_h: u64,
}

/// Counting wrapper so benchmark statistics are exact. Counters accumulate
/// per run; the wrapped problem itself is never mutated.
pub struct CountingOracle<'a> {
    problem: &'a ProblemInstance,
    n_f: Cell<u64>,
    n_g: Cell<u64>,
    n_h: Cell<u64>,
}

impl<'a> CountingOracle<'a> {
    pub fn new(problem: &'a ProblemInstance) -> Self {
        Self {
            problem,
            n_f: Cell::new(0),
            n_g: Cell::new(0),
            n_h: Cell::new(0),
        }
    }

    pub fn problem(&self) -> &ProblemInstance {
        self.problem
    }

    pub fn f_value(&self, x: &Array1<f64>) -> Result<f64> {
        self.n_f.set(self.n_f.get() + 1);
        let f = self.problem.f_value(x);
        if !f.is_finite() {
            return Err(Error::OracleFailure { x: x.to_vec() });
        }
        Ok(f)
    }

    pub fn f_gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        self.n_g.set(self.n_g.get() + 1);
        let g = self.problem.f_gradient(x);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::OracleFailure { x: x.to_vec() });
        }
        Ok(g)
    }

    pub fn f_hessian(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        self.n_h.set(self.n_h.get() + 1);
        let h = self
            .problem
            .f_hessian(x)
            .ok_or(Error::UnsupportedConfiguration(
                "problem does not provide a Hessian oracle".into(),
            ))?;
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::OracleFailure { x: x.to_vec() });
        }
        Ok(h)
    }

    pub fn counts(&self) -> EvalCounts {
        EvalCounts {
            n_f: self.n_f.get(),
            n_g: self.n_g.get(),
            n_h: self.n_h.get(),
        }
    }
}
