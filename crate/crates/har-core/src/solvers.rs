//! The history-aware adaptive regularization driver and two baselines.
//!
//! One driver covers the full-history, cyclic, and sliding-window variants:
//! they differ only in how the adaptive parameter `M_k` is aggregated from
//! the stored local estimates (the [`HistoryPolicy`]). Each iteration solves
//! the order-p regularized subproblem with `sigma_k = alpha * M_k`, applies a
//! monotone step, and classifies itself as successful when
//! `(alpha + 1) M_k >= 2 H_k`.
//!
//! The baselines are the sigma-doubling scheme (`run_lsar_baseline`) and the
//! classic ratio-test update (`run_arc_baseline`).

use std::collections::VecDeque;
use std::time::Instant;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::oracles::{CountingOracle, EvalCounts, ProblemInstance};
use crate::subproblem::{self, CubicSubproblemResult};
use crate::taylor::{local_estimate_value, TaylorModel};
use crate::{factorial, linalg, Error, Result};

/// History budget: a positive count of retained estimates, or unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Budget {
    Finite(usize),
    Infinite,
}

impl Budget {
    pub fn as_finite(self) -> Option<usize> {
        match self {
            Budget::Finite(b) => Some(b),
            Budget::Infinite => None,
        }
    }
}

impl std::fmt::Display for Budget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Budget::Finite(b) => write!(f, "{b}"),
            Budget::Infinite => write!(f, "inf"),
        }
    }
}

/// How historical local estimates feed the adaptive parameter.
///
/// `Cyclic(Infinite)` and `Sliding(Infinite)` produce exactly the same
/// `M_k` sequence as `Full`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HistoryPolicy {
    /// `M_k = max(M_{k-1}, H_{k-1})`: the running maximum of everything seen.
    Full,
    /// As `Full`, but every B-th iteration refreshes `M_k = max(H_0, H_{k-1})`.
    Cyclic(Budget),
    /// `M_k = max(H_0, H_{b_k}, ..., H_{k-1})` with `b_k = max(1, k - B)`.
    Sliding(Budget),
}

impl HistoryPolicy {
    pub fn cyclic(budget: usize) -> Self {
        HistoryPolicy::Cyclic(Budget::Finite(budget))
    }

    pub fn sliding(budget: usize) -> Self {
        HistoryPolicy::Sliding(Budget::Finite(budget))
    }

    pub fn budget(&self) -> Option<usize> {
        match self {
            HistoryPolicy::Full => None,
            HistoryPolicy::Cyclic(b) | HistoryPolicy::Sliding(b) => b.as_finite(),
        }
    }
}

impl std::fmt::Display for HistoryPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HistoryPolicy::Full => write!(f, "full"),
            HistoryPolicy::Cyclic(b) => write!(f, "cyclic({b})"),
            HistoryPolicy::Sliding(b) => write!(f, "sliding({b})"),
        }
    }
}

/// The adaptive parameter and the stored window of local estimates.
#[derive(Clone, Debug)]
pub struct HistoryState {
    m: f64,
    window: VecDeque<f64>,
    h0: f64,
    k: usize,
}

impl HistoryState {
    pub fn new(h0: f64) -> Self {
        Self {
            m: h0,
            window: VecDeque::new(),
            h0,
            k: 0,
        }
    }

    /// Advances to iteration `k + 1` and returns `M_k` for it.
    pub fn begin_iteration(&mut self, policy: HistoryPolicy) -> f64 {
        self.k += 1;
        let last = self.window.back().copied();
        match policy {
            HistoryPolicy::Full => {
                if let Some(h) = last {
                    self.m = self.m.max(h);
                }
            }
            HistoryPolicy::Cyclic(budget) => {
                let refresh = budget
                    .as_finite()
                    .is_some_and(|b| b > 0 && self.k.is_multiple_of(b));
                if refresh {
                    // Forget the accumulated maximum; keep only H_{k-1}.
                    self.m = self.h0.max(last.unwrap_or(self.h0));
                    let kept = last;
                    self.window.clear();
                    if let Some(h) = kept {
                        self.window.push_back(h);
                    }
                } else if let Some(h) = last {
                    self.m = self.m.max(h);
                }
            }
            HistoryPolicy::Sliding(_) => {
                let mut m = self.h0;
                for &h in &self.window {
                    m = m.max(h);
                }
                self.m = m;
            }
        }
        self.m
    }

    /// Stores `H_k` after the step, trimming per the policy.
    pub fn record_estimate(&mut self, h_k: f64, policy: HistoryPolicy) {
        self.window.push_back(h_k);
        if let HistoryPolicy::Sliding(Budget::Finite(b)) = policy {
            while self.window.len() > b {
                self.window.pop_front();
            }
        }
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn window(&self) -> &VecDeque<f64> {
        &self.window
    }
}

/// Run configuration shared by the whole solver family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Derivative order, 1 or 2.
    pub p: usize,
    /// Regularization over-relaxation factor, must exceed 1.
    pub alpha: f64,
    /// Initial guess `H_0 = M_0 > 0` for the local Lipschitz estimate.
    pub h0: f64,
    pub policy: HistoryPolicy,
    /// First-order stationarity target.
    pub eps_g: f64,
    /// Optional second-order target: require `lambda_min(hessian) >= -eps_h`
    /// at the returned point (smooth p = 2 problems only).
    pub eps_h: Option<f64>,
    /// Optional function-gap target, used when the problem carries a known
    /// optimum (the accelerated method's natural stopping rule).
    pub eps_f: Option<f64>,
    pub max_iters: usize,
    /// Relative tolerance for the cubic subproblem residual.
    pub tol_sub: f64,
    /// Degenerate-step floor, scaled internally by `1 + |x|`.
    pub step_floor: f64,
    /// Rough upper bound on the order-p Lipschitz constant, if known; only
    /// used to warn about too-small budgets.
    pub lipschitz_upper_hint: Option<f64>,
    /// Wall-clock cap in seconds; runs over it stop with `MaxIterations`.
    pub time_limit_s: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p: 2,
            alpha: 2.0,
            h0: 1e-3,
            policy: HistoryPolicy::Full,
            eps_g: 1e-8,
            eps_h: None,
            eps_f: None,
            max_iters: 1000,
            tol_sub: subproblem::DEFAULT_TOL_SUB,
            step_floor: 1e-14,
            lipschitz_upper_hint: None,
            time_limit_s: None,
        }
    }
}

impl SolverConfig {
    // The negated comparisons double as NaN rejection.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.p > 2 {
            return Err(Error::UnsupportedOrder(self.p));
        }
        if !(self.alpha > 1.0) {
            return Err(Error::InvalidConfig("alpha must exceed 1".into()));
        }
        if !(self.h0 > 0.0) {
            return Err(Error::InvalidConfig("h0 must be positive".into()));
        }
        if !(self.eps_g > 0.0) {
            return Err(Error::InvalidConfig("eps_g must be positive".into()));
        }
        if let Some(eps_h) = self.eps_h {
            if !(eps_h > 0.0) {
                return Err(Error::InvalidConfig("eps_h must be positive".into()));
            }
        }
        if let HistoryPolicy::Cyclic(Budget::Finite(0))
        | HistoryPolicy::Sliding(Budget::Finite(0)) = self.policy
        {
            return Err(Error::InvalidConfig("budget must be positive".into()));
        }
        Ok(())
    }

    /// A budget below the guaranteed-progress threshold derived from the
    /// Lipschitz hint deserves a warning: the method may stall inside a
    /// window.
    pub fn budget_warning(&self) -> Option<String> {
        let b = self.policy.budget()?;
        let hint = self.lipschitz_upper_hint?;
        let needed = unsuccessful_bound(self.h0, hint.max(self.h0), self.alpha) + 1;
        (b < needed).then(|| {
            format!(
                "budget {b} is below the guaranteed-progress threshold {needed} \
                 for the given Lipschitz hint"
            )
        })
    }
}

/// Termination status of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    /// `dist(0, ∂F) <= eps_g` at the returned point.
    GradientTolerance,
    /// Gradient tolerance plus `lambda_min(hessian) >= -eps_h`.
    SecondOrderTolerance,
    /// Function gap below `eps_f` against a known optimum.
    FunctionGapTolerance,
    MaxIterations,
    SubproblemFailure,
    OracleFailure,
    /// Step collapsed below the floor while still non-stationary.
    DegenerateStep,
}

impl RunStatus {
    /// Whether the run reached its first-order target.
    pub fn solved(self) -> bool {
        matches!(
            self,
            RunStatus::GradientTolerance
                | RunStatus::SecondOrderTolerance
                | RunStatus::FunctionGapTolerance
        )
    }
}

/// One row of the run trace.
#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `F` at the accepted iterate `x^k`.
    pub f_value: f64,
    /// `dist(0, ∂F(x^k))`.
    pub stationarity: f64,
    pub h_k: f64,
    pub m_k: f64,
    pub sigma_k: f64,
    pub step_norm: f64,
    /// `(alpha + 1) M_k >= 2 H_k` for the adaptive family; "step accepted"
    /// for the baselines.
    pub successful: bool,
    /// The monotone step rejected the trial point.
    pub null_step: bool,
    pub n_f: u64,
    pub n_g: u64,
    pub n_h: u64,
    /// Seconds since the start of the run.
    pub wall_time_s: f64,
}

/// Result of a solver run with its full per-iteration trace.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub status: RunStatus,
    pub method: String,
    pub final_x: Array1<f64>,
    pub final_f: f64,
    pub final_stationarity: f64,
    pub initial_f: f64,
    pub trace: Vec<IterationRecord>,
    pub unsuccessful_count: usize,
    /// `max(H_0, max_k H_k)` over the run.
    pub measured_h_max: f64,
    pub counts: EvalCounts,
    pub wall_time_s: f64,
    pub config: SolverConfig,
}

impl RunResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Ceiling bound on the number of unsuccessful iterations:
/// `ceil(log_{(alpha+1)/2}(h_max / h0))`.
pub fn unsuccessful_bound(h0: f64, h_max: f64, alpha: f64) -> usize {
    assert!(h0 > 0.0 && h_max >= h0 && alpha > 1.0);
    if h_max <= h0 {
        return 0;
    }
    let base = (alpha + 1.0) / 2.0;
    ((h_max / h0).ln() / base.ln()).ceil() as usize
}

// ---------------------------------------------------------------------------
// Shared driver state
// ---------------------------------------------------------------------------

/// Mutable state of one adaptive run, advanced by [`har_step`].
pub struct HarState<'a> {
    oracle: CountingOracle<'a>,
    history: HistoryState,
    x: Array1<f64>,
    f_smooth: f64,
    f_composite: f64,
    grad: Array1<f64>,
    stationarity: f64,
    hessian_cache: Option<Array2<f64>>,
    started: Instant,
    initial_f: f64,
    h_seen_max: f64,
}

/// What one step produced: either a completed iteration or a termination
/// decision reached inside the step.
pub enum HarStep {
    Iterated(IterationRecord),
    Finished(RunStatus),
}

impl<'a> HarState<'a> {
    pub fn init(problem: &'a ProblemInstance, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        if config.p == 2 && !problem.has_hessian() {
            return Err(Error::UnsupportedConfiguration(
                "p = 2 requires a Hessian oracle".into(),
            ));
        }
        if config.eps_h.is_some() && !problem.psi.is_zero() {
            return Err(Error::UnsupportedMeasure);
        }
        if config.eps_h.is_some() && config.p != 2 {
            return Err(Error::UnsupportedConfiguration(
                "the second-order target needs p = 2".into(),
            ));
        }
        if !problem.psi.feasible(&problem.x0) {
            return Err(Error::InvalidConfig(
                "initial point is infeasible for psi".into(),
            ));
        }
        let oracle = CountingOracle::new(problem);
        let x = problem.x0.clone();
        let f_smooth = oracle.f_value(&x)?;
        let f_composite = f_smooth + problem.psi.value(&x);
        let grad = oracle.f_gradient(&x)?;
        let stationarity = problem.psi.subgradient_distance(&x, &grad);
        Ok(Self {
            oracle,
            history: HistoryState::new(config.h0),
            x,
            f_smooth,
            f_composite,
            grad,
            stationarity,
            hessian_cache: None,
            started: Instant::now(),
            initial_f: f_composite,
            h_seen_max: config.h0,
        })
    }

    pub fn x(&self) -> &Array1<f64> {
        &self.x
    }

    pub fn stationarity(&self) -> f64 {
        self.stationarity
    }

    pub fn f_composite(&self) -> f64 {
        self.f_composite
    }

    pub fn history(&self) -> &HistoryState {
        &self.history
    }

    fn hessian(&mut self) -> Result<Array2<f64>> {
        if let Some(h) = &self.hessian_cache {
            return Ok(h.clone());
        }
        let h = self.oracle.f_hessian(&self.x)?;
        self.hessian_cache = Some(h.clone());
        Ok(h)
    }

    fn over_time_limit(&self, config: &SolverConfig) -> bool {
        config
            .time_limit_s
            .is_some_and(|limit| self.started.elapsed().as_secs_f64() > limit)
    }

    /// Smallest Hessian eigenvalue at the current iterate (for the
    /// second-order target). Reuses the cached Hessian when possible.
    fn current_lambda_min(&mut self) -> Result<f64> {
        let h = self.hessian()?;
        Ok(linalg::smallest_eigenpair(&h, 1e-10).0)
    }
}

/// Executes one iteration of the adaptive scheme: M-update, subproblem,
/// monotone step, local estimate, history update.
pub fn har_step(
    state: &mut HarState<'_>,
    problem: &ProblemInstance,
    config: &SolverConfig,
) -> Result<HarStep> {
    let m_k = state.history.begin_iteration(config.policy);
    let sigma = config.alpha * m_k;

    // Build the order-p model at the current iterate.
    let hessian = if config.p == 2 {
        Some(state.hessian()?)
    } else {
        None
    };
    let model = TaylorModel::new(
        state.x.clone(),
        state.f_smooth,
        state.grad.clone(),
        hessian,
        config.p,
    )?;

    // Search direction.
    let d = if config.p == 1 {
        subproblem::solve_p1(&state.grad, sigma, &state.x, &problem.psi)
    } else {
        let h = model.hessian().expect("p = 2 model has a Hessian");
        let res: CubicSubproblemResult =
            subproblem::solve_p2_cubic(&state.grad, h, sigma, config.tol_sub)?;
        res.d
    };
    let step_norm = d.dot(&d).sqrt();
    let floor = config.step_floor * (1.0 + state.x.dot(&state.x).sqrt());
    if step_norm <= floor {
        // A (near-)zero step solves the subproblem only at a stationary
        // point; report which kind this is rather than divide by it.
        let status = if state.stationarity <= config.eps_g {
            match config.eps_h {
                Some(eps_h) => {
                    if state.current_lambda_min()? >= -eps_h {
                        RunStatus::SecondOrderTolerance
                    } else {
                        RunStatus::DegenerateStep
                    }
                }
                None => RunStatus::GradientTolerance,
            }
        } else {
            RunStatus::DegenerateStep
        };
        return Ok(HarStep::Finished(status));
    }

    let x_half = &state.x + &d;
    let psi_half = problem.psi.value(&x_half);
    let f_half = state.oracle.f_value(&x_half)?;
    let f_composite_half = f_half + psi_half;

    let h_k = local_estimate_value(&model, &d, f_half, floor)?;
    state.h_seen_max = state.h_seen_max.max(h_k);
    let successful = (config.alpha + 1.0) * m_k >= 2.0 * h_k;

    // Monotone step; ties accept the trial point.
    let accept = f_composite_half <= state.f_composite;
    if accept {
        state.x = x_half;
        state.f_smooth = f_half;
        state.f_composite = f_composite_half;
        state.grad = state.oracle.f_gradient(&state.x)?;
        state.stationarity = problem.psi.subgradient_distance(&state.x, &state.grad);
        state.hessian_cache = None;
    }

    state.history.record_estimate(h_k, config.policy);

    let counts = state.oracle.counts();
    Ok(HarStep::Iterated(IterationRecord {
        k: state.history.iteration(),
        f_value: state.f_composite,
        stationarity: state.stationarity,
        h_k,
        m_k,
        sigma_k: sigma,
        step_norm,
        successful,
        null_step: !accept,
        n_f: counts.n_f,
        n_g: counts.n_g,
        n_h: counts.n_h,
        wall_time_s: state.started.elapsed().as_secs_f64(),
    }))
}

fn method_label(config: &SolverConfig) -> String {
    match config.policy {
        HistoryPolicy::Full => "har".to_string(),
        HistoryPolicy::Cyclic(b) => format!("har-c({b})"),
        HistoryPolicy::Sliding(b) => format!("har-s({b})"),
    }
}

/// Checks the first-order target and, when configured, escalates to the
/// second-order target. Returns a termination status when satisfied.
fn tolerance_status(state: &mut HarState<'_>, config: &SolverConfig) -> Result<Option<RunStatus>> {
    if state.stationarity > config.eps_g {
        return Ok(None);
    }
    match config.eps_h {
        None => Ok(Some(RunStatus::GradientTolerance)),
        Some(eps_h) => {
            if state.current_lambda_min()? >= -eps_h {
                Ok(Some(RunStatus::SecondOrderTolerance))
            } else {
                Ok(None) // first-order done, second-order not: keep moving
            }
        }
    }
}

fn finish_run(
    state: HarState<'_>,
    status: RunStatus,
    method: String,
    trace: Vec<IterationRecord>,
    config: &SolverConfig,
) -> RunResult {
    let unsuccessful_count = trace.iter().filter(|r| !r.successful).count();
    RunResult {
        status,
        method,
        final_f: state.f_composite,
        final_stationarity: state.stationarity,
        initial_f: state.initial_f,
        final_x: state.x,
        trace,
        unsuccessful_count,
        measured_h_max: state.h_seen_max,
        counts: state.oracle.counts(),
        wall_time_s: state.started.elapsed().as_secs_f64(),
        config: config.clone(),
    }
}

/// Runs the adaptive scheme under the configured history policy until a
/// tolerance is met or the iteration cap is reached. Subproblem and oracle
/// failures terminate the run with the partial trace preserved.
pub fn run_har(problem: &ProblemInstance, config: &SolverConfig) -> Result<RunResult> {
    let mut state = HarState::init(problem, config)?;
    let method = method_label(config);
    let mut trace = Vec::new();

    for _ in 0..config.max_iters {
        if let Some(status) = tolerance_status(&mut state, config)? {
            return Ok(finish_run(state, status, method, trace, config));
        }
        if let Some(gap_status) = function_gap_status(&state, problem, config) {
            return Ok(finish_run(state, gap_status, method, trace, config));
        }
        if state.over_time_limit(config) {
            break;
        }
        match har_step(&mut state, problem, config) {
            Ok(HarStep::Iterated(record)) => trace.push(record),
            Ok(HarStep::Finished(status)) => {
                return Ok(finish_run(state, status, method, trace, config))
            }
            Err(Error::SubproblemFailure(_)) => {
                return Ok(finish_run(
                    state,
                    RunStatus::SubproblemFailure,
                    method,
                    trace,
                    config,
                ))
            }
            Err(Error::OracleFailure { .. }) => {
                return Ok(finish_run(
                    state,
                    RunStatus::OracleFailure,
                    method,
                    trace,
                    config,
                ))
            }
            Err(e) => return Err(e),
        }
    }
    let status = tolerance_status(&mut state, config)?.unwrap_or(RunStatus::MaxIterations);
    Ok(finish_run(state, status, method, trace, config))
}

fn function_gap_status(
    state: &HarState<'_>,
    problem: &ProblemInstance,
    config: &SolverConfig,
) -> Option<RunStatus> {
    let eps_f = config.eps_f?;
    let f_star = problem.known_optimum?;
    (state.f_composite - f_star <= eps_f).then_some(RunStatus::FunctionGapTolerance)
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// Sigma-doubling baseline: at each iterate, double sigma (starting from half
/// the previous accepted value) until the trial point is dominated by the
/// regularized model, i.e. `H_k <= sigma_k`. Every inner trial costs one
/// function evaluation.
pub fn run_lsar_baseline(problem: &ProblemInstance, config: &SolverConfig) -> Result<RunResult> {
    const MAX_DOUBLINGS: usize = 64;
    let mut state = HarState::init(problem, config)?;
    let method = "lsar".to_string();
    let mut trace = Vec::new();
    let mut sigma_prev = config.alpha * config.h0;

    for k in 1..=config.max_iters {
        if let Some(status) = tolerance_status(&mut state, config)? {
            return Ok(finish_run(state, status, method, trace, config));
        }
        if state.over_time_limit(config) {
            break;
        }
        let hessian = if config.p == 2 {
            Some(state.hessian()?)
        } else {
            None
        };
        let model = TaylorModel::new(
            state.x.clone(),
            state.f_smooth,
            state.grad.clone(),
            hessian,
            config.p,
        )?;
        let floor = config.step_floor * (1.0 + state.x.dot(&state.x).sqrt());

        let mut sigma = (0.5 * sigma_prev).max(f64::MIN_POSITIVE);
        let mut accepted = None;
        for _ in 0..MAX_DOUBLINGS {
            let d = if config.p == 1 {
                subproblem::solve_p1(&state.grad, sigma, &state.x, &problem.psi)
            } else {
                let h = model.hessian().expect("p = 2 model has a Hessian");
                match subproblem::solve_p2_cubic(&state.grad, h, sigma, config.tol_sub) {
                    Ok(res) => res.d,
                    Err(Error::SubproblemFailure(_)) => {
                        return Ok(finish_run(
                            state,
                            RunStatus::SubproblemFailure,
                            method,
                            trace,
                            config,
                        ))
                    }
                    Err(e) => return Err(e),
                }
            };
            let step_norm = d.dot(&d).sqrt();
            if step_norm <= floor {
                let status = if state.stationarity <= config.eps_g {
                    RunStatus::GradientTolerance
                } else {
                    RunStatus::DegenerateStep
                };
                return Ok(finish_run(state, status, method, trace, config));
            }
            let x_half = &state.x + &d;
            let f_half = match state.oracle.f_value(&x_half) {
                Ok(v) => v,
                Err(Error::OracleFailure { .. }) => {
                    return Ok(finish_run(
                        state,
                        RunStatus::OracleFailure,
                        method,
                        trace,
                        config,
                    ))
                }
                Err(e) => return Err(e),
            };
            let h_k = local_estimate_value(&model, &d, f_half, floor)?;
            if h_k <= sigma {
                accepted = Some((d, x_half, f_half, h_k, step_norm));
                break;
            }
            sigma *= 2.0;
        }
        let Some((_d, x_half, f_half, h_k, step_norm)) = accepted else {
            return Ok(finish_run(
                state,
                RunStatus::SubproblemFailure,
                method,
                trace,
                config,
            ));
        };
        state.h_seen_max = state.h_seen_max.max(h_k);
        sigma_prev = sigma;

        // The sufficient-decrease condition makes the step monotone.
        state.x = x_half;
        state.f_smooth = f_half;
        state.f_composite = f_half + problem.psi.value(&state.x);
        state.grad = state.oracle.f_gradient(&state.x)?;
        state.stationarity = problem.psi.subgradient_distance(&state.x, &state.grad);
        state.hessian_cache = None;

        let counts = state.oracle.counts();
        trace.push(IterationRecord {
            k,
            f_value: state.f_composite,
            stationarity: state.stationarity,
            h_k,
            m_k: sigma / config.alpha,
            sigma_k: sigma,
            step_norm,
            successful: true,
            null_step: false,
            n_f: counts.n_f,
            n_g: counts.n_g,
            n_h: counts.n_h,
            wall_time_s: state.started.elapsed().as_secs_f64(),
        });
    }
    let status = tolerance_status(&mut state, config)?.unwrap_or(RunStatus::MaxIterations);
    Ok(finish_run(state, status, method, trace, config))
}

/// Ratio-test baseline (p = 2, smooth only): accept when the achieved
/// decrease is at least `eta1` of the model decrease; shrink sigma on very
/// successful steps, grow it on rejections.
pub fn run_arc_baseline(problem: &ProblemInstance, config: &SolverConfig) -> Result<RunResult> {
    const ETA_1: f64 = 0.1;
    const ETA_2: f64 = 0.9;
    const GAMMA_1: f64 = 2.0;
    const GAMMA_2: f64 = 2.0;
    const SIGMA_MIN: f64 = 1e-16;

    if config.p != 2 {
        return Err(Error::UnsupportedConfiguration(
            "the ratio-test baseline is second-order only".into(),
        ));
    }
    if !problem.psi.is_zero() {
        return Err(Error::UnsupportedConfiguration(
            "the ratio-test baseline requires psi = 0".into(),
        ));
    }
    let mut state = HarState::init(problem, config)?;
    let method = "arc".to_string();
    let mut trace = Vec::new();
    let mut sigma = config.alpha * config.h0;

    for k in 1..=config.max_iters {
        if let Some(status) = tolerance_status(&mut state, config)? {
            return Ok(finish_run(state, status, method, trace, config));
        }
        if state.over_time_limit(config) {
            break;
        }
        let hessian = state.hessian()?;
        let model = TaylorModel::new(
            state.x.clone(),
            state.f_smooth,
            state.grad.clone(),
            Some(hessian.clone()),
            2,
        )?;
        let floor = config.step_floor * (1.0 + state.x.dot(&state.x).sqrt());

        let res = match subproblem::solve_p2_cubic(&state.grad, &hessian, sigma, config.tol_sub) {
            Ok(res) => res,
            Err(Error::SubproblemFailure(_)) => {
                return Ok(finish_run(
                    state,
                    RunStatus::SubproblemFailure,
                    method,
                    trace,
                    config,
                ))
            }
            Err(e) => return Err(e),
        };
        let step_norm = res.d.dot(&res.d).sqrt();
        if step_norm <= floor || res.model_decrease == 0.0 {
            let status = if state.stationarity <= config.eps_g {
                RunStatus::GradientTolerance
            } else {
                RunStatus::DegenerateStep
            };
            return Ok(finish_run(state, status, method, trace, config));
        }
        let x_half = &state.x + &res.d;
        let f_half = match state.oracle.f_value(&x_half) {
            Ok(v) => v,
            Err(Error::OracleFailure { .. }) => {
                return Ok(finish_run(
                    state,
                    RunStatus::OracleFailure,
                    method,
                    trace,
                    config,
                ))
            }
            Err(e) => return Err(e),
        };
        let h_k = local_estimate_value(&model, &res.d, f_half, floor)?;
        state.h_seen_max = state.h_seen_max.max(h_k);

        let rho = (state.f_smooth - f_half) / res.model_decrease;
        let accept = rho >= ETA_1;
        if accept {
            state.x = x_half;
            state.f_smooth = f_half;
            state.f_composite = f_half;
            state.grad = state.oracle.f_gradient(&state.x)?;
            state.stationarity = problem.psi.subgradient_distance(&state.x, &state.grad);
            state.hessian_cache = None;
        }
        let sigma_used = sigma;
        if rho >= ETA_2 {
            sigma = (sigma / GAMMA_2).max(SIGMA_MIN);
        } else if rho < ETA_1 {
            sigma *= GAMMA_1;
        }

        let counts = state.oracle.counts();
        trace.push(IterationRecord {
            k,
            f_value: state.f_composite,
            stationarity: state.stationarity,
            h_k,
            m_k: sigma_used / config.alpha,
            sigma_k: sigma_used,
            step_norm,
            successful: accept,
            null_step: !accept,
            n_f: counts.n_f,
            n_g: counts.n_g,
            n_h: counts.n_h,
            wall_time_s: state.started.elapsed().as_secs_f64(),
        });
    }
    let status = tolerance_status(&mut state, config)?.unwrap_or(RunStatus::MaxIterations);
    Ok(finish_run(state, status, method, trace, config))
}

/// Successful-decrease slack used by audits: the guaranteed decrease at a
/// successful iteration is `(alpha - 1) M_k / (2 (p+1)!) * |d|^{p+1}`.
pub fn guaranteed_decrease(alpha: f64, m_k: f64, p: usize, step_norm: f64) -> f64 {
    (alpha - 1.0) * m_k / (2.0 * factorial(p + 1)) * step_norm.powi(p as i32 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{catalog_problem, synthetic_logistic};

    fn quadratic() -> ProblemInstance {
        catalog_problem("quad-well-10").unwrap()
    }

    fn base_config() -> SolverConfig {
        SolverConfig {
            h0: 1.0,
            max_iters: 100,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn config_rejects_alpha_at_most_one() {
        let config = SolverConfig {
            alpha: 1.0,
            ..SolverConfig::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn budget_warning_fires_below_threshold() {
        let config = SolverConfig {
            policy: HistoryPolicy::cyclic(2),
            h0: 1.0,
            alpha: 3.0,
            lipschitz_upper_hint: Some(100.0),
            ..SolverConfig::default()
        };
        // Threshold is ceil(log_2 100) + 1 = 8.
        assert!(config.budget_warning().is_some());
        let config = SolverConfig {
            policy: HistoryPolicy::cyclic(8),
            ..config
        };
        assert!(config.budget_warning().is_none());
    }

    #[test]
    fn unsuccessful_bound_examples() {
        assert_eq!(unsuccessful_bound(1.0, 100.0, 3.0), 7);
        assert_eq!(unsuccessful_bound(1.0, 1.0, 3.0), 0);
        assert_eq!(unsuccessful_bound(1.0, 8.0, 3.0), 3);
    }

    #[test]
    fn quadratic_converges_fast() {
        // H_k = 0 for quadratics keeps sigma at alpha*H_0; with a small H_0
        // the cubic step is essentially a Newton step and three iterations
        // suffice.
        let result = run_har(&quadratic(), &SolverConfig::default()).unwrap();
        assert_eq!(result.status, RunStatus::GradientTolerance);
        assert!(result.iterations() <= 3, "took {}", result.iterations());
        for record in &result.trace {
            // Exactly zero in exact arithmetic; roundoff in the remainder is
            // amplified by |d|^{-3} on the final tiny steps.
            assert!(record.h_k.abs() < 1e-6);
            assert!(record.successful);
        }
    }

    #[test]
    fn first_step_of_quadratic_matches_alg() {
        // f = |x|^2/2, p = 2, x0 = (1, 0), H0 = 1, alpha = 2: sigma_1 = 2 and
        // the iteration is successful since 3 * 1 >= 2 * 0.
        let p = {
            use crate::oracles::{CompositeTerm, ProblemInstance};
            use std::sync::Arc;
            struct Half;
            impl crate::oracles::SmoothOracle for Half {
                fn dim(&self) -> usize {
                    2
                }
                fn value(&self, x: &Array1<f64>) -> f64 {
                    0.5 * x.dot(x)
                }
                fn gradient(&self, x: &Array1<f64>) -> Array1<f64> {
                    x.clone()
                }
                fn hessian(&self, _x: &Array1<f64>) -> Option<Array2<f64>> {
                    Some(Array2::eye(2))
                }
            }
            ProblemInstance::new(
                "half",
                Arc::new(Half),
                CompositeTerm::Zero,
                ndarray::array![1.0, 0.0],
            )
            .unwrap()
        };
        let config = base_config();
        let mut state = HarState::init(&p, &config).unwrap();
        match har_step(&mut state, &p, &config).unwrap() {
            HarStep::Iterated(rec) => {
                assert_eq!(rec.sigma_k, 2.0);
                assert!(rec.h_k.abs() < 1e-10);
                assert!(rec.successful);
                assert!(!rec.null_step);
            }
            HarStep::Finished(_) => panic!("should iterate"),
        }
    }

    #[test]
    fn success_flag_matches_classification() {
        let problem = catalog_problem("rosenbrock-2").unwrap();
        let config = SolverConfig {
            h0: 1e-3,
            max_iters: 300,
            ..SolverConfig::default()
        };
        let result = run_har(&problem, &config).unwrap();
        for rec in &result.trace {
            let expected = (config.alpha + 1.0) * rec.m_k >= 2.0 * rec.h_k;
            assert_eq!(rec.successful, expected, "k = {}", rec.k);
        }
        assert_eq!(result.status, RunStatus::GradientTolerance);
    }

    #[test]
    fn cyclic_refresh_forgets_m() {
        // Cyclic(B = 5) at k = 5 refreshes M_5 = max(H0, H_4).
        let mut history = HistoryState::new(1.0);
        let policy = HistoryPolicy::cyclic(5);
        let estimates = [3.0, 9.0, 2.0, 7.0];
        for (i, h) in estimates.iter().enumerate() {
            let _ = history.begin_iteration(policy);
            // M_4 should have accumulated to 9 before the refresh.
            if i == 3 {
                assert_eq!(history.m(), 9.0);
            }
            history.record_estimate(*h, policy);
        }
        let m5 = history.begin_iteration(policy);
        assert_eq!(m5, 7.0); // max(H0, H_4) = max(1, 7), forgetting M_4 = 9
    }

    #[test]
    fn sliding_window_matches_brute_force() {
        let policy = HistoryPolicy::sliding(3);
        let mut history = HistoryState::new(0.5);
        let estimates = [2.0, 8.0, 1.0, 0.1, 0.2, 0.3, 4.0];
        let mut all = Vec::new();
        for (i, h) in estimates.iter().enumerate() {
            let k = i + 1;
            let m = history.begin_iteration(policy);
            let b_k = k.saturating_sub(3).max(1);
            let mut expected = 0.5_f64;
            for j in b_k..k {
                expected = expected.max(all[j - 1]);
            }
            assert_eq!(m, expected, "k = {k}");
            history.record_estimate(*h, policy);
            all.push(*h);
        }
    }

    #[test]
    fn oracle_failure_is_surfaced_with_run_result() {
        // Linear objective inside a fence, NaN outside: with a tiny h0 the
        // barely-regularized step overshoots the fence and the failure is
        // reported as a run status, not an Err.
        struct Fence;
        impl crate::oracles::SmoothOracle for Fence {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, x: &Array1<f64>) -> f64 {
                if x.dot(x) > 4.0 {
                    f64::NAN
                } else {
                    -x[0]
                }
            }
            fn gradient(&self, _x: &Array1<f64>) -> Array1<f64> {
                ndarray::array![-1.0, 0.0]
            }
            fn hessian(&self, _x: &Array1<f64>) -> Option<Array2<f64>> {
                Some(Array2::zeros((2, 2)))
            }
        }
        let problem = crate::oracles::ProblemInstance::new(
            "fence",
            std::sync::Arc::new(Fence),
            crate::oracles::CompositeTerm::Zero,
            ndarray::array![0.0, 0.0],
        )
        .unwrap();
        let config = SolverConfig {
            h0: 1e-9,
            eps_g: 1e-10,
            max_iters: 50,
            ..SolverConfig::default()
        };
        let result = run_har(&problem, &config).unwrap();
        assert_eq!(result.status, RunStatus::OracleFailure);
        // The state before the failing trial is intact.
        assert_eq!(result.final_x, ndarray::array![0.0, 0.0]);
        assert_eq!(result.initial_f, 0.0);
    }

    #[test]
    fn time_limit_stops_the_run() {
        let problem = catalog_problem("rosenbrock-2").unwrap();
        let config = SolverConfig {
            h0: 1e-3,
            max_iters: 100_000,
            time_limit_s: Some(0.0),
            ..SolverConfig::default()
        };
        let result = run_har(&problem, &config).unwrap();
        assert_eq!(result.status, RunStatus::MaxIterations);
        assert!(result.iterations() <= 1);
    }

    #[test]
    fn max_iters_zero_is_empty_trace() {
        let config = SolverConfig {
            max_iters: 0,
            ..base_config()
        };
        let result = run_har(&quadratic(), &config).unwrap();
        assert_eq!(result.status, RunStatus::MaxIterations);
        assert!(result.trace.is_empty());
    }

    #[test]
    fn monotone_f_values() {
        let problem = catalog_problem("rosenbrock-2").unwrap();
        let config = SolverConfig {
            h0: 1e-3,
            max_iters: 300,
            ..SolverConfig::default()
        };
        let result = run_har(&problem, &config).unwrap();
        let mut prev = result.initial_f;
        for rec in &result.trace {
            assert!(rec.f_value <= prev + 1e-12 * prev.abs().max(1.0));
            prev = rec.f_value;
        }
    }

    #[test]
    fn lsar_quadratic_single_trial_per_iteration() {
        let result = run_lsar_baseline(&quadratic(), &base_config()).unwrap();
        assert_eq!(result.status, RunStatus::GradientTolerance);
        // H_k = 0 <= sigma on the first trial of every iteration, so each
        // iteration costs exactly one function evaluation.
        let final_nf = result.counts.n_f;
        assert_eq!(final_nf as usize, 1 + result.iterations());
    }

    #[test]
    fn lsar_quartic_doubles_then_accepts() {
        // At p = 1 a tiny initial sigma makes the first trial step overshoot
        // wildly, forcing several doublings before the decrease condition
        // accepts.
        let problem = catalog_problem("quartic-10").unwrap();
        let config = SolverConfig {
            p: 1,
            h0: 1e-6,
            eps_g: 1e-8,
            max_iters: 400,
            ..SolverConfig::default()
        };
        let result = run_lsar_baseline(&problem, &config).unwrap();
        assert_eq!(result.status, RunStatus::GradientTolerance);
        assert!(result.trace[0].n_f > 2, "n_f = {}", result.trace[0].n_f);
    }

    #[test]
    fn arc_quadratic_shrinks_sigma() {
        // On a quadratic the model is exact up to the regularizer, so
        // rho >= eta2 and sigma halves.
        let result = run_arc_baseline(&quadratic(), &base_config()).unwrap();
        assert_eq!(result.status, RunStatus::GradientTolerance);
        assert!(result.trace.len() >= 2);
        assert!(result.trace[1].sigma_k < result.trace[0].sigma_k);
        for rec in &result.trace {
            assert!(rec.successful);
        }
    }

    #[test]
    fn arc_rejects_ascent_steps_and_doubles_sigma() {
        // Beale with a tiny initial sigma: the first trial overshoots into a
        // region where F increases, so rho < 0, the step is rejected, and
        // sigma grows until a trial passes.
        let problem = catalog_problem("beale").unwrap();
        let config = SolverConfig {
            h0: 1e-3,
            eps_g: 1e-6,
            max_iters: 500,
            ..SolverConfig::default()
        };
        let result = run_arc_baseline(&problem, &config).unwrap();
        let rejected: Vec<&IterationRecord> = result.trace.iter().filter(|r| r.null_step).collect();
        assert!(!rejected.is_empty(), "expected at least one rejection");
        for rec in rejected {
            let next = result.trace.iter().find(|r| r.k == rec.k + 1);
            if let Some(next) = next {
                assert!(
                    next.sigma_k >= 2.0 * rec.sigma_k * (1.0 - 1e-12),
                    "sigma did not grow after the rejection at k = {}",
                    rec.k
                );
            }
        }
        assert_eq!(result.status, RunStatus::GradientTolerance);
    }

    #[test]
    fn arc_rejects_composite() {
        use crate::oracles::CompositeTerm;
        let mut p = quadratic();
        p.psi = CompositeTerm::L1 { weight: 0.1 };
        assert!(matches!(
            run_arc_baseline(&p, &base_config()),
            Err(Error::UnsupportedConfiguration(_))
        ));
    }

    #[test]
    fn p1_logistic_composite_runs() {
        let data = synthetic_logistic(3, 60, 8, 0.8);
        let mut problem = crate::problems::logistic_problem(&data, 1e-3).unwrap();
        problem.psi = crate::oracles::CompositeTerm::L1 { weight: 1e-3 };
        let config = SolverConfig {
            p: 1,
            h0: 1e-3,
            eps_g: 1e-6,
            max_iters: 5000,
            ..SolverConfig::default()
        };
        let result = run_har(&problem, &config).unwrap();
        assert_eq!(result.status, RunStatus::GradientTolerance);
        // Monotone in F throughout.
        let mut prev = result.initial_f;
        for rec in &result.trace {
            assert!(rec.f_value <= prev + 1e-12);
            prev = rec.f_value;
        }
    }

    #[test]
    fn saddle_start_without_second_order_stops_immediately() {
        let problem = catalog_problem("saddle-quartic").unwrap();
        let result = run_har(&problem, &base_config()).unwrap();
        assert_eq!(result.status, RunStatus::GradientTolerance);
        assert_eq!(result.iterations(), 0);
    }

    #[test]
    fn saddle_start_with_second_order_escapes() {
        let problem = catalog_problem("saddle-quartic").unwrap();
        let config = SolverConfig {
            eps_h: Some(1e-4),
            ..base_config()
        };
        let result = run_har(&problem, &config).unwrap();
        assert_eq!(result.status, RunStatus::SecondOrderTolerance);
        assert!((result.final_f + 0.25).abs() < 1e-8);
    }
}
