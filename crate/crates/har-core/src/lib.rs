//! History-aware adaptive regularization (HAR) solvers.
//!
//! This crate implements a family of adaptive regularization methods of order
//! p ∈ {1, 2} for composite problems `F = f + ψ`. The regularization parameter
//! is chosen from a history of local Lipschitz estimates rather than by an
//! inner line search or a ratio test:
//!
//! - [`solvers::run_har`] — full history, cyclic refresh, or sliding window,
//!   selected by [`solvers::HistoryPolicy`];
//! - [`accel::run_har_a`] — an accelerated four-sequence variant for smooth
//!   convex objectives, with estimating-sequence diagnostics;
//! - [`solvers::run_lsar_baseline`] and [`solvers::run_arc_baseline`] —
//!   sigma-doubling and ratio-test baselines for comparison.
//!
//! The p = 2 step minimizes a cubic-regularized quadratic model exactly via a
//! safeguarded secular-equation solver ([`subproblem::solve_p2_cubic`]) with a
//! machine-checkable global-optimality certificate. A built-in problem suite
//! ([`problems`]) provides regularized logistic regression (with a LIBSVM-format
//! reader and a synthetic generator) and classic smooth test functions.
//!
//! # Example
//!
//! ```
//! use har_core::problems::catalog_problem;
//! use har_core::solvers::{run_har, HistoryPolicy, SolverConfig};
//!
//! let problem = catalog_problem("rosenbrock-2").unwrap();
//! let config = SolverConfig {
//!     policy: HistoryPolicy::sliding(5),
//!     eps_g: 1e-8,
//!     max_iters: 200,
//!     ..SolverConfig::default()
//! };
//! let result = run_har(&problem, &config).unwrap();
//! assert!(result.status.solved());
//! assert!(result.final_stationarity <= 1e-8);
//! ```

pub mod accel;
mod error;
pub mod linalg;
pub mod oracles;
pub mod problems;
pub mod solvers;
pub mod subproblem;
pub mod taylor;

pub use error::{Error, Result};

/// Factorial as a float; only small arguments are ever needed (p ≤ 2).
pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).product::<usize>() as f64
}
