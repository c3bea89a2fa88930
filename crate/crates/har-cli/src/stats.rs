//! Aggregate statistics over run summaries: shifted geometric means and
//! performance profiles.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

/// Cost assigned to failed runs for every profiled quantity.
pub const FAILURE_SENTINEL: f64 = 20_000.0;

/// The slice of a run summary the aggregators need.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub method: String,
    pub status: String,
    pub solved: bool,
    pub iters: usize,
    pub n_f: u64,
    pub n_g: u64,
    pub n_h: u64,
    pub wall_time_s: f64,
}

/// Shifted geometric mean `exp(mean(log(x_i + shift))) - shift`.
pub fn shifted_geometric_mean(values: &[f64], shift: f64) -> f64 {
    assert!(!values.is_empty());
    let mean = values.iter().map(|&v| (v + shift).ln()).sum::<f64>() / values.len() as f64;
    mean.exp() - shift
}

/// One table row per method: solved count and the shifted geometric means of
/// wall time and evaluation counts, with failed runs contributing the
/// sentinel to every column.
#[derive(Clone, Debug, Serialize)]
pub struct SgmRow {
    pub method: String,
    pub solved: usize,
    pub total: usize,
    pub time_g: f64,
    pub f_evals_g: f64,
    pub g_evals_g: f64,
    pub h_evals_g: f64,
}

pub fn scaled_geometric_means(
    results: &[RunSummary],
    time_shift: f64,
    iter_shift: f64,
) -> Result<Vec<SgmRow>> {
    if results.is_empty() {
        bail!("no results to aggregate");
    }
    let mut methods: Vec<String> = results.iter().map(|r| r.method.clone()).collect();
    methods.sort();
    methods.dedup();

    let mut rows = Vec::new();
    for method in methods {
        let runs: Vec<&RunSummary> = results.iter().filter(|r| r.method == method).collect();
        let take = |f: &dyn Fn(&RunSummary) -> f64| -> Vec<f64> {
            runs.iter()
                .map(|r| if r.solved { f(r) } else { FAILURE_SENTINEL })
                .collect()
        };
        let times = take(&|r| r.wall_time_s);
        let n_f = take(&|r| r.n_f as f64);
        let n_g = take(&|r| r.n_g as f64);
        let n_h = take(&|r| r.n_h as f64);
        rows.push(SgmRow {
            method,
            solved: runs.iter().filter(|r| r.solved).count(),
            total: runs.len(),
            time_g: shifted_geometric_mean(&times, time_shift),
            f_evals_g: shifted_geometric_mean(&n_f, iter_shift),
            g_evals_g: shifted_geometric_mean(&n_g, iter_shift),
            h_evals_g: shifted_geometric_mean(&n_h, iter_shift),
        });
    }
    Ok(rows)
}

/// Which cost a performance profile compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileMetric {
    GradEvals,
    HessEvals,
    WallTime,
}

impl ProfileMetric {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "n_g" | "grad" => ProfileMetric::GradEvals,
            "n_H" | "n_h" | "hess" => ProfileMetric::HessEvals,
            "wall_time" | "time" => ProfileMetric::WallTime,
            other => bail!("unknown profile metric {other:?} (use n_g, n_H, or wall_time)"),
        })
    }

    fn value(&self, run: &RunSummary) -> f64 {
        match self {
            ProfileMetric::GradEvals => run.n_g as f64,
            ProfileMetric::HessEvals => run.n_h as f64,
            ProfileMetric::WallTime => run.wall_time_s,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProfileMetric::GradEvals => "n_g",
            ProfileMetric::HessEvals => "n_H",
            ProfileMetric::WallTime => "wall_time",
        }
    }
}

/// Per-method curves of `(exponent a, fraction of problems solved within
/// 2^a times the best cost)`. Problems no method solved stay in the
/// denominator, so curves may top out below one.
#[derive(Clone, Debug)]
pub struct ProfileTable {
    pub metric: &'static str,
    pub total_problems: usize,
    pub curves: Vec<(String, Vec<(f64, f64)>)>,
}

pub fn performance_profile(results: &[RunSummary], metric: ProfileMetric) -> Result<ProfileTable> {
    let mut methods: Vec<String> = results.iter().map(|r| r.method.clone()).collect();
    methods.sort();
    methods.dedup();
    if methods.len() < 2 {
        bail!("performance profiles need at least two methods");
    }
    let mut problems: Vec<String> = results.iter().map(|r| r.problem.clone()).collect();
    problems.sort();
    problems.dedup();
    let total = problems.len();

    // ratios[m][p] = cost / best cost among solvers of p; infinity if unsolved.
    let mut ratios: Vec<Vec<f64>> = vec![Vec::new(); methods.len()];
    for problem in &problems {
        let runs: Vec<&RunSummary> = results.iter().filter(|r| &r.problem == problem).collect();
        let best = runs
            .iter()
            .filter(|r| r.solved)
            .map(|r| metric.value(r))
            .fold(f64::INFINITY, f64::min)
            .max(1e-12);
        for (mi, method) in methods.iter().enumerate() {
            let run = runs.iter().find(|r| &r.method == method);
            let ratio = match run {
                Some(r) if r.solved && best.is_finite() => metric.value(r).max(1e-12) / best,
                _ => f64::INFINITY,
            };
            ratios[mi].push(ratio);
        }
    }

    // Breakpoints: base-2 exponents of every finite ratio, plus zero.
    let mut exponents: Vec<f64> = ratios
        .iter()
        .flatten()
        .filter(|r| r.is_finite())
        .map(|r| r.log2().max(0.0))
        .collect();
    exponents.push(0.0);
    exponents.sort_by(|a, b| a.partial_cmp(b).unwrap());
    exponents.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);

    let curves = methods
        .iter()
        .enumerate()
        .map(|(mi, method)| {
            let points = exponents
                .iter()
                .map(|&a| {
                    let threshold = 2.0_f64.powf(a) * (1.0 + 1e-12);
                    let count = ratios[mi].iter().filter(|&&r| r <= threshold).count();
                    (a, count as f64 / total as f64)
                })
                .collect();
            (method.clone(), points)
        })
        .collect();

    Ok(ProfileTable {
        metric: metric.name(),
        total_problems: total,
        curves,
    })
}

impl ProfileTable {
    /// Tab-separated `method exponent fraction` rows for external plotting.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("method\texponent\tfraction\n");
        for (method, points) in &self.curves {
            for (a, fraction) in points {
                out.push_str(&format!("{method}\t{a:?}\t{fraction:?}\n"));
            }
        }
        out
    }
}
