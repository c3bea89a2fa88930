//! The `har` command line: `run`, `compare`, `profile`, `check`.
//!
//! Exit codes: 0 success, 1 usage error (bad flags, missing files, empty
//! result sets), 2 internal failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use ndarray::Array1;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use har_core::problems::{
    finite_difference_check, logistic_problem, synthetic_logistic, test_function_catalog,
};
use har_core::subproblem::{certify_global, solve_p2_cubic};

use crate::matrix::{load_summaries, run_matrix};
use crate::runspec::{expand, load_spec};
use crate::stats::{performance_profile, scaled_geometric_means, ProfileMetric};

#[derive(Parser)]
#[command(
    name = "har",
    about = "Benchmark driver for history-aware adaptive regularization solvers",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run-spec matrix and write per-run traces and summaries.
    Run {
        /// TOML run spec (see the repository README for the schema).
        #[arg(long)]
        spec: PathBuf,
        /// Output directory; overrides the spec's `out` entry.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Global seed for synthetic problems without an explicit seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Aggregate summaries into a scaled-geometric-mean table.
    Compare {
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Shift applied to wall times (seconds).
        #[arg(long, default_value_t = 1.0)]
        time_shift: f64,
        /// Shift applied to evaluation counts.
        #[arg(long, default_value_t = 50.0)]
        iter_shift: f64,
    },
    /// Emit performance-profile curves as TSV.
    Profile {
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Cost to compare: n_g, n_H, or wall_time.
        #[arg(long, default_value = "n_H")]
        metric: String,
    },
    /// Run the built-in derivative and subproblem self-tests.
    Check {
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

/// Parses `argv` and executes; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { spec, out, seed } => cmd_run(&spec, out, seed),
        Command::Compare {
            out,
            time_shift,
            iter_shift,
        } => cmd_compare(&out, time_shift, iter_shift),
        Command::Profile { out, metric } => cmd_profile(&out, &metric),
        Command::Check { seed } => Ok(cmd_check(seed)),
    }
}

fn cmd_run(spec_path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<i32> {
    if !spec_path.is_file() {
        eprintln!("error: spec file {} does not exist", spec_path.display());
        return Ok(1);
    }
    let spec = match load_spec(spec_path) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(1);
        }
    };
    let out_dir = out
        .or(spec.out.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let expansion = match expand(&spec, seed) {
        Ok(expansion) => expansion,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(1);
        }
    };
    for skip in &expansion.skipped {
        println!("  {:40} SKIPPED: {}", skip.label, skip.error);
    }
    println!(
        "running {} cells into {}",
        expansion.cells.len(),
        out_dir.display()
    );
    let outcomes = run_matrix(&expansion, &out_dir)?;
    let mut failures = 0usize;
    for outcome in &outcomes {
        match (&outcome.result, &outcome.error) {
            (Some(result), _) => {
                println!(
                    "  {:40} {:?} iters={} n_H={} ({:.3}s)",
                    outcome.id,
                    result.status,
                    result.trace.len(),
                    result.counts.n_h,
                    result.wall_time_s
                );
                if !result.status.solved() {
                    failures += 1;
                }
            }
            (None, Some(error)) => {
                println!("  {:40} SKIPPED: {error}", outcome.id);
                failures += 1;
            }
            _ => unreachable!(),
        }
    }
    println!(
        "done: {}/{} solved; index at {}",
        outcomes.len() - failures,
        outcomes.len(),
        out_dir.join("index.json").display()
    );
    Ok(0)
}

fn cmd_compare(out: &Path, time_shift: f64, iter_shift: f64) -> Result<i32> {
    let summaries = load_summaries(out)?;
    if summaries.is_empty() {
        eprintln!("error: no results found under {}", out.display());
        return Ok(1);
    }
    let rows = scaled_geometric_means(&summaries, time_shift, iter_shift)?;
    println!(
        "{:<14} {:>6} {:>10} {:>10} {:>10} {:>10}",
        "method", "K", "t_G", "kf_G", "kg_G", "kH_G"
    );
    let mut csv = String::from("method,solved,total,time_g,f_evals_g,g_evals_g,h_evals_g\n");
    for row in &rows {
        println!(
            "{:<14} {:>3}/{:<3} {:>10.3} {:>10.2} {:>10.2} {:>10.2}",
            row.method,
            row.solved,
            row.total,
            row.time_g,
            row.f_evals_g,
            row.g_evals_g,
            row.h_evals_g
        );
        csv.push_str(&format!(
            "{},{},{},{:?},{:?},{:?},{:?}\n",
            row.method,
            row.solved,
            row.total,
            row.time_g,
            row.f_evals_g,
            row.g_evals_g,
            row.h_evals_g
        ));
    }
    std::fs::write(out.join("sgm.csv"), csv)?;
    println!("wrote {}", out.join("sgm.csv").display());
    Ok(0)
}

fn cmd_profile(out: &Path, metric: &str) -> Result<i32> {
    let metric = match ProfileMetric::parse(metric) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(1);
        }
    };
    let summaries = load_summaries(out)?;
    if summaries.is_empty() {
        eprintln!("error: no results found under {}", out.display());
        return Ok(1);
    }
    let table = performance_profile(&summaries, metric)?;
    let tsv = table.to_tsv();
    print!("{tsv}");
    let path = out.join(format!("profile_{}.tsv", table.metric));
    std::fs::write(&path, tsv)?;
    eprintln!("wrote {}", path.display());
    Ok(0)
}

/// Finite-difference checks over the whole catalog plus a synthetic logistic
/// instance, and optimality certificates over random cubic subproblems.
fn cmd_check(seed: u64) -> i32 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0usize;

    println!("derivative checks (20 random points each, tolerance 1e-5):");
    let mut problems: Vec<_> = test_function_catalog()
        .iter()
        .map(|f| f.instance())
        .collect();
    let data = synthetic_logistic(seed, 80, 10, 0.8);
    problems.push(logistic_problem(&data, 1e-5).expect("valid synthetic data"));
    for problem in &problems {
        let mut worst_g = 0.0_f64;
        let mut worst_h = 0.0_f64;
        for _ in 0..20 {
            let x = Array1::from_iter(
                (0..problem.dim).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)),
            );
            let (ge, he) = finite_difference_check(problem, &x, 1e-5);
            worst_g = worst_g.max(ge);
            worst_h = worst_h.max(he.unwrap_or(0.0));
        }
        let ok = worst_g <= 1e-5 && worst_h <= 1e-5;
        if !ok {
            failures += 1;
        }
        println!(
            "  {} {:24} grad={:.2e} hess={:.2e}",
            if ok { "ok  " } else { "FAIL" },
            problem.name,
            worst_g,
            worst_h
        );
    }

    println!("cubic subproblem certificates (40 random instances):");
    let mut worst_residual = 0.0_f64;
    let mut certified = 0usize;
    for trial in 0..40 {
        let n = 1 + trial % 2;
        let g = Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)));
        let mut h = ndarray::Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.sample(rand_distr::StandardNormal);
                h[[i, j]] = v;
                h[[j, i]] = v;
            }
        }
        let sigma = 0.5 + rng.gen::<f64>() * 3.0;
        match solve_p2_cubic(&g, &h, sigma, 1e-10) {
            Ok(res) => {
                let cert = certify_global(&res, &g, &h, sigma, 1e-8);
                worst_residual = worst_residual.max(cert.residual);
                if cert.pass {
                    certified += 1;
                } else {
                    failures += 1;
                    println!("  FAIL instance {trial}: {cert:?}");
                }
            }
            Err(e) => {
                failures += 1;
                println!("  FAIL instance {trial}: {e}");
            }
        }
    }
    println!("  certified {certified}/40, worst residual {worst_residual:.2e}");

    if failures == 0 {
        println!("self-test passed");
        0
    } else {
        eprintln!("self-test FAILED ({failures} problems)");
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_flag_is_usage_error() {
        let code = cli_main(["har", "run", "--bogus"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn missing_spec_is_usage_error() {
        let code = cli_main(["har", "run", "--spec", "/nonexistent/missing.toml"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn profile_without_results_is_usage_error() {
        let dir = std::env::temp_dir().join("har-cli-empty-results");
        let _ = std::fs::remove_dir_all(&dir);
        let code = cli_main([
            "har",
            "profile",
            "--out",
            dir.to_str().unwrap(),
            "--metric",
            "n_H",
        ]);
        assert_eq!(code, 1);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(cli_main(["har", "--help"]), 0);
    }
}
