//! Matrix execution and on-disk artifacts: one trace CSV and one summary
//! JSON per run, plus a single-writer index over the whole matrix.
//!
//! Files are written atomically (temp file + rename). All numeric CSV
//! columns use the shortest round-trip float encoding, so identical runs
//! produce identical bytes except for the wall-time column.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use har_core::accel::run_har_a;
use har_core::solvers::{run_arc_baseline, run_har, run_lsar_baseline, RunResult};

use crate::runspec::{Expansion, Method, RunCell};
use crate::stats::RunSummary;

/// Outcome of one cell: a completed run (any status) or a setup error.
pub struct CellOutcome {
    pub id: String,
    pub problem: String,
    pub method: String,
    pub result: Option<RunResult>,
    pub error: Option<String>,
    pub trace_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
}

pub const TRACE_HEADER: &str =
    "k,F,stationarity,H_k,M_k,sigma_k,step_norm,successful,null_step,n_f,n_g,n_H,wall_time_s";

/// Renders the per-iteration trace; row count is iterations + 1 header.
pub fn trace_csv(result: &RunResult) -> String {
    let mut out = String::with_capacity(64 * (result.trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &result.trace {
        out.push_str(&format!(
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{},{},{},{},{},{:?}\n",
            r.k,
            r.f_value,
            r.stationarity,
            r.h_k,
            r.m_k,
            r.sigma_k,
            r.step_norm,
            r.successful,
            r.null_step,
            r.n_f,
            r.n_g,
            r.n_h,
            r.wall_time_s,
        ));
    }
    out
}

pub fn summary_json(problem: &str, result: &RunResult) -> serde_json::Value {
    json!({
        "problem": problem,
        "method": result.method,
        "status": format!("{:?}", result.status),
        "solved": result.status.solved(),
        "iters": result.trace.len(),
        "n_f": result.counts.n_f,
        "n_g": result.counts.n_g,
        "n_H": result.counts.n_h,
        "final_F": result.final_f,
        "final_stationarity": result.final_stationarity,
        "unsuccessful_count": result.unsuccessful_count,
        "measured_h_max": result.measured_h_max,
        "wall_time_s": result.wall_time_s,
        "config": result.config,
    })
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut file =
            fs::File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?;
        file.write_all(contents.as_bytes())?;
        file.sync_all().ok();
    }
    fs::rename(&tmp, path).with_context(|| format!("cannot finalize {}", path.display()))?;
    Ok(())
}

/// Dispatches one cell to its driver.
pub fn execute_cell(cell: &RunCell) -> har_core::Result<RunResult> {
    match &cell.method {
        Method::Har(_) => run_har(&cell.problem, &cell.config),
        Method::HarA => run_har_a(&cell.problem, &cell.config),
        Method::Lsar => run_lsar_baseline(&cell.problem, &cell.config),
        Method::Arc => run_arc_baseline(&cell.problem, &cell.config),
    }
}

/// Runs every cell, writing artifacts under `out_dir/<cell id>/`. Setup
/// failures are recorded and the matrix continues; the index is written
/// last, by this single writer.
pub fn run_matrix(expansion: &Expansion, out_dir: &Path) -> Result<Vec<CellOutcome>> {
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut outcomes = Vec::new();
    for cell in &expansion.cells {
        if let Some(warning) = cell.config.budget_warning() {
            eprintln!("warning [{}]: {warning}", cell.id);
        }
        let outcome = match execute_cell(cell) {
            Ok(result) => {
                let cell_dir = out_dir.join(&cell.id);
                fs::create_dir_all(&cell_dir)?;
                let trace_path = cell_dir.join("trace.csv");
                let summary_path = cell_dir.join("summary.json");
                write_atomic(&trace_path, &trace_csv(&result))?;
                write_atomic(
                    &summary_path,
                    &serde_json::to_string_pretty(&summary_json(&cell.problem.name, &result))?,
                )?;
                CellOutcome {
                    id: cell.id.clone(),
                    problem: cell.problem.name.clone(),
                    method: cell.method.label(),
                    result: Some(result),
                    error: None,
                    trace_path: Some(trace_path),
                    summary_path: Some(summary_path),
                }
            }
            Err(e) => CellOutcome {
                id: cell.id.clone(),
                problem: cell.problem.name.clone(),
                method: cell.method.label(),
                result: None,
                error: Some(e.to_string()),
                trace_path: None,
                summary_path: None,
            },
        };
        outcomes.push(outcome);
    }

    let index = json!({
        "runs": outcomes.iter().map(|o| {
            json!({
                "id": o.id,
                "problem": o.problem,
                "method": o.method,
                "status": o.result.as_ref().map(|r| format!("{:?}", r.status)),
                "solved": o.result.as_ref().map(|r| r.status.solved()).unwrap_or(false),
                "error": o.error,
                "trace": o.trace_path.as_ref().map(|p| p.display().to_string()),
                "summary": o.summary_path.as_ref().map(|p| p.display().to_string()),
            })
        }).collect::<Vec<_>>(),
        "skipped_problems": expansion.skipped.iter().map(|s| {
            json!({ "problem": s.label, "error": s.error })
        }).collect::<Vec<_>>(),
    });
    write_atomic(
        &out_dir.join("index.json"),
        &serde_json::to_string_pretty(&index)?,
    )?;
    Ok(outcomes)
}

/// Loads all summaries below `out_dir` (one directory level per run).
pub fn load_summaries(out_dir: &Path) -> Result<Vec<RunSummary>> {
    let mut summaries = Vec::new();
    if !out_dir.is_dir() {
        return Ok(summaries);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(out_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    for dir in dirs {
        let path = dir.join("summary.json");
        if !path.is_file() {
            continue;
        }
        let text = fs::read_to_string(&path)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .with_context(|| format!("invalid summary {}", path.display()))?;
        summaries.push(RunSummary {
            problem: value["problem"].as_str().unwrap_or_default().to_string(),
            method: value["method"].as_str().unwrap_or_default().to_string(),
            status: value["status"].as_str().unwrap_or_default().to_string(),
            solved: value["solved"].as_bool().unwrap_or(false),
            iters: value["iters"].as_u64().unwrap_or(0) as usize,
            n_f: value["n_f"].as_u64().unwrap_or(0),
            n_g: value["n_g"].as_u64().unwrap_or(0),
            n_h: value["n_H"].as_u64().unwrap_or(0),
            wall_time_s: value["wall_time_s"].as_f64().unwrap_or(0.0),
        });
    }
    Ok(summaries)
}
