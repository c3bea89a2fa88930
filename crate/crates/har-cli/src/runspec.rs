//! Run-spec files: a flat TOML schema expanding deterministically into a
//! (problem x solver x repetition) matrix.
//!
//! ```toml
//! seed = 42          # optional; synthetic problems without a seed use it
//! repetitions = 1    # optional
//! out = "results"    # optional default output directory
//!
//! [defaults]         # optional solver-config overrides for all cells
//! p = 2
//! alpha = 2.0
//! h0 = 1e-3
//! eps_g = 1e-8
//! max_iters = 500
//!
//! [[problems]]
//! catalog = "rosenbrock-2"
//!
//! [[problems]]
//! libsvm = "data/a4a.txt"
//! gamma = 1e-5
//!
//! [[problems]]
//! gamma = 1e-5
//! [problems.synthetic]
//! seed = 7
//! samples = 200
//! dim = 20
//! separability = 0.8
//!
//! [[solvers]]
//! method = "har-s"   # har | har-c | har-s | har-a | lsar | arc
//! budget = 5
//! alpha = 2.0        # same override keys as [defaults]
//! ```

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use har_core::oracles::ProblemInstance;
use har_core::problems::{catalog_problem, logistic_problem, parse_libsvm, synthetic_logistic};
use har_core::solvers::{Budget, HistoryPolicy, SolverConfig};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub p: Option<usize>,
    pub alpha: Option<f64>,
    pub h0: Option<f64>,
    pub eps_g: Option<f64>,
    pub eps_h: Option<f64>,
    pub eps_f: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol_sub: Option<f64>,
    pub step_floor: Option<f64>,
    pub lipschitz_upper_hint: Option<f64>,
    pub time_limit_s: Option<f64>,
}

impl SolverOverrides {
    fn apply(&self, config: &mut SolverConfig) {
        if let Some(v) = self.p {
            config.p = v;
        }
        if let Some(v) = self.alpha {
            config.alpha = v;
        }
        if let Some(v) = self.h0 {
            config.h0 = v;
        }
        if let Some(v) = self.eps_g {
            config.eps_g = v;
        }
        if let Some(v) = self.eps_h {
            config.eps_h = Some(v);
        }
        if let Some(v) = self.eps_f {
            config.eps_f = Some(v);
        }
        if let Some(v) = self.max_iters {
            config.max_iters = v;
        }
        if let Some(v) = self.tol_sub {
            config.tol_sub = v;
        }
        if let Some(v) = self.step_floor {
            config.step_floor = v;
        }
        if let Some(v) = self.lipschitz_upper_hint {
            config.lipschitz_upper_hint = Some(v);
        }
        if let Some(v) = self.time_limit_s {
            config.time_limit_s = Some(v);
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: Option<u64>,
    pub samples: usize,
    pub dim: usize,
    #[serde(default = "default_separability")]
    pub separability: f64,
}

fn default_separability() -> f64 {
    0.8
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub catalog: Option<String>,
    pub libsvm: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    /// Ridge weight for the logistic problems.
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct SolverSpec {
    pub method: String,
    pub budget: Option<usize>,
    #[serde(flatten)]
    pub overrides: SolverOverrides,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpecFile {
    pub seed: Option<u64>,
    pub repetitions: Option<usize>,
    pub out: Option<PathBuf>,
    pub defaults: Option<SolverOverrides>,
    #[serde(default)]
    pub problems: Vec<ProblemSpec>,
    #[serde(default)]
    pub solvers: Vec<SolverSpec>,
}

/// Which driver a cell invokes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Method {
    Har(HistoryPolicy),
    HarA,
    Lsar,
    Arc,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Har(HistoryPolicy::Full) => "har".into(),
            Method::Har(HistoryPolicy::Cyclic(b)) => format!("har-c({b})"),
            Method::Har(HistoryPolicy::Sliding(b)) => format!("har-s({b})"),
            Method::HarA => "har-a".into(),
            Method::Lsar => "lsar".into(),
            Method::Arc => "arc".into(),
        }
    }
}

/// One fully-resolved run.
pub struct RunCell {
    pub id: String,
    pub problem: ProblemInstance,
    pub method: Method,
    pub config: SolverConfig,
    pub repetition: usize,
}

pub fn parse_spec_str(text: &str) -> Result<RunSpecFile> {
    let spec: RunSpecFile = toml::from_str(text).context("invalid run spec")?;
    if spec.problems.is_empty() {
        bail!("run spec declares no [[problems]]");
    }
    if spec.solvers.is_empty() {
        bail!("run spec declares no [[solvers]]");
    }
    Ok(spec)
}

pub fn load_spec(path: &Path) -> Result<RunSpecFile> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read spec file {}", path.display()))?;
    parse_spec_str(&text)
}

fn resolve_problem(spec: &ProblemSpec, global_seed: u64) -> Result<ProblemInstance> {
    let gamma = spec.gamma.unwrap_or(1e-5);
    let selected = [
        spec.catalog.is_some(),
        spec.libsvm.is_some(),
        spec.synthetic.is_some(),
    ]
    .iter()
    .filter(|&&s| s)
    .count();
    if selected != 1 {
        bail!("each [[problems]] entry needs exactly one of catalog/libsvm/synthetic");
    }
    if let Some(name) = &spec.catalog {
        return catalog_problem(name).ok_or_else(|| anyhow!("unknown catalog problem {name:?}"));
    }
    if let Some(path) = &spec.libsvm {
        let file = fs::File::open(path)
            .with_context(|| format!("cannot open libsvm file {}", path.display()))?;
        let data = parse_libsvm(BufReader::new(file))
            .with_context(|| format!("cannot parse {}", path.display()))?;
        let mut problem = logistic_problem(&data, gamma)?;
        problem.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or(problem.name);
        return Ok(problem);
    }
    let synth = spec.synthetic.as_ref().expect("checked above");
    let seed = synth.seed.unwrap_or(global_seed);
    let data = synthetic_logistic(seed, synth.samples, synth.dim, synth.separability);
    let mut problem = logistic_problem(&data, gamma)?;
    problem.name = format!("synthetic-s{}-m{}-n{}", seed, synth.samples, synth.dim);
    Ok(problem)
}

fn resolve_method(spec: &SolverSpec) -> Result<Method> {
    let budget = spec
        .budget
        .map(|b| {
            if b == 0 {
                bail!("budget must be positive (omit it for an unbounded history)")
            } else {
                Ok(Budget::Finite(b))
            }
        })
        .transpose()?
        .unwrap_or(Budget::Infinite);
    Ok(match spec.method.as_str() {
        "har" => Method::Har(HistoryPolicy::Full),
        "har-c" => Method::Har(HistoryPolicy::Cyclic(budget)),
        "har-s" => Method::Har(HistoryPolicy::Sliding(budget)),
        "har-a" => Method::HarA,
        "lsar" => Method::Lsar,
        "arc" => Method::Arc,
        other => bail!("unknown solver method {other:?}"),
    })
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// A problem entry that could not be resolved; the rest of the matrix
/// proceeds without it.
#[derive(Clone, Debug)]
pub struct SkippedProblem {
    pub label: String,
    pub error: String,
}

/// The resolved run matrix.
pub struct Expansion {
    pub cells: Vec<RunCell>,
    pub skipped: Vec<SkippedProblem>,
}

fn problem_label(spec: &ProblemSpec) -> String {
    if let Some(name) = &spec.catalog {
        return format!("catalog:{name}");
    }
    if let Some(path) = &spec.libsvm {
        return format!("libsvm:{}", path.display());
    }
    "synthetic".to_string()
}

/// Expands the spec into concrete cells. The expansion is a pure function of
/// the spec contents and the seed. Malformed solver entries are hard errors;
/// unresolvable problems (missing files, unknown catalog names) are recorded
/// as skips so the rest of the matrix still runs.
pub fn expand(spec: &RunSpecFile, seed_override: Option<u64>) -> Result<Expansion> {
    let global_seed = seed_override.or(spec.seed).unwrap_or(42);
    let repetitions = spec.repetitions.unwrap_or(1).max(1);
    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for problem_spec in &spec.problems {
        let problem = match resolve_problem(problem_spec, global_seed) {
            Ok(problem) => problem,
            Err(e) => {
                skipped.push(SkippedProblem {
                    label: problem_label(problem_spec),
                    error: format!("{e:#}"),
                });
                continue;
            }
        };
        for solver_spec in &spec.solvers {
            let method = resolve_method(solver_spec)?;
            let mut config = SolverConfig::default();
            if let Some(defaults) = &spec.defaults {
                defaults.apply(&mut config);
            }
            solver_spec.overrides.apply(&mut config);
            // Benchmark runs default to a five-minute wall-clock cap.
            config.time_limit_s = config.time_limit_s.or(Some(300.0));
            if let Method::Har(policy) = &method {
                config.policy = *policy;
            }
            for rep in 0..repetitions {
                let mut id = format!("{}__{}", problem.name, method.label());
                if repetitions > 1 {
                    id.push_str(&format!("__r{rep}"));
                }
                cells.push(RunCell {
                    id: sanitize(&id),
                    problem: problem.clone(),
                    method: method.clone(),
                    config: config.clone(),
                    repetition: rep,
                });
            }
        }
    }
    Ok(Expansion { cells, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: &str = r#"
        seed = 42
        repetitions = 2

        [defaults]
        alpha = 2.0
        h0 = 1e-3
        eps_g = 1e-8
        max_iters = 200

        [[problems]]
        catalog = "rosenbrock-2"

        [[problems]]
        gamma = 1e-5
        [problems.synthetic]
        samples = 50
        dim = 5

        [[solvers]]
        method = "har-s"
        budget = 5

        [[solvers]]
        method = "arc"
        alpha = 3.0
    "#;

    #[test]
    fn expansion_is_deterministic() {
        let spec = parse_spec_str(SPEC).unwrap();
        let a = expand(&spec, None).unwrap().cells;
        let b = expand(&spec, None).unwrap().cells;
        assert_eq!(a.len(), 2 * 2 * 2);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.config, y.config);
        }
        // Per-solver override only touches its own cells.
        let arc_cell = a.iter().find(|c| c.id.contains("arc")).unwrap();
        assert_eq!(arc_cell.config.alpha, 3.0);
        let har_cell = a.iter().find(|c| c.id.contains("har-s")).unwrap();
        assert_eq!(har_cell.config.alpha, 2.0);
        assert_eq!(har_cell.config.policy, HistoryPolicy::sliding(5));
    }

    #[test]
    fn missing_sections_are_rejected() {
        assert!(parse_spec_str("seed = 1").is_err());
    }

    #[test]
    fn unknown_method_is_rejected() {
        let text = r#"
            [[problems]]
            catalog = "beale"
            [[solvers]]
            method = "sgd"
        "#;
        let spec = parse_spec_str(text).unwrap();
        assert!(expand(&spec, None).is_err());
    }

    #[test]
    fn unresolvable_problem_is_skipped_not_fatal() {
        let text = r#"
            [[problems]]
            catalog = "no-such-function"
            [[problems]]
            catalog = "beale"
            [[solvers]]
            method = "har"
        "#;
        let spec = parse_spec_str(text).unwrap();
        let expansion = expand(&spec, None).unwrap();
        assert_eq!(expansion.cells.len(), 1);
        assert_eq!(expansion.skipped.len(), 1);
        assert!(expansion.skipped[0].label.contains("no-such-function"));
    }
}
