//! Command-line front end: argument model, dispatch, exit codes and the
//! JSON/CSV result documents.
//!
//! | exit | meaning |
//! |------|---------|
//! | 0 | success, result written |
//! | 1 | hypothesis `λ∫f < 0` (or `λ > 0` for `bracket`) violated |
//! | 2 | numerical failure: no convergence, degree mismatch, failed verification |
//! | 3 | I/O, parse or argument error |

mod format;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::degree::{global_degree_for, DegreeError, DegreeReport};
use crate::estimates::{check_bound, compute_bounds, AprioriBounds, EstimateError, ProblemData};
use crate::graph::{Exponent, GraphError, VertexFunction};
use crate::solvers::{
    construct_bracket, eq33_residual, family_residual, mass_identity_error, solve_csh_detailed,
    stage_epsilon, Bracket, Family, MonotoneAnchor, SolveError, SolveReport, SolverConfig,
};

pub use format::{
    parse_function, parse_function_str, parse_graph, parse_graph_str, serialize_function,
    serialize_graph, ParseError,
};

/// Environment variable that replaces the default seed.
pub const SEED_ENV: &str = "GRAPH_CSH_SEED";

/// Tolerance of the mass identity in `verify`.
pub const MASS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Success,
    HypothesisViolation,
    NumericalFailure,
    InputError,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::HypothesisViolation => 1,
            ExitStatus::NumericalFailure => 2,
            ExitStatus::InputError => 3,
        }
    }
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    fn new(status: ExitStatus, message: impl Into<String>) -> Self {
        CliError {
            status,
            message: message.into(),
        }
    }

    fn input(message: impl Into<String>) -> Self {
        Self::new(ExitStatus::InputError, message)
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::input(e.to_string())
    }
}

fn graph_status(e: &GraphError) -> ExitStatus {
    match e {
        GraphError::PoincareNotConverged { .. } => ExitStatus::NumericalFailure,
        _ => ExitStatus::InputError,
    }
}

fn estimate_status(e: &EstimateError) -> ExitStatus {
    match e {
        EstimateError::HypothesisFails { .. } => ExitStatus::HypothesisViolation,
        EstimateError::InvalidLambda(_) => ExitStatus::InputError,
        EstimateError::Graph(g) => graph_status(g),
    }
}

fn solve_status(e: &SolveError) -> ExitStatus {
    match e {
        _ if e.is_hypothesis_violation() => ExitStatus::HypothesisViolation,
        SolveError::Graph(g) => graph_status(g),
        SolveError::Estimate(est) => estimate_status(est),
        SolveError::InvalidConfig(_) => ExitStatus::InputError,
        SolveError::Stage { source, .. } => solve_status(source),
        _ => ExitStatus::NumericalFailure,
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        CliError::new(estimate_status(&e), e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        CliError::new(solve_status(&e), e.to_string())
    }
}

impl From<DegreeError> for CliError {
    fn from(e: DegreeError) -> Self {
        let status = match &e {
            DegreeError::Graph(g) => graph_status(g),
            DegreeError::Estimate(est) => estimate_status(est),
            DegreeError::Solve(s) => solve_status(s),
            DegreeError::RadiusTooSmall { .. } => ExitStatus::InputError,
            DegreeError::NonRegularMatrix { .. } | DegreeError::NonRegularSolution { .. } => {
                ExitStatus::NumericalFailure
            }
        };
        CliError::new(status, e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "graph-csh",
    version,
    about = "Chern-Simons Higgs equation Δ_p u = λe^u(e^u - 1) + f on a connected finite graph"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// A priori bounds and the small-ε threshold.
    Bounds(CommonArgs),
    /// Solve the equation by continuation from the small-ε problem.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write the residual trace as CSV to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Brouwer degree of F(·, σ) = -Δ_p u + λe^u(e^u - σ) + f on a ball.
    Degree {
        #[command(flatten)]
        common: CommonArgs,
        /// Ball radius (default: the a priori radius R0).
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
    },
    /// Re-check a solution against residual, bounds and mass identity.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Solution: file path, inline JSON array, `const:c` or a number.
        #[arg(long, allow_hyphen_values = true)]
        solution: String,
        #[arg(long, value_enum, default_value_t = Equation::Csh)]
        equation: Equation,
        /// Accept data violating λ∫f < 0 (residual check only).
        #[arg(long)]
        relaxed: bool,
    },
    /// Ordered lower/upper solution pair of the small-ε problem (λ > 0).
    Bracket(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Graph file: `n m`, then m lines `i j`.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: f64,
    /// Source term: file path, inline JSON array, `const:c` or a number.
    #[arg(long = "f", allow_hyphen_values = true)]
    pub f: String,
    #[arg(long)]
    pub p: f64,
    /// Small-ε stage parameter (default eps0 / 2).
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the result here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long)]
    pub residual_tol: Option<f64>,
    #[arg(long)]
    pub max_outer_iters: Option<usize>,
    #[arg(long)]
    pub max_inner_iters: Option<usize>,
    #[arg(long)]
    pub inner_tol: Option<f64>,
    #[arg(long)]
    pub line_search_shrink: Option<f64>,
    #[arg(long)]
    pub multistart_count: Option<usize>,
    /// Random seed (default: $GRAPH_CSH_SEED, else 0).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub homotopy_steps: Option<usize>,
    #[arg(long, value_enum)]
    pub monotone_anchor: Option<Anchor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Fixed,
    Reanchor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    /// Δ_p u = λe^u(e^u - 1) + f
    Csh,
    /// Δ_p u = λe^{2u} + εf
    SmallEps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Bounds,
    Solve,
    Degree,
    Verify,
    Bracket,
}

/// Validated run description; echoed into every result document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub graph_path: PathBuf,
    pub f_spec: String,
    pub lambda: f64,
    pub p: f64,
    pub epsilon_override: Option<f64>,
    pub solver: SolverConfig,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution_spec: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equation: Option<Equation>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub relaxed: bool,
}

impl RunConfig {
    /// Builds and validates the configuration. `env_seed` is the value of
    /// [`SEED_ENV`], used when `--seed` is absent.
    pub fn from_cli(cli: Cli, env_seed: Option<&str>) -> Result<RunConfig, CliError> {
        let mut trace_path = None;
        let mut radius = None;
        let mut sigma = None;
        let mut solution_spec = None;
        let mut equation = None;
        let mut relaxed = false;
        let (command, common) = match cli.command {
            CommandArgs::Bounds(c) => (Command::Bounds, c),
            CommandArgs::Solve { common, trace } => {
                trace_path = trace;
                (Command::Solve, common)
            }
            CommandArgs::Degree {
                common,
                radius: r,
                sigma: s,
            } => {
                radius = r;
                sigma = Some(s);
                (Command::Degree, common)
            }
            CommandArgs::Verify {
                common,
                solution,
                equation: e,
                relaxed: rel,
            } => {
                solution_spec = Some(solution);
                equation = Some(e);
                relaxed = rel;
                (Command::Verify, common)
            }
            CommandArgs::Bracket(c) => (Command::Bracket, c),
        };
        let config = RunConfig {
            command,
            graph_path: common.graph,
            f_spec: common.f,
            lambda: common.lambda,
            p: common.p,
            epsilon_override: common.epsilon,
            solver: solver_config(&common.solver, common.epsilon, env_seed)?,
            output_path: common.output,
            format: common.format,
            trace_path,
            radius,
            sigma,
            solution_spec,
            equation,
            relaxed,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        Exponent::new(self.p).map_err(|e| CliError::input(e.to_string()))?;
        if !(self.lambda.is_finite() && self.lambda != 0.0) {
            return Err(CliError::input(
                EstimateError::InvalidLambda(self.lambda).to_string(),
            ));
        }
        self.solver.validate()?;
        if let Some(sigma) = self.sigma {
            if !(0.0..=1.0).contains(&sigma) {
                return Err(CliError::input(format!(
                    "sigma must lie in [0, 1], got {sigma}"
                )));
            }
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(CliError::input(format!("radius must be > 0, got {r}")));
            }
        }
        Ok(())
    }
}

fn solver_config(
    args: &SolverArgs,
    epsilon: Option<f64>,
    env_seed: Option<&str>,
) -> Result<SolverConfig, CliError> {
    let mut cfg = SolverConfig::default();
    if let Some(s) = env_seed {
        cfg.seed = s.trim().parse().map_err(|_| {
            CliError::input(format!("{SEED_ENV} must be an unsigned integer, got {s:?}"))
        })?;
    }
    macro_rules! take {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field { cfg.$field = v; })*
        };
    }
    take!(
        residual_tol,
        max_outer_iters,
        max_inner_iters,
        inner_tol,
        line_search_shrink,
        multistart_count,
        seed,
        homotopy_steps
    );
    if let Some(anchor) = args.monotone_anchor {
        cfg.monotone_anchor = match anchor {
            Anchor::Fixed => MonotoneAnchor::Fixed,
            Anchor::Reanchor => MonotoneAnchor::Reanchor,
        };
    }
    cfg.epsilon = epsilon;
    Ok(cfg)
}

/// Rendered result document and the exit status of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub document: String,
    pub status: ExitStatus,
    /// Explanation printed to standard error for a nonzero status.
    pub note: Option<String>,
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    command: Command,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<&'a AprioriBounds>,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct SolveBody<'a> {
    epsilon: f64,
    small_eps_residual: f64,
    #[serde(flatten)]
    report: &'a SolveReport,
}

#[derive(Serialize)]
struct EpsBody<'a, T: Serialize> {
    epsilon: f64,
    #[serde(flatten)]
    inner: &'a T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub equation: Equation,
    pub epsilon: Option<f64>,
    pub residual_sup: f64,
    pub residual_tol: f64,
    /// `None` when the bounds do not apply (small-ε equation or relaxed data).
    pub within_bounds: Option<bool>,
    pub mass_identity_error: Option<f64>,
    pub passed: bool,
}

fn problem(config: &RunConfig, relaxed: bool) -> Result<ProblemData, CliError> {
    let graph = parse_graph(&config.graph_path)?;
    let f = parse_function(&config.f_spec, graph.vertex_count())?;
    let exponent = Exponent::new(config.p).map_err(|e| CliError::input(e.to_string()))?;
    let strict = ProblemData::new(graph.clone(), config.lambda, f.clone(), exponent);
    match strict {
        Err(EstimateError::HypothesisFails { .. }) if relaxed => {
            Ok(ProblemData::relaxed(graph, config.lambda, f, exponent)?)
        }
        other => Ok(other?),
    }
}

fn json<T: Serialize>(config: &RunConfig, bounds: Option<&AprioriBounds>, body: T) -> String {
    let doc = Document {
        command: config.command,
        config,
        bounds,
        body,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("result documents serialize");
    s.push('\n');
    s
}

fn csv_rows(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

/// `name,value` rows for every scalar field of a serialized struct.
fn key_value_csv<T: Serialize>(value: &T) -> String {
    let Value::Object(map) = serde_json::to_value(value).expect("serializable") else {
        unreachable!("structs serialize to objects")
    };
    let rows = map.into_iter().filter_map(|(k, v)| match v {
        Value::Object(_) | Value::Array(_) => None,
        Value::String(s) => Some(vec![k, s]),
        Value::Null => Some(vec![k, String::new()]),
        other => Some(vec![k, other.to_string()]),
    });
    csv_rows(&["name".into(), "value".into()], rows)
}

fn per_vertex_csv(columns: &[(&str, &VertexFunction)]) -> String {
    let header: Vec<String> = std::iter::once("vertex".to_string())
        .chain(columns.iter().map(|(name, _)| name.to_string()))
        .collect();
    let n = columns.first().map_or(0, |(_, u)| u.len());
    let rows = (0..n).map(|x| {
        std::iter::once(x.to_string())
            .chain(columns.iter().map(|(_, u)| format!("{:?}", u[x])))
            .collect()
    });
    csv_rows(&header, rows)
}

fn success(document: String) -> Outcome {
    Outcome {
        document,
        status: ExitStatus::Success,
        note: None,
    }
}

fn bounds_cmd(config: &RunConfig) -> Result<Outcome, CliError> {
    let pd = problem(config, false)?;
    let bounds = compute_bounds(&pd)?;
    Ok(success(match config.format {
        Format::Json => json(config, Some(&bounds), serde_json::Map::new()),
        Format::Csv => key_value_csv(&bounds),
    }))
}

fn solve_cmd(config: &RunConfig) -> Result<Outcome, CliError> {
    let pd = problem(config, false)?;
    let run = solve_csh_detailed(&pd, &config.solver)?;
    if let Some(path) = &config.trace_path {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        run.report
            .write_trace_csv(file)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    }
    let document = match config.format {
        Format::Json => json(
            config,
            Some(&run.bounds),
            SolveBody {
                epsilon: run.eps,
                small_eps_residual: run.small.residual_sup,
                report: &run.report,
            },
        ),
        Format::Csv => {
            let mut buf = Vec::new();
            run.report.write_trace_csv(&mut buf).expect("in-memory csv");
            String::from_utf8(buf).expect("utf-8 csv")
        }
    };
    let converged = run.report.converged;
    Ok(Outcome {
        document,
        status: if converged {
            ExitStatus::Success
        } else {
            ExitStatus::NumericalFailure
        },
        note: (!converged).then(|| {
            format!(
                "final residual {:e} above tolerance",
                run.report.residual_sup
            )
        }),
    })
}

fn degree_csv(report: &DegreeReport) -> String {
    let n = report.solutions.first().map_or(0, |u| u.len());
    let header: Vec<String> = ["index", "local_sign", "spectral_gap"]
        .into_iter()
        .map(String::from)
        .chain((0..n).map(|x| format!("u{x}")))
        .collect();
    let rows = report.solutions.iter().enumerate().map(|(i, u)| {
        [
            i.to_string(),
            report.local_signs[i].to_string(),
            format!("{:?}", report.spectral_gaps[i]),
        ]
        .into_iter()
        .chain(u.iter().map(|v| format!("{v:?}")))
        .collect()
    });
    csv_rows(&header, rows)
}

fn degree_cmd(config: &RunConfig) -> Result<Outcome, CliError> {
    let pd = problem(config, false)?;
    let bounds = compute_bounds(&pd)?;
    let radius = config.radius.unwrap_or(bounds.r0);
    let sigma = config.sigma.unwrap_or(1.0);
    let report = global_degree_for(&pd, Family::F { sigma }, radius, &config.solver)?;
    let document = match config.format {
        Format::Json => json(config, Some(&bounds), &report),
        Format::Csv => degree_csv(&report),
    };
    let ok = report.matches_sgn_lambda;
    Ok(Outcome {
        document,
        status: if ok {
            ExitStatus::Success
        } else {
            ExitStatus::NumericalFailure
        },
        note: (!ok).then(|| {
            format!(
                "degree {} differs from sgn λ; the solution search probably missed solutions",
                report.degree
            )
        }),
    })
}

fn verify_cmd(config: &RunConfig) -> Result<Outcome, CliError> {
    let pd = problem(config, config.relaxed)?;
    let spec = config
        .solution_spec
        .as_deref()
        .ok_or_else(|| CliError::input("verify needs --solution"))?;
    let u = parse_function(spec, pd.vertex_count())?;
    let bounds = if pd.is_relaxed() {
        None
    } else {
        Some(compute_bounds(&pd)?)
    };
    let equation = config.equation.unwrap_or(Equation::Csh);
    let tol = config.solver.residual_tol;
    let v = match equation {
        Equation::Csh => {
            let residual_sup = family_residual(&pd, Family::TARGET, &u)?;
            let within_bounds = bounds.as_ref().map(|b| check_bound(&pd, b, &u));
            Verification {
                equation,
                epsilon: None,
                residual_sup,
                residual_tol: tol,
                within_bounds,
                mass_identity_error: None,
                passed: residual_sup <= tol && within_bounds != Some(false),
            }
        }
        Equation::SmallEps => {
            let eps = match (&bounds, config.solver.epsilon) {
                (_, Some(eps)) => eps,
                (Some(b), None) => stage_epsilon(b, &config.solver),
                (None, None) => {
                    return Err(CliError::input(
                        "relaxed small-eps verification needs --epsilon",
                    ))
                }
            };
            let residual_sup = eq33_residual(&pd, eps, &u)?;
            let mass = mass_identity_error(&pd, eps, &u)?;
            Verification {
                equation,
                epsilon: Some(eps),
                residual_sup,
                residual_tol: tol,
                within_bounds: None,
                mass_identity_error: Some(mass),
                passed: residual_sup <= tol && mass <= MASS_TOL,
            }
        }
    };
    let document = match config.format {
        Format::Json => json(config, bounds.as_ref(), &v),
        Format::Csv => key_value_csv(&v),
    };
    Ok(Outcome {
        document,
        status: if v.passed {
            ExitStatus::Success
        } else {
            ExitStatus::NumericalFailure
        },
        note: (!v.passed).then(|| "verification failed".to_string()),
    })
}

fn bracket_cmd(config: &RunConfig) -> Result<Outcome, CliError> {
    let pd = problem(config, false)?;
    if pd.lambda() < 0.0 {
        return Err(CliError::new(
            ExitStatus::HypothesisViolation,
            "bracket needs λ > 0",
        ));
    }
    let bounds = compute_bounds(&pd)?;
    let eps = stage_epsilon(&bounds, &config.solver);
    let bracket: Bracket = construct_bracket(&pd, eps, &config.solver)?;
    let document = match config.format {
        Format::Json => json(
            config,
            Some(&bounds),
            EpsBody {
                epsilon: eps,
                inner: &bracket,
            },
        ),
        Format::Csv => per_vertex_csv(&[
            ("u_minus", &bracket.u_minus),
            ("u_plus", &bracket.u_plus),
            ("k", &bracket.k),
            ("v_eps", &bracket.v_eps),
        ]),
    };
    Ok(success(document))
}

/// Runs the command and renders its result, without touching the output
/// destination.
pub fn execute(config: &RunConfig) -> Result<Outcome, CliError> {
    match config.command {
        Command::Bounds => bounds_cmd(config),
        Command::Solve => solve_cmd(config),
        Command::Degree => degree_cmd(config),
        Command::Verify => verify_cmd(config),
        Command::Bracket => bracket_cmd(config),
    }
}

/// Runs the command, writes the result document and returns the exit code.
/// Messages go to standard error.
pub fn run(config: &RunConfig) -> i32 {
    let outcome = match execute(config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.status.code();
        }
    };
    let written = match &config.output_path {
        Some(path) => {
            std::fs::write(path, &outcome.document).map_err(|e| format!("{}: {e}", path.display()))
        }
        None => std::io::stdout()
            .lock()
            .write_all(outcome.document.as_bytes())
            .map_err(|e| e.to_string()),
    };
    if let Err(msg) = written {
        eprintln!("error: {msg}");
        return ExitStatus::InputError.code();
    }
    if let Some(note) = &outcome.note {
        eprintln!("{note}");
    }
    outcome.status.code()
}

/// Entry point for the binary: parses `args`, maps argument errors to exit
/// code 3, and runs.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitStatus::InputError.code()
            } else {
                0
            };
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    match RunConfig::from_cli(cli, env_seed.as_deref()) {
        Ok(config) => run(&config),
        Err(e) => {
            eprintln!("error: {e}");
            e.status.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::Stage;

    fn config(args: &[&str], env_seed: Option<&str>) -> Result<RunConfig, CliError> {
        let cli =
            Cli::try_parse_from(std::iter::once("graph-csh").chain(args.iter().copied())).unwrap();
        RunConfig::from_cli(cli, env_seed)
    }

    #[test]
    fn exit_codes_are_stable() {
        let codes: Vec<i32> = [
            ExitStatus::Success,
            ExitStatus::HypothesisViolation,
            ExitStatus::NumericalFailure,
            ExitStatus::InputError,
        ]
        .into_iter()
        .map(ExitStatus::code)
        .collect();
        assert_eq!(codes, [0, 1, 2, 3]);
    }

    #[test]
    fn error_classification() {
        let hyp = SolveError::from(EstimateError::HypothesisFails {
            lambda: 1.0,
            integral_f: 1.0,
        })
        .at(Stage::Bounds);
        assert_eq!(CliError::from(hyp).status, ExitStatus::HypothesisViolation);
        let numeric = SolveError::BracketDiverged.at(Stage::SmallEpsilon);
        assert_eq!(CliError::from(numeric).status, ExitStatus::NumericalFailure);
        let input = SolveError::Graph(GraphError::NotConnected);
        assert_eq!(CliError::from(input).status, ExitStatus::InputError);
        let radius = DegreeError::RadiusTooSmall {
            radius: 1.0,
            r0: 2.0,
        };
        assert_eq!(CliError::from(radius).status, ExitStatus::InputError);
    }

    #[test]
    fn config_from_arguments() {
        let base = [
            "degree", "--graph", "g.txt", "--lambda", "-2", "--f", "-0.5", "--p", "1.5",
        ];
        let c = config(&base, Some("11")).unwrap();
        assert_eq!(c.command, Command::Degree);
        assert_eq!(c.lambda, -2.0);
        assert_eq!(c.f_spec, "-0.5");
        assert_eq!(c.sigma, Some(1.0));
        assert_eq!(c.solver.seed, 11);

        let mut args = base.to_vec();
        args.extend([
            "--seed",
            "4",
            "--epsilon",
            "1e-3",
            "--monotone-anchor",
            "fixed",
            "--sigma",
            "0.25",
        ]);
        let c = config(&args, Some("11")).unwrap();
        assert_eq!(c.solver.seed, 4);
        assert_eq!(c.solver.epsilon, Some(1e-3));
        assert_eq!(c.solver.monotone_anchor, MonotoneAnchor::Fixed);
        assert_eq!(c.sigma, Some(0.25));

        let mut args = base.to_vec();
        args.extend(["--sigma", "2"]);
        assert_eq!(
            config(&args, None).unwrap_err().status,
            ExitStatus::InputError
        );
        let mut args = base.to_vec();
        args[8] = "0.5";
        assert_eq!(
            config(&args, None).unwrap_err().status,
            ExitStatus::InputError
        );
    }

    #[test]
    fn config_echo_omits_unused_fields() {
        let c = config(
            &[
                "bounds", "--graph", "g", "--lambda", "1", "--f", "const:-1", "--p", "2",
            ],
            None,
        )
        .unwrap();
        let v = serde_json::to_value(&c).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(
            keys,
            [
                "command",
                "graph_path",
                "f_spec",
                "lambda",
                "p",
                "epsilon_override",
                "solver",
                "output_path",
                "format"
            ]
        );
    }
}
