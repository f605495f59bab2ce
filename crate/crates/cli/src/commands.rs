//! Subcommand implementations. Each returns the process exit code.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use formsos::formation::{
    build_parametric_set, build_semialgebraic_set, classify_equilibrium, random_configuration,
    simulate, simulate_batch, ClassifyOptions, FormationError, FormationSet, FormationSpec,
    MinorMode, SimOptions,
};
use formsos::psatz::{
    search_refutation, verify_refutation, AttemptLog, AttemptStatus, PsatzError, SearchOptions,
    SearchOutcome, SearchSchedule, SemialgebraicSet,
};
use formsos::rational::DEFAULT_MAX_DENOMINATOR;
use formsos::sdp::SolveOptions;
use formsos::sos::{sos_check, SosOptions, SosOutcome};
use formsos::Polynomial;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::files::{
    CertificateFile, Problem, ProblemFile, RationalJson, ReportFile, SimulationFile,
    SpecFile, TrajectoryFile,
};
use crate::parse::{format_rational, infer_variables, parse_polynomial};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_FOUND: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_INTERNAL: i32 = 70;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

fn internal(msg: impl std::fmt::Display) -> CliError {
    CliError::Internal(msg.to_string())
}

fn io_out(e: std::io::Error) -> CliError {
    internal(format!("write failed: {e}"))
}

pub type CmdResult = Result<i32, CliError>;

/// Solver tolerances shared by every command.
#[derive(Args, Clone, Debug)]
pub struct Tolerances {
    /// Affine feasibility tolerance of the SDP solver.
    #[arg(long, global = true, env = "FORMSOS_FEAS_TOL", default_value_t = 1e-8)]
    pub feas_tol: f64,
    /// Eigenvalue tolerance for PSD blocks.
    #[arg(long, global = true, env = "FORMSOS_PSD_TOL", default_value_t = 1e-8)]
    pub psd_tol: f64,
    /// Iteration cap of the SDP solver.
    #[arg(long, global = true, env = "FORMSOS_MAX_ITERS", default_value_t = 50_000)]
    pub max_iters: usize,
}

impl Tolerances {
    fn solve_options(&self) -> Result<SolveOptions, CliError> {
        for (name, v) in [("feas-tol", self.feas_tol), ("psd-tol", self.psd_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(usage(format!("--{name} must be positive")));
            }
        }
        if self.max_iters == 0 {
            return Err(usage("--max-iters must be positive"));
        }
        Ok(SolveOptions {
            feas_tol: self.feas_tol,
            psd_tol: self.psd_tol,
            max_iters: self.max_iters,
            ..SolveOptions::default()
        })
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_problem(path: &Path) -> Result<Problem, CliError> {
    ProblemFile::parse(&read_text(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Writes to `path`, or to `out` when `path` is `-`.
fn emit(path: &Path, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    if path == Path::new("-") {
        out.write_all(text.as_bytes()).map_err(io_out)
    } else {
        fs::write(path, text).map_err(|e| internal(format!("{}: {e}", path.display())))
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// sos-check

#[derive(Args, Debug)]
pub struct SosCheckArgs {
    /// Problem file holding exactly one polynomial.
    #[arg(required_unless_present = "expr", conflicts_with = "expr")]
    pub path: Option<PathBuf>,
    /// Polynomial text such as "x^2 - 2*x*y + y^2".
    #[arg(long)]
    pub expr: Option<String>,
    /// Comma-separated variable order for --expr; sorted names by default.
    #[arg(long, value_delimiter = ',', requires = "expr")]
    pub vars: Option<Vec<String>>,
    /// Largest degree in the Gram monomial basis.
    #[arg(long)]
    pub degree: Option<u32>,
    /// Print a JSON report instead of text.
    #[arg(long)]
    pub json: bool,
}

fn sos_input(args: &SosCheckArgs) -> Result<(Polynomial, Vec<String>), CliError> {
    if let Some(text) = &args.expr {
        let names = match &args.vars {
            Some(v) => v.clone(),
            None => infer_variables(text).map_err(usage)?,
        };
        let names = if names.is_empty() { vec!["x".to_string()] } else { names };
        let p = parse_polynomial(text, &names).map_err(usage)?;
        return Ok((p, names));
    }
    let path = args.path.as_deref().expect("clap requires a path or --expr");
    let problem = read_problem(path)?;
    let set = &problem.set;
    let all: Vec<&Polynomial> = set.f().iter().chain(set.g()).chain(set.h()).collect();
    match all.as_slice() {
        [p] => Ok(((*p).clone(), problem.names.clone())),
        _ => Err(usage(format!(
            "{}: expected exactly one polynomial, found {}",
            path.display(),
            all.len()
        ))),
    }
}

pub fn sos_check_cmd(args: &SosCheckArgs, tol: &Tolerances, out: &mut dyn Write) -> CmdResult {
    let (p, names) = sos_input(args)?;
    let options = SosOptions {
        solve: tol.solve_options()?,
        basis_degree: args.degree,
        ..SosOptions::default()
    };
    let outcome = sos_check(&p, &options).map_err(|e| match e {
        formsos::sos::SosError::Sdp(formsos::sdp::SdpError::TooLarge(m)) => usage(m),
        e => internal(e),
    })?;
    let code = if outcome.is_feasible() { EXIT_OK } else { EXIT_NOT_FOUND };
    let text = match &outcome {
        SosOutcome::Feasible(d) if args.json => to_json(&json!({
            "status": "feasible",
            "polynomial": p.display_with(&names),
            "exact": d.is_exact(),
            "residual": d.residual,
            "basis": d.z.iter().map(|m| m.display_with(&names)).collect::<Vec<_>>(),
            "gram": (0..d.q.nrows())
                .map(|i| (0..d.q.ncols()).map(|j| d.q[(i, j)]).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "exact_gram": d.exact_q.as_ref().map(|q| q
                .iter()
                .map(|row| row.iter().map(format_rational).collect::<Vec<_>>())
                .collect::<Vec<_>>()),
            "squares": d.squares.iter().map(|s| s.display_with(&names)).collect::<Vec<_>>(),
        })),
        SosOutcome::Feasible(d) => {
            let mut s = format!(
                "feasible: {} is a sum of {} squares{}\n",
                p.display_with(&names),
                d.squares.len(),
                if d.is_exact() { " (exact)" } else { "" }
            );
            for sq in &d.squares {
                s.push_str(&format!("  ({})^2\n", sq.display_with(&names)));
            }
            s.push_str(&format!("coefficient residual {:e}\n", d.residual));
            s
        }
        SosOutcome::Unknown { reason } if args.json => to_json(&json!({
            "status": "unknown",
            "polynomial": p.display_with(&names),
            "reason": reason,
        })),
        SosOutcome::Unknown { reason } => format!("unknown: {reason}\n"),
    };
    out.write_all(text.as_bytes()).map_err(io_out)?;
    Ok(code)
}

// ---------------------------------------------------------------------------
// certify

#[derive(Args, Clone, Debug)]
pub struct SearchArgs {
    /// Largest relaxation degree; every even degree up to it is tried.
    #[arg(long, default_value_t = 6)]
    pub max_degree: u32,
    /// Largest power m in g = prod g_j^m.
    #[arg(long, default_value_t = 2)]
    pub monoid_power: u32,
    /// Largest number of inequalities multiplied together in the cone.
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    /// Identity residual a certificate must meet.
    #[arg(long, env = "FORMSOS_CERT_TOL", default_value_t = 1e-8)]
    pub cert_tol: f64,
    /// Attempts solved in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Certificate destination; "-" for standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the attempt log as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    /// Problem file.
    pub path: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
}

fn status_text(s: &AttemptStatus) -> String {
    match s {
        AttemptStatus::Found => "found".into(),
        AttemptStatus::Skipped(why) => format!("skipped ({why})"),
        AttemptStatus::Unknown { residual, diagnostic } => match diagnostic {
            Some(d) => format!("unknown (residual {residual:e}; {d})"),
            None => format!("unknown (residual {residual:e})"),
        },
        AttemptStatus::VerificationFailed { identity_residual } => {
            format!("verification failed (identity residual {identity_residual:e})")
        }
        AttemptStatus::Error(e) => format!("error ({e})"),
    }
}

fn status_kind(s: &AttemptStatus) -> &'static str {
    match s {
        AttemptStatus::Found => "found",
        AttemptStatus::Skipped(_) => "skipped",
        AttemptStatus::Unknown { .. } => "unknown",
        AttemptStatus::VerificationFailed { .. } => "verification-failed",
        AttemptStatus::Error(_) => "error",
    }
}

fn log_json(log: &[AttemptLog]) -> serde_json::Value {
    log.iter()
        .map(|a| {
            json!({
                "degree": a.degree,
                "monoid_power": a.monoid_power,
                "depth": a.depth,
                "degree_total": a.degree_total,
                "block_dims": a.block_dims,
                "free_vars": a.free_vars,
                "constraints": a.constraints,
                "iterations": a.iterations,
                "status": status_kind(&a.status),
                "detail": status_text(&a.status),
            })
        })
        .collect()
}

fn log_text(log: &[AttemptLog]) -> String {
    let mut s = String::new();
    for a in log {
        s.push_str(&format!(
            "attempt degree {} m {} depth {}: blocks {:?}, {} free, {} rows, {} iterations: {}\n",
            a.degree,
            a.monoid_power,
            a.depth,
            a.block_dims,
            a.free_vars,
            a.constraints,
            a.iterations,
            status_text(&a.status)
        ));
    }
    s
}

fn psatz_error(e: PsatzError) -> CliError {
    match e {
        PsatzError::OddDegree(_)
        | PsatzError::DepthTooLarge { .. }
        | PsatzError::ZeroMonoidPower
        | PsatzError::DegreeOverflow(_)
        | PsatzError::Schedule(_) => usage(e),
        e => internal(e),
    }
}

/// Runs the search on `problem` and writes a certificate when one verifies.
pub fn run_certify(
    problem: &Problem,
    args: &SearchArgs,
    tol: &Tolerances,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    if args.max_degree < 2 {
        return Err(usage("--max-degree must be at least 2"));
    }
    if args.monoid_power == 0 {
        return Err(usage("--monoid-power must be at least 1"));
    }
    if args.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    if !(args.cert_tol > 0.0 && args.cert_tol.is_finite()) {
        return Err(usage("--cert-tol must be positive"));
    }
    let schedule = SearchSchedule::up_to(args.max_degree, args.monoid_power, args.depth);
    let options = SearchOptions {
        solve: tol.solve_options()?,
        cert_tol: args.cert_tol,
        max_denominator: DEFAULT_MAX_DENOMINATOR,
        exact_repair_rows: SearchOptions::default().exact_repair_rows,
        jobs: args.jobs,
    };
    let set = &problem.set;
    let outcome = search_refutation(set, &schedule, &options).map_err(psatz_error)?;
    // The certificate may go to stdout; keep the log out of its way.
    let to_stdout = args.out.as_deref() == Some(Path::new("-"));
    let summary = problem_summary(set);
    let written = match &outcome {
        SearchOutcome::Found {
            refutation, report, ..
        } => {
            // Re-check from the exact data before anything is written.
            let check = verify_refutation(set, refutation, args.cert_tol).map_err(psatz_error)?;
            if !check.passed {
                return Err(internal("search returned a certificate that does not verify"));
            }
            let cert = CertificateFile::new(problem, refutation, report);
            match &args.out {
                Some(path) => {
                    emit(path, &cert.render(), out)?;
                    Some(path.display().to_string())
                }
                None => None,
            }
        }
        SearchOutcome::NotFound { .. } => None,
    };
    let log = outcome.log();
    let report_text = if args.json {
        let mut v = json!({
            "problem": summary,
            "found": outcome.is_found(),
            "attempts": log_json(log),
            "certificate": written,
        });
        if let SearchOutcome::Found { report, .. } = &outcome {
            v["identity_residual"] = json!(report.identity_residual);
        }
        to_json(&v)
    } else {
        let mut s = format!(
            "problem: {} variables, {} inequalities, {} inequations, {} equations\n",
            set.nvars(),
            set.f().len(),
            set.g().len(),
            set.h().len()
        );
        s.push_str(&log_text(log));
        match &outcome {
            SearchOutcome::Found {
                refutation, report, ..
            } => {
                s.push_str(&format!(
                    "refuted: degree {}, m {}, identity residual {:e}{}\n",
                    refutation.degree,
                    refutation.monoid_power,
                    report.identity_residual,
                    if refutation.rounded { ", rational" } else { "" }
                ));
                match &written {
                    Some(p) if !to_stdout => s.push_str(&format!("certificate written to {p}\n")),
                    Some(_) => {}
                    None => s.push_str("certificate not saved (use --out)\n"),
                }
            }
            SearchOutcome::NotFound { .. } => s.push_str("no refutation found\n"),
        }
        s
    };
    let log_sink: &mut dyn Write = if to_stdout { err } else { out };
    log_sink.write_all(report_text.as_bytes()).map_err(io_out)?;
    match outcome {
        SearchOutcome::Found { .. } => Ok(EXIT_OK),
        SearchOutcome::NotFound { log }
            if !log.is_empty() && log.iter().all(|a| matches!(a.status, AttemptStatus::Error(_))) =>
        {
            Err(internal("every attempt failed inside the solver"))
        }
        SearchOutcome::NotFound { .. } => Ok(EXIT_NOT_FOUND),
    }
}

fn problem_summary(set: &SemialgebraicSet) -> serde_json::Value {
    let degs = |v: &[Polynomial]| v.iter().map(Polynomial::degree).collect::<Vec<_>>();
    json!({
        "nvars": set.nvars(),
        "f_degrees": degs(set.f()),
        "g_degrees": degs(set.g()),
        "h_degrees": degs(set.h()),
    })
}

pub fn certify_cmd(
    args: &CertifyArgs,
    tol: &Tolerances,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let problem = read_problem(&args.path)?;
    run_certify(&problem, &args.search, tol, out, err)
}

// ---------------------------------------------------------------------------
// verify

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Certificate file.
    pub path: PathBuf,
    /// Problem file the certificate must refute.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Largest admissible identity residual and negative eigenvalue.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Print a JSON report instead of text.
    #[arg(long)]
    pub json: bool,
}

pub fn verify_cmd(args: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    if !(args.tol >= 0.0) {
        return Err(usage("--tol must be non-negative"));
    }
    let text = read_text(&args.path)?;
    let cert = CertificateFile::parse(&text).map_err(|e| usage(format!("{}: {e}", args.path.display())))?;
    let (problem, refutation) = cert
        .decode()
        .map_err(|e| usage(format!("{}: {e}", args.path.display())))?;
    let mut failures = Vec::new();
    let hash = problem.hash();
    if hash != cert.input_hash {
        failures.push("input hash does not match the embedded problem".to_string());
    }
    if let Some(p) = &args.problem {
        if read_problem(p)?.hash() != cert.input_hash {
            failures.push(format!("certificate is not for {}", p.display()));
        }
    }
    let report = match verify_refutation(&problem.set, &refutation, args.tol) {
        Ok(r) => Some(r),
        Err(PsatzError::Structural(m)) => {
            failures.push(m);
            None
        }
        Err(PsatzError::Poly(e)) => {
            failures.push(e.to_string());
            None
        }
        Err(PsatzError::ZeroMonoidPower) => {
            failures.push("monoid power must be positive".into());
            None
        }
        Err(e) => return Err(internal(e)),
    };
    if let Some(r) = &report {
        if !r.passed {
            failures.push(format!(
                "identity residual {:e} or a negative Gram eigenvalue exceeds tolerance {:e}",
                r.identity_residual, args.tol
            ));
        }
    }
    let passed = failures.is_empty();
    let text = if args.json {
        to_json(&json!({
            "passed": passed,
            "input_hash": hash,
            "identity_residual": report.as_ref().map(|r| r.identity_residual),
            "min_eigs": report.as_ref().map(|r| r
                .min_eigs
                .iter()
                .map(|(s, e)| json!({"subset": s, "min_eig": e.is_finite().then_some(*e)}))
                .collect::<Vec<_>>()),
            "failures": failures,
        }))
    } else {
        let mut s = String::new();
        if let Some(r) = &report {
            s.push_str(&format!("identity residual {:e}\n", r.identity_residual));
            for (subset, e) in &r.min_eigs {
                if e.is_finite() {
                    s.push_str(&format!("  block {subset:?}: min eigenvalue {e:e}\n"));
                }
            }
        }
        for f in &failures {
            s.push_str(&format!("fail: {f}\n"));
        }
        s.push_str(if passed { "pass\n" } else { "FAIL\n" });
        s
    };
    out.write_all(text.as_bytes()).map_err(io_out)?;
    Ok(if passed { EXIT_OK } else { EXIT_NOT_FOUND })
}

// ---------------------------------------------------------------------------
// formation

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Unit square on four agents, complete graph.
    Square,
    /// Equilateral triangle with unit sides.
    Triangle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Leading principal minors of the gauge-reduced Hessian block.
    Reduced,
    /// Every principal minor of the Hessian.
    Full,
}

impl From<ModeArg> for MinorMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Reduced => MinorMode::Reduced,
            ModeArg::Full => MinorMode::Full,
        }
    }
}

/// Formation given as a JSON file, a preset, or inline flags.
#[derive(Args, Clone, Debug)]
pub struct SpecArgs {
    /// Formation JSON: {"agents", "dim", "edges", "dbar_sq"}.
    #[arg(long, conflicts_with_all = ["preset", "agents"])]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "agents")]
    pub preset: Option<Preset>,
    /// Number of agents.
    #[arg(long)]
    pub agents: Option<usize>,
    /// Edges as 1-based pairs "1-2,1-3,..."; the complete graph by default.
    #[arg(long, value_delimiter = ',', requires = "agents")]
    pub edges: Option<Vec<String>>,
    /// Desired squared distances, one per edge, e.g. "1,2,1/2".
    #[arg(long, value_delimiter = ',', requires = "agents")]
    pub dbar_sq: Option<Vec<String>>,
    /// Ambient dimension for --agents.
    #[arg(long, default_value_t = 2, requires = "agents")]
    pub dim: usize,
}

impl SpecArgs {
    pub fn resolve(&self) -> Result<FormationSpec, CliError> {
        if let Some(path) = &self.spec {
            let file: SpecFile = serde_json::from_str(&read_text(path)?)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?;
            return file.to_spec().map_err(|e| usage(format!("{}: {e}", path.display())));
        }
        match (self.preset, self.agents) {
            (Some(Preset::Square), _) => Ok(FormationSpec::unit_square()),
            (Some(Preset::Triangle), _) => Ok(FormationSpec::equilateral()),
            (None, Some(agents)) => {
                let d = self
                    .dbar_sq
                    .as_ref()
                    .ok_or_else(|| usage("--agents needs --dbar-sq"))?;
                let edges = match &self.edges {
                    None => None,
                    Some(list) => Some(list.iter().map(|e| parse_edge(e)).collect::<Result<Vec<_>, _>>()?),
                };
                let file = SpecFile {
                    agents,
                    dim: self.dim,
                    edges,
                    dbar_sq: d.iter().map(|s| RationalJson::Text(s.clone())).collect(),
                };
                file.to_spec().map_err(usage)
            }
            (None, None) => Err(usage("give a formation with --spec, --preset or --agents")),
        }
    }
}

fn parse_edge(text: &str) -> Result<[usize; 2], CliError> {
    let bad = || usage(format!("edge '{text}' is not of the form i-j"));
    let (a, b) = text.trim().split_once('-').ok_or_else(bad)?;
    Ok([a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?])
}

#[derive(Args, Clone, Debug)]
pub struct SetArgs {
    /// Which principal minors become inequalities.
    #[arg(long, value_enum, default_value = "reduced")]
    pub mode: ModeArg,
    /// Pin agent 1 to the origin and agent 2 to the positive y-axis.
    #[arg(long)]
    pub gauge: bool,
    /// Build full-minor sets beyond the size cap.
    #[arg(long)]
    pub force: bool,
    /// Treat the squared distances as variables constrained by the
    /// Cayley-Menger determinant (four agents, complete graph).
    #[arg(long, conflicts_with = "gauge")]
    pub parametric: bool,
}

fn formation_error(e: FormationError) -> CliError {
    match e {
        FormationError::Eigen | FormationError::Poly(_) | FormationError::Diverged(_) => internal(e),
        FormationError::TooLarge(m) => usage(format!("{m}; pass --force to build it anyway")),
        e => usage(e),
    }
}

fn build_set(spec: &FormationSpec, args: &SetArgs) -> Result<FormationSet, CliError> {
    let built = if args.parametric {
        build_parametric_set(spec, args.mode.into(), args.force)
    } else {
        build_semialgebraic_set(spec, args.mode.into(), args.gauge, args.force)
    };
    built.map_err(formation_error)
}

fn formation_problem(fs: &FormationSet) -> Result<Problem, CliError> {
    Problem::new(fs.set.clone(), fs.variable_names.clone()).map_err(internal)
}

#[derive(Subcommand, Debug)]
pub enum FormationCommand {
    /// Write the semialgebraic set of stable incorrect equilibria.
    BuildSet(BuildSetArgs),
    /// Integrate the gradient flow and classify where it stops.
    Simulate(SimulateArgs),
    /// Classify a given configuration.
    Classify(ClassifyArgs),
    /// Build the set and search for a refutation of it.
    Certify(FormationCertifyArgs),
}

#[derive(Args, Debug)]
pub struct BuildSetArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub set: SetArgs,
    /// Problem file destination; standard output by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Initial positions "x1,y1,x2,y2,..."; random when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
    /// Seed for random initial positions.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random positions are drawn from [-range, range].
    #[arg(long, default_value_t = 2.0)]
    pub range: f64,
    /// Number of random runs; more than one prints a batch summary.
    #[arg(long, default_value_t = 1, conflicts_with = "init")]
    pub runs: usize,
    /// Runs simulated in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// RK4 step.
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    #[arg(long, default_value_t = 1e4)]
    pub max_time: f64,
    /// Record every k-th accepted step in the trajectory.
    #[arg(long, default_value_t = 100)]
    pub record_every: usize,
    /// Equilibrium threshold on |flow|.
    #[arg(long, default_value_t = 1e-9)]
    pub eq_tol: f64,
    /// Trajectory CSV destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run report JSON destination; standard output by default.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Positions "x1,y1,x2,y2,...".
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required_unless_present = "config_file")]
    pub config: Option<Vec<f64>>,
    /// JSON array of positions, or a run report with a "final_p" or "p" field.
    #[arg(long, conflicts_with = "config")]
    pub config_file: Option<PathBuf>,
    /// Equilibrium threshold on |flow|.
    #[arg(long, default_value_t = 1e-9)]
    pub eq_tol: f64,
    /// Distance-error threshold separating correct from incorrect shapes.
    #[arg(long, default_value_t = 1e-6)]
    pub err_tol: f64,
    /// Eigenvalues within this of zero count as zero.
    #[arg(long, default_value_t = 1e-6)]
    pub zero_tol: f64,
}

#[derive(Args, Debug)]
pub struct FormationCertifyArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub set: SetArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Also write the problem file here.
    #[arg(long)]
    pub problem_out: Option<PathBuf>,
}

pub fn formation_cmd(
    cmd: &FormationCommand,
    tol: &Tolerances,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    match cmd {
        FormationCommand::BuildSet(a) => build_set_cmd(a, out),
        FormationCommand::Simulate(a) => simulate_cmd(a, out),
        FormationCommand::Classify(a) => classify_cmd(a, out),
        FormationCommand::Certify(a) => {
            let spec = a.spec.resolve()?;
            let fs = build_set(&spec, &a.set)?;
            let problem = formation_problem(&fs)?;
            if let Some(p) = &a.problem_out {
                emit(p, &ProblemFile::render(&problem), out)?;
            }
            run_certify(&problem, &a.search, tol, out, err)
        }
    }
}

fn build_set_cmd(args: &BuildSetArgs, out: &mut dyn Write) -> CmdResult {
    let spec = args.spec.resolve()?;
    let fs = build_set(&spec, &args.set)?;
    let problem = formation_problem(&fs)?;
    let text = ProblemFile::render(&problem);
    match &args.out {
        Some(path) if path != Path::new("-") => {
            emit(path, &text, out)?;
            let set = &fs.set;
            let line = format!(
                "{}: {} variables, {} equations, {} inequations, {} inequalities\n",
                path.display(),
                set.nvars(),
                set.h().len(),
                set.g().len(),
                set.f().len()
            );
            out.write_all(line.as_bytes()).map_err(io_out)?;
        }
        _ => out.write_all(text.as_bytes()).map_err(io_out)?,
    }
    Ok(EXIT_OK)
}

fn sim_options(args: &SimulateArgs) -> Result<SimOptions, CliError> {
    if !(args.step > 0.0 && args.step.is_finite()) || !(args.max_time >= 0.0) {
        return Err(usage("--step must be positive and --max-time non-negative"));
    }
    if !(args.range > 0.0 && args.range.is_finite()) {
        return Err(usage("--range must be positive"));
    }
    if args.runs == 0 || args.jobs == 0 {
        return Err(usage("--runs and --jobs must be at least 1"));
    }
    Ok(SimOptions {
        step: args.step,
        max_time: args.max_time,
        eq_tol: args.eq_tol,
        record_every: args.record_every,
        ..SimOptions::default()
    })
}

fn simulate_cmd(args: &SimulateArgs, out: &mut dyn Write) -> CmdResult {
    let spec = args.spec.resolve()?;
    let opts = sim_options(args)?;
    if args.runs > 1 {
        return simulate_many(&spec, args, &opts, out);
    }
    let p0 = match &args.init {
        Some(p) => p.clone(),
        None => random_configuration(spec.coords(), args.range, args.seed, 0).into_vec(),
    };
    let sim = simulate(&spec, &p0, &opts).map_err(formation_error)?;
    if let Some(path) = &args.out {
        let traj = TrajectoryFile::from_simulation(&spec, &sim).map_err(formation_error)?;
        let mut buf = Vec::new();
        traj.write(&mut buf).map_err(internal)?;
        emit(path, &String::from_utf8(buf).expect("CSV is UTF-8"), out)?;
    }
    let report = to_json(&SimulationFile::from_simulation(&sim));
    emit(args.report.as_deref().unwrap_or(Path::new("-")), &report, out)?;
    Ok(if sim.converged { EXIT_OK } else { EXIT_NOT_FOUND })
}

fn simulate_many(
    spec: &FormationSpec,
    args: &SimulateArgs,
    opts: &SimOptions,
    out: &mut dyn Write,
) -> CmdResult {
    if args.out.is_some() {
        return Err(usage("--out records a single run; drop it or use --runs 1"));
    }
    let starts: Vec<_> = (0..args.runs as u64)
        .map(|i| random_configuration(spec.coords(), args.range, args.seed, i))
        .collect();
    let opts = SimOptions {
        record_every: 0,
        ..opts.clone()
    };
    let results = simulate_batch(spec, &starts, &opts, args.jobs);
    let mut counts = std::collections::BTreeMap::<String, usize>::new();
    let mut drift: f64 = 0.0;
    let mut candidates = Vec::new();
    for (i, r) in results.iter().enumerate() {
        let key = match r {
            Ok(sim) => {
                drift = drift.max(sim.max_centroid_drift);
                match &sim.report {
                    Some(rep) => {
                        if rep.classification == formsos::formation::Classification::IncorrectStableCandidate {
                            candidates.push(json!({"run": i, "report": ReportFile::from_report(rep)}));
                        }
                        rep.classification.as_str().to_string()
                    }
                    None if sim.stalled => "stalled".into(),
                    None => "not-converged".into(),
                }
            }
            Err(_) => "error".into(),
        };
        *counts.entry(key).or_default() += 1;
    }
    let all_converged = results
        .iter()
        .all(|r| r.as_ref().is_ok_and(|s| s.converged));
    let summary = json!({
        "runs": args.runs,
        "seed": args.seed,
        "counts": counts,
        "max_centroid_drift": drift,
        "stable_candidates": candidates,
    });
    out.write_all(to_json(&summary).as_bytes()).map_err(io_out)?;
    Ok(if all_converged { EXIT_OK } else { EXIT_NOT_FOUND })
}

fn read_configuration(path: &Path) -> Result<Vec<f64>, CliError> {
    let v: serde_json::Value = serde_json::from_str(&read_text(path)?)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let arr = match &v {
        serde_json::Value::Object(o) => o.get("final_p").or_else(|| o.get("p")),
        other => Some(other),
    };
    arr.and_then(|a| serde_json::from_value::<Vec<f64>>(a.clone()).ok())
        .ok_or_else(|| usage(format!("{}: no position array found", path.display())))
}

fn classify_cmd(args: &ClassifyArgs, out: &mut dyn Write) -> CmdResult {
    let spec = args.spec.resolve()?;
    let p = match (&args.config, &args.config_file) {
        (Some(p), _) => p.clone(),
        (None, Some(path)) => read_configuration(path)?,
        (None, None) => return Err(usage("give --config or --config-file")),
    };
    let opts = ClassifyOptions {
        eq_tol: args.eq_tol,
        err_tol: args.err_tol,
        zero_tol: args.zero_tol,
    };
    match classify_equilibrium(&spec, &p, &opts) {
        Ok(r) => {
            out.write_all(to_json(&ReportFile::from_report(&r)).as_bytes())
                .map_err(io_out)?;
            Ok(EXIT_OK)
        }
        Err(FormationError::NotEquilibrium(norm)) => {
            let v = json!({"classification": "not-equilibrium", "rhs_norm": norm});
            out.write_all(to_json(&v).as_bytes()).map_err(io_out)?;
            Ok(EXIT_NOT_FOUND)
        }
        Err(e) => Err(formation_error(e)),
    }
}
