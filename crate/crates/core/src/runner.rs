//! Command-line front end.
//!
//! Every command is a plain function returning a process exit code so the
//! binary stays a one-liner and the commands can be driven from tests:
//! 0 means success, 1 bad input, 2 a solver that did not converge.
//!
//! Run settings come from three layers, highest first: command-line
//! flags, an optional JSON manifest, and the built-in defaults
//! (`ρ = μ = 1e2`, `ε = 1e-8`, 50 outer iterations).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::aladin::{run_gn_inexact, run_standard, AladinError, IterationTrace, Reference, RunOutcome, SolverConfig};
use crate::case_io::{load_case, load_partition, validate_case, CaseError, PartitionSpec, RawCase};
use crate::model::ModelVariant;
use crate::nr::{nr_solve, NrError, PfSolution};
use crate::partition::DimensionReport;
use crate::problem::DistributedProblem;
use crate::synthetic::dimension_fixture;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NO_CONVERGENCE: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Centralized,
    AladinStandard,
    AladinGn,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Centralized => "centralized",
            Algorithm::AladinStandard => "aladin-standard",
            Algorithm::AladinGn => "aladin-gn",
        }
    }

    pub fn is_distributed(self) -> bool {
        self != Algorithm::Centralized
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Run description stored as JSON. Relative paths are taken relative to
/// the manifest's own directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub case: Option<PathBuf>,
    pub partition: Option<PathBuf>,
    pub model: Option<ModelVariant>,
    pub algorithm: Option<Algorithm>,
    pub rho: Option<f64>,
    pub mu: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub trace_out: Option<PathBuf>,
    pub solution_out: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub threads: Option<usize>,
    pub repeat: Option<usize>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut m: RunManifest = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut m.case,
            &mut m.partition,
            &mut m.trace_out,
            &mut m.solution_out,
            &mut m.reference,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(m)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: RunManifest) -> RunManifest {
        RunManifest {
            case: over.case.or(self.case),
            partition: over.partition.or(self.partition),
            model: over.model.or(self.model),
            algorithm: over.algorithm.or(self.algorithm),
            rho: over.rho.or(self.rho),
            mu: over.mu.or(self.mu),
            tol: over.tol.or(self.tol),
            max_iter: over.max_iter.or(self.max_iter),
            trace_out: over.trace_out.or(self.trace_out),
            solution_out: over.solution_out.or(self.solution_out),
            reference: over.reference.or(self.reference),
            threads: over.threads.or(self.threads),
            repeat: over.repeat.or(self.repeat),
        }
    }
}

/// A manifest with defaults filled in and the manifest invariants checked.
#[derive(Clone, Debug)]
pub struct RunPlan {
    pub case: PathBuf,
    pub partition: Option<PathBuf>,
    pub model: ModelVariant,
    pub algorithm: Algorithm,
    pub config: SolverConfig,
    pub trace_out: Option<PathBuf>,
    pub solution_out: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub repeat: usize,
}

impl RunPlan {
    pub fn from_manifest(m: RunManifest) -> Result<Self, String> {
        let case = m.case.ok_or("no case given (use --case or a manifest)")?;
        let algorithm = m.algorithm.unwrap_or(Algorithm::AladinGn);
        if algorithm.is_distributed() && m.partition.is_none() {
            return Err(format!("algorithm {algorithm} needs a partition (use --partition)"));
        }
        let defaults = SolverConfig::default();
        let config = SolverConfig {
            rho: m.rho.unwrap_or(defaults.rho),
            mu: m.mu.unwrap_or(defaults.mu),
            eps: m.tol.unwrap_or(defaults.eps),
            max_outer_iter: m.max_iter.unwrap_or(defaults.max_outer_iter),
            threads: m.threads.unwrap_or(1),
            ..defaults
        };
        let repeat = m.repeat.unwrap_or(1);
        if repeat == 0 {
            return Err("repeat must be at least 1".into());
        }
        Ok(RunPlan {
            case,
            partition: m.partition,
            model: m.model.unwrap_or(ModelVariant::Reduced),
            algorithm,
            config,
            trace_out: m.trace_out,
            solution_out: m.solution_out,
            reference: m.reference,
            repeat,
        })
    }
}

/// Per-bus record of a solution file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusState {
    pub id: usize,
    pub theta: f64,
    pub v: f64,
    pub p: f64,
    pub q: f64,
}

/// What `solve` writes, and what `--reference` reads back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub algorithm: Algorithm,
    pub model: Option<ModelVariant>,
    pub converged: bool,
    pub iterations: usize,
    pub wall_time_s: f64,
    /// Largest power-flow mismatch at the returned state.
    pub final_mismatch: f64,
    pub primal_inf: Option<f64>,
    pub dual_inf: Option<f64>,
    pub buses: Vec<BusState>,
}

impl SolutionFile {
    pub fn to_solution(&self) -> PfSolution {
        PfSolution {
            bus_ids: self.buses.iter().map(|b| b.id).collect(),
            theta: self.buses.iter().map(|b| b.theta).collect(),
            v: self.buses.iter().map(|b| b.v).collect(),
            p: self.buses.iter().map(|b| b.p).collect(),
            q: self.buses.iter().map(|b| b.q).collect(),
            iterations: self.iterations,
            final_mismatch: self.final_mismatch,
            wall_time_s: self.wall_time_s,
        }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Outcome of one run, converged or not.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub model: Option<ModelVariant>,
    pub converged: bool,
    pub solution: PfSolution,
    pub trace: Option<IterationTrace>,
    /// Median wall time over the repeats.
    pub wall_time_s: f64,
    /// Why the run stopped early, if it did.
    pub failure: Option<String>,
}

impl RunResult {
    pub fn solution_file(&self) -> SolutionFile {
        let s = &self.solution;
        let last = self.trace.as_ref().and_then(|t| t.last());
        SolutionFile {
            algorithm: self.algorithm,
            model: self.model,
            converged: self.converged,
            iterations: s.iterations,
            wall_time_s: self.wall_time_s,
            final_mismatch: s.final_mismatch,
            primal_inf: last.map(|r| r.primal_inf),
            dual_inf: last.map(|r| r.dual_inf),
            buses: (0..s.bus_ids.len())
                .map(|i| BusState {
                    id: s.bus_ids[i],
                    theta: s.theta[i],
                    v: s.v[i],
                    p: s.p[i],
                    q: s.q[i],
                })
                .collect(),
        }
    }

    pub fn summary(&self) -> String {
        let status = if self.converged { "converged" } else { "not-converged" };
        let mut line = format!(
            "{status} algorithm={} iterations={} time_s={:.6} mismatch={:.3e}",
            self.algorithm, self.solution.iterations, self.wall_time_s, self.solution.final_mismatch
        );
        if let Some(m) = self.model {
            line += &format!(" model={m}");
        }
        if let Some(r) = self.trace.as_ref().and_then(|t| t.last()) {
            line += &format!(" primal_inf={:.3e} dual_inf={:.3e}", r.primal_inf, r.dual_inf);
        }
        if let Some(f) = &self.failure {
            line += &format!(" reason=\"{f}\"");
        }
        line
    }
}

/// Error of a run that produced no usable solution at all.
#[derive(Debug)]
pub enum RunError {
    Input(String),
    Solver(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Input(m) | RunError::Solver(m) => f.write_str(m),
        }
    }
}

impl From<CaseError> for RunError {
    fn from(e: CaseError) -> Self {
        RunError::Input(e.to_string())
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Loaded inputs of a run, so repeated runs parse files once.
pub struct Inputs {
    pub case: RawCase,
    pub spec: Option<PartitionSpec>,
    pub reference: Option<PfSolution>,
}

impl Inputs {
    pub fn load(plan: &RunPlan) -> Result<Self, RunError> {
        let case = load_case(&plan.case)?;
        let spec = match &plan.partition {
            Some(p) if plan.algorithm.is_distributed() => Some(load_partition(p, &case)?),
            _ => None,
        };
        let reference = match &plan.reference {
            Some(p) => Some(SolutionFile::load(p).map_err(RunError::Input)?.to_solution()),
            None => None,
        };
        Ok(Inputs { case, spec, reference })
    }
}

/// Runs `plan.repeat` times and reports the last run with the median time.
pub fn execute(plan: &RunPlan, inputs: &Inputs) -> Result<RunResult, RunError> {
    let mut times = Vec::with_capacity(plan.repeat);
    let mut result = None;
    for _ in 0..plan.repeat {
        let start = Instant::now();
        let r = execute_once(plan, inputs)?;
        times.push(start.elapsed().as_secs_f64());
        result = Some(r);
    }
    let mut result = result.expect("repeat ≥ 1");
    result.wall_time_s = median(times);
    result.solution.wall_time_s = result.wall_time_s;
    Ok(result)
}

fn execute_once(plan: &RunPlan, inputs: &Inputs) -> Result<RunResult, RunError> {
    let cfg = &plan.config;
    if plan.algorithm == Algorithm::Centralized {
        return match nr_solve(&inputs.case, cfg.eps, cfg.max_outer_iter) {
            Ok(solution) => Ok(RunResult {
                algorithm: plan.algorithm,
                model: None,
                converged: true,
                wall_time_s: solution.wall_time_s,
                solution,
                trace: None,
                failure: None,
            }),
            Err(e @ NrError::NoConvergence { .. }) | Err(e @ NrError::SingularJacobian { .. }) => {
                Err(RunError::Solver(e.to_string()))
            }
        };
    }

    let spec = inputs.spec.as_ref().expect("distributed plans carry a partition");
    let problem = DistributedProblem::new(&inputs.case, spec, plan.model)?;
    let reference = inputs.reference.as_ref().map(|s| Reference::from_solution(&problem, s));
    let x0 = problem.initial_state();
    let outcome = match plan.algorithm {
        Algorithm::AladinStandard => run_standard(&problem, cfg, &x0, reference.as_ref()),
        _ => run_gn_inexact(&problem, cfg, &x0, reference.as_ref()),
    };
    let finish = |out: RunOutcome, failure: Option<String>| RunResult {
        algorithm: plan.algorithm,
        model: Some(plan.model),
        converged: failure.is_none(),
        wall_time_s: out.solution.wall_time_s,
        solution: out.solution,
        trace: Some(out.trace),
        failure,
    };
    match outcome {
        Ok(out) => Ok(finish(out, None)),
        Err(AladinError::MaxIterationsExceeded(out)) => {
            let msg = format!("no convergence within {} outer iterations", out.trace.len());
            Ok(finish(*out, Some(msg)))
        }
        Err(e @ AladinError::InvalidConfig(_)) => Err(RunError::Input(e.to_string())),
        Err(e) => Err(RunError::Solver(e.to_string())),
    }
}

fn create(path: &Path) -> std::io::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes a trace as JSON lines when the path ends in `.jsonl`, CSV otherwise.
pub fn write_trace(trace: &IterationTrace, path: &Path) -> std::io::Result<()> {
    let mut out = create(path)?;
    if path.extension().is_some_and(|e| e == "jsonl") {
        trace.write_jsonl(&mut out)?;
    } else {
        trace.write_csv(&mut out).map_err(std::io::Error::other)?;
    }
    out.flush()
}

#[derive(Debug, Parser)]
#[command(name = "aladin-pf", version, about = "Distributed power flow by ALADIN, with a Newton-Raphson baseline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one case with one algorithm.
    Solve(SolveArgs),
    /// Report the size of the distributed formulation.
    Dims(DimsArgs),
    /// Time every algorithm and model on a list of fixtures.
    Bench(BenchArgs),
    /// Check a case (and optionally a partition) without solving.
    Validate(ValidateArgs),
}

/// Flags shared by `solve` and `bench`; unset flags fall back to the manifest.
#[derive(Debug, Default, Clone, Args)]
pub struct ConfigFlags {
    /// Local penalty ρ.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Consensus penalty μ.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Termination tolerance ε.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Outer (or Newton) iteration limit.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Worker threads for the regional steps.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Repeat each run and report the median wall time.
    #[arg(long)]
    pub repeat: Option<usize>,
}

#[derive(Debug, Default, Clone, Args)]
pub struct SolveArgs {
    /// JSON manifest with any of the flags below.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Case file: MATPOWER `.m` or JSON.
    #[arg(long)]
    pub case: Option<PathBuf>,
    /// Partition file mapping bus ids to regions.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Distributed layout (default reduced).
    #[arg(long)]
    pub model: Option<ModelVariant>,
    #[arg(long, value_enum)]
    pub algorithm: Option<Algorithm>,
    #[command(flatten)]
    pub config: ConfigFlags,
    /// Trace file; `.jsonl` selects JSON lines, anything else CSV.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Write the final bus states as JSON.
    #[arg(long)]
    pub solution_out: Option<PathBuf>,
    /// Solution file whose state fills the deviation and gap columns.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

impl SolveArgs {
    fn as_manifest(&self) -> RunManifest {
        RunManifest {
            case: self.case.clone(),
            partition: self.partition.clone(),
            model: self.model,
            algorithm: self.algorithm,
            rho: self.config.rho,
            mu: self.config.mu,
            tol: self.config.tol,
            max_iter: self.config.max_iter,
            trace_out: self.trace_out.clone(),
            solution_out: self.solution_out.clone(),
            reference: self.reference.clone(),
            threads: self.config.threads,
            repeat: self.config.repeat,
        }
    }
}

#[derive(Debug, Default, Clone, Args)]
pub struct DimsArgs {
    /// Case file: MATPOWER `.m` or JSON.
    #[arg(long, required_unless_present = "synthetic")]
    pub case: Option<PathBuf>,
    /// Without a partition the case is a single region.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Report one model only.
    #[arg(long)]
    pub model: Option<ModelVariant>,
    /// Generated fixture `BUSES,REGIONS,TIE_LINES` instead of a case file.
    #[arg(long, conflicts_with_all = ["case", "partition"])]
    pub synthetic: Option<String>,
}

#[derive(Debug, Default, Clone, Args)]
pub struct BenchArgs {
    /// Manifests naming a case and partition each.
    pub manifests: Vec<PathBuf>,
    #[command(flatten)]
    pub config: ConfigFlags,
    /// Also write one row per run (long format) to this CSV.
    #[arg(long)]
    pub long_out: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Args)]
pub struct ValidateArgs {
    /// Case file: MATPOWER `.m` or JSON.
    #[arg(long)]
    pub case: PathBuf,
    /// Partition file mapping bus ids to regions.
    #[arg(long)]
    pub partition: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match cli.command {
        Command::Solve(a) => cmd_solve(&a, out, err),
        Command::Dims(a) => cmd_dims(&a, out, err),
        Command::Bench(a) => cmd_bench(&a, out, err),
        Command::Validate(a) => cmd_validate(&a, out, err),
    }
}

macro_rules! fail {
    ($err:expr, $code:expr, $($fmt:tt)*) => {{
        let _ = writeln!($err, $($fmt)*);
        return $code;
    }};
}

pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let base = match &args.manifest {
        Some(p) => match RunManifest::load(p) {
            Ok(m) => m,
            Err(e) => fail!(err, EXIT_INPUT, "error: {e}"),
        },
        None => RunManifest::default(),
    };
    let plan = match RunPlan::from_manifest(base.overlay(args.as_manifest())) {
        Ok(p) => p,
        Err(e) => fail!(err, EXIT_INPUT, "error: {e}\n\n{}", usage_hint()),
    };
    let inputs = match Inputs::load(&plan) {
        Ok(i) => i,
        Err(e) => fail!(err, EXIT_INPUT, "error: {e}"),
    };
    let result = match execute(&plan, &inputs) {
        Ok(r) => r,
        Err(RunError::Input(e)) => fail!(err, EXIT_INPUT, "error: {e}"),
        Err(RunError::Solver(e)) => fail!(err, EXIT_NO_CONVERGENCE, "error: {e}"),
    };

    if let Some(path) = &plan.solution_out {
        let written = create(path).and_then(|mut f| {
            serde_json::to_writer_pretty(&mut f, &result.solution_file())?;
            f.flush()
        });
        if let Err(e) = written {
            fail!(err, EXIT_INPUT, "error: {}: {e}", path.display());
        }
    }
    if let (Some(path), Some(trace)) = (&plan.trace_out, &result.trace) {
        if let Err(e) = write_trace(trace, path) {
            fail!(err, EXIT_INPUT, "error: {}: {e}", path.display());
        }
    }
    let _ = writeln!(out, "{}", result.summary());
    if result.converged {
        EXIT_OK
    } else {
        EXIT_NO_CONVERGENCE
    }
}

fn usage_hint() -> &'static str {
    "usage: aladin-pf solve --case <FILE> [--partition <FILE>] [--algorithm centralized|aladin-standard|aladin-gn] [--model original|reduced]"
}

fn parse_synthetic(spec: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b, c] => {
            let n = |s: &str| s.parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
            Ok((n(a)?, n(b)?, n(c)?))
        }
        _ => Err(format!("expected BUSES,REGIONS,TIE_LINES, got {spec:?}")),
    }
}

/// Renders dimension reports as an aligned table.
pub fn dims_table(reports: &[DimensionReport]) -> String {
    let mut s = format!("{:<10} {:>8} {:>6} {:>7} {:>10}\n", "model", "buses", "n_reg", "n_conn", "dimension");
    for r in reports {
        s += &format!(
            "{:<10} {:>8} {:>6} {:>7} {:>10}\n",
            r.variant.to_string(),
            r.n_bus,
            r.n_reg,
            r.n_conn,
            r.dimension
        );
    }
    s
}

pub fn cmd_dims(args: &DimsArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (case, spec) = match (&args.synthetic, &args.case) {
        (Some(s), _) => match parse_synthetic(s).and_then(|(n, r, c)| dimension_fixture(n, r, c)) {
            Ok(cs) => cs,
            Err(e) => fail!(err, EXIT_INPUT, "error: {e}"),
        },
        (None, Some(path)) => {
            let case = match load_case(path) {
                Ok(c) => c,
                Err(e) => fail!(err, EXIT_INPUT, "error: {e}"),
            };
            let spec = match &args.partition {
                Some(p) => match load_partition(p, &case) {
                    Ok(s) => s,
                    Err(e) => fail!(err, EXIT_INPUT, "error: {e}"),
                },
                None => PartitionSpec::single_region(&case),
            };
            (case, spec)
        }
        (None, None) => fail!(err, EXIT_INPUT, "error: give --case or --synthetic"),
    };
    let variants = match args.model {
        Some(m) => vec![m],
        None => vec![ModelVariant::Reduced, ModelVariant::Original],
    };
    let mut reports = Vec::new();
    for v in variants {
        match DistributedProblem::new(&case, &spec, v) {
            Ok(p) => reports.push(p.dimension_report()),
            Err(e) => fail!(err, EXIT_INPUT, "error: {e}"),
        }
    }
    let json = serde_json::to_string(&reports).expect("reports serialize");
    let _ = writeln!(out, "{}{json}", dims_table(&reports));
    EXIT_OK
}

/// One row of the long benchmark table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub case: String,
    pub buses: usize,
    pub n_reg: usize,
    pub n_conn: usize,
    pub model: String,
    pub algorithm: String,
    pub dimension: Option<usize>,
    pub time_s: Option<f64>,
    pub iterations: Option<usize>,
    pub status: String,
}

const COMBOS: [(Algorithm, Option<ModelVariant>); 5] = [
    (Algorithm::AladinStandard, Some(ModelVariant::Original)),
    (Algorithm::AladinStandard, Some(ModelVariant::Reduced)),
    (Algorithm::AladinGn, Some(ModelVariant::Original)),
    (Algorithm::AladinGn, Some(ModelVariant::Reduced)),
    (Algorithm::Centralized, None),
];

/// Runs every algorithm/model pair on one fixture. Failures become rows
/// with a status instead of aborting the benchmark.
pub fn bench_fixture(manifest: &RunManifest) -> Result<Vec<BenchRow>, String> {
    let case_path = manifest.case.clone().ok_or("manifest has no case")?;
    let label = case_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut rows = Vec::new();
    for (algorithm, model) in COMBOS {
        let plan = RunPlan::from_manifest(RunManifest {
            algorithm: Some(algorithm),
            model,
            trace_out: None,
            solution_out: None,
            ..manifest.clone()
        })?;
        let inputs = Inputs::load(&plan).map_err(|e| e.to_string())?;
        let (n_reg, n_conn, dimension) = match (&inputs.spec, model) {
            (Some(spec), Some(m)) => {
                let r = DistributedProblem::new(&inputs.case, spec, m).map_err(|e| e.to_string())?.dimension_report();
                (r.n_reg, r.n_conn, Some(r.dimension))
            }
            _ => (1, 0, None),
        };
        let mut row = BenchRow {
            case: label.clone(),
            buses: inputs.case.n_bus(),
            n_reg,
            n_conn,
            model: model.map(|m| m.to_string()).unwrap_or_default(),
            algorithm: algorithm.to_string(),
            dimension,
            time_s: None,
            iterations: None,
            status: String::new(),
        };
        match execute(&plan, &inputs) {
            Ok(r) => {
                row.time_s = Some(r.wall_time_s);
                row.iterations = Some(r.solution.iterations);
                row.status = if r.converged { "ok".into() } else { "no-convergence".into() };
            }
            Err(RunError::Input(e)) => return Err(e),
            Err(RunError::Solver(e)) => row.status = format!("failed: {e}"),
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Folds the long rows of each fixture into one line: sizes, both
/// dimensions, a time per algorithm and model, and the centralized time.
pub fn pivot_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record([
        "case",
        "buses",
        "n_reg",
        "n_conn",
        "dim_original",
        "dim_reduced",
        "standard_original_s",
        "standard_reduced_s",
        "gn_original_s",
        "gn_reduced_s",
        "centralized_s",
        "failures",
    ]);
    let mut start = 0;
    while start < rows.len() {
        let case = &rows[start].case;
        let end = start + rows[start..].iter().take_while(|r| &r.case == case).count();
        let group = &rows[start..end];
        let find = |alg: &str, model: &str| group.iter().find(|r| r.algorithm == alg && r.model == model);
        let time = |alg: &str, model: &str| {
            find(alg, model)
                .filter(|r| r.status == "ok")
                .and_then(|r| r.time_s)
                .map(|t| format!("{t:.6}"))
                .unwrap_or_default()
        };
        let dim = |model: &str| {
            find("aladin-gn", model)
                .and_then(|r| r.dimension)
                .map(|d| d.to_string())
                .unwrap_or_default()
        };
        let distributed = group.iter().find(|r| r.dimension.is_some()).unwrap_or(&group[0]);
        let failures: Vec<String> = group
            .iter()
            .filter(|r| r.status != "ok")
            .map(|r| format!("{}/{}: {}", r.algorithm, r.model, r.status))
            .collect();
        let _ = w.write_record([
            case.clone(),
            distributed.buses.to_string(),
            distributed.n_reg.to_string(),
            distributed.n_conn.to_string(),
            dim("original"),
            dim("reduced"),
            time("aladin-standard", "original"),
            time("aladin-standard", "reduced"),
            time("aladin-gn", "original"),
            time("aladin-gn", "reduced"),
            time("centralized", ""),
            failures.join("; "),
        ]);
        start = end;
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    if args.manifests.is_empty() {
        fail!(err, EXIT_INPUT, "error: bench needs at least one manifest");
    }
    let flags = RunManifest {
        rho: args.config.rho,
        mu: args.config.mu,
        tol: args.config.tol,
        max_iter: args.config.max_iter,
        threads: args.config.threads,
        repeat: args.config.repeat,
        ..RunManifest::default()
    };
    let mut manifests = Vec::new();
    for path in &args.manifests {
        match RunManifest::load(path) {
            Ok(m) if m.partition.is_none() => {
                fail!(err, EXIT_INPUT, "error: {}: bench manifests need a partition", path.display())
            }
            Ok(m) => manifests.push(m.overlay(flags.clone())),
            Err(e) => fail!(err, EXIT_INPUT, "error: {e}"),
        }
    }
    let mut rows = Vec::new();
    for m in &manifests {
        match bench_fixture(m) {
            Ok(r) => rows.extend(r),
            Err(e) => fail!(err, EXIT_INPUT, "error: {e}"),
        }
    }
    if let Some(path) = &args.long_out {
        let written = create(path).and_then(|f| {
            let mut w = csv::Writer::from_writer(f);
            for r in &rows {
                w.serialize(r).map_err(std::io::Error::other)?;
            }
            w.flush()
        });
        if let Err(e) = written {
            fail!(err, EXIT_INPUT, "error: {}: {e}", path.display());
        }
    }
    let _ = write!(out, "{}", pivot_csv(&rows));
    if rows.iter().all(|r| r.status == "ok") {
        EXIT_OK
    } else {
        EXIT_NO_CONVERGENCE
    }
}

pub fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let case = match load_case(&args.case) {
        Ok(c) => c,
        Err(CaseError::Validation(diags)) => {
            for d in diags {
                let _ = writeln!(err, "{d}");
            }
            return EXIT_INPUT;
        }
        Err(e) => fail!(err, EXIT_INPUT, "error: {e}"),
    };
    // a case that loaded has passed validation; report what was read
    debug_assert!(validate_case(&case).is_empty());
    let mut line = format!(
        "ok: {} buses, {} generators, {} branches",
        case.n_bus(),
        case.gens.len(),
        case.branches.len()
    );
    if let Some(p) = &args.partition {
        match load_partition(p, &case) {
            Ok(spec) => line += &format!(", {} regions", spec.n_regions()),
            Err(CaseError::Validation(diags)) => {
                for d in diags {
                    let _ = writeln!(err, "{d}");
                }
                return EXIT_INPUT;
            }
            Err(e) => fail!(err, EXIT_INPUT, "error: {e}"),
        }
    }
    let _ = writeln!(out, "{line}");
    EXIT_OK
}
