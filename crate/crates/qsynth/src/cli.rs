//! Command-line driver: argument parsing, problem resolution, subcommands
//! and exit codes.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qsynth_core::cuts::CutSelection;
use qsynth_core::encoding::{fidelity, overlap, ComplexMatrix};
use qsynth_core::fingerprint::EqualityMode;
use qsynth_core::formulation::{
    build_model, relations_for, schedule_depth, synthesize, ApproxParams, Engine, SynthesisError, SynthesisObjective, SynthesisProblem,
    SynthesisResult,
};
use qsynth_core::gates::{builtin_matrix, embed, GateSet, GateSpec, RelationOptions};
use qsynth_core::mip::{SolverLimits, Status};
use qsynth_core::oracle::{overlap_stats, OracleError};
use qsynth_core::rho::{
    circuit_unitary, equivalence_fidelity, rolling_horizon_passes, MipWindowSolver, OracleWindowSolver, RhoConfig, RhoError, WindowAction,
    WindowSolver,
};

use crate::backend::HighsBackend;
use crate::fixtures;
use crate::formats::{
    finite, CircuitJson, CircuitSource, FormatError, GateCounts, GateJson, GateSetSpec, ModelSummary, ObjectiveName, PhaseModeName,
    ResultReport, RhoJson, RunConfig, TargetSpec, WindowJson,
};

pub const EXIT_OPTIMAL: i32 = 0;
pub const EXIT_FEASIBLE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_TIMEOUT: i32 = 4;
pub const EXIT_SCHEMA: i32 = 64;
pub const EXIT_BACKEND: i32 = 70;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Schema(_) => EXIT_SCHEMA,
            Self::Backend(_) => EXIT_BACKEND,
            Self::Io(_) => EXIT_IO,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io { .. } => Self::Schema(e.to_string()),
            other => Self::Schema(other.to_string()),
        }
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::InvalidProblem(_) | SynthesisError::Gate(_) | SynthesisError::Encoding(_) | SynthesisError::Cut(_) => {
                Self::Schema(e.to_string())
            }
            other => Self::Backend(other.to_string()),
        }
    }
}

impl From<RhoError> for CliError {
    fn from(e: RhoError) -> Self {
        match e {
            RhoError::Config(_) | RhoError::Gate(_) | RhoError::RepeatedQubit(_) => Self::Schema(e.to_string()),
            other => Self::Backend(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qsynth", version, about = "Optimal quantum circuit synthesis by mixed-integer programming")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Default)]
pub struct CommonArgs {
    /// JSON run configuration; repeat with `--jobs` for a batch.
    #[arg(long, global = true)]
    pub config: Vec<PathBuf>,
    /// `highs` or `exhaustive`.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Solver time limit in seconds.
    #[arg(long, global = true)]
    pub time_limit: Option<f64>,
    /// `all`, `none` or a comma list of identity,symmetry,redundancy,hc1,hc2.
    #[arg(long, global = true)]
    pub cuts: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub phase_mode: Option<PhaseModeName>,
    /// Where to write the JSON report (a directory in batch mode).
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Concurrent jobs when several configs are given.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Write the model in LP format before solving.
    #[arg(long, global = true, hide = true)]
    pub dump_lp: Option<PathBuf>,
    /// Suppress the human-readable summary.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args, Default)]
pub struct ProblemArgs {
    /// Built-in fixture name.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Position budget P.
    #[arg(long, short)]
    pub p: Option<usize>,
    /// Depth budget D.
    #[arg(long, short)]
    pub d: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact synthesis minimizing gate count or depth.
    Synthesize {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        /// `weighted_gate_count` or `depth`.
        #[arg(long)]
        objective: Option<String>,
    },
    /// Approximate synthesis maximizing fidelity.
    Approx {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        /// `linearized_fidelity`, `frobenius_oa` or `exact_fidelity`.
        #[arg(long)]
        objective: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Rolling-horizon optimization of a seed circuit.
    Rho {
        #[command(flatten)]
        common: CommonArgs,
        /// Seed circuit file or fixture (`k5`, `k4`, `brickwork`).
        #[arg(long)]
        seed_circuit: Option<String>,
        #[arg(long)]
        passes: Option<usize>,
    },
    /// Evaluates a circuit against a target without solving.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Circuit JSON (reports accepted) or QASM file.
        circuit: PathBuf,
        /// Target name or file; defaults to the configured target, else the identity.
        #[arg(long)]
        target: Option<String>,
    },
    /// Exact synthesis by exhaustive enumeration.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        objective: Option<String>,
    },
    /// Lists commuting pairs, equivalent patterns and redundancies of a gate set.
    Relations {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        /// Longest redundant sequence to search.
        #[arg(long, default_value_t = 3)]
        k_max: usize,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Self::Synthesize { common, .. }
            | Self::Approx { common, .. }
            | Self::Rho { common, .. }
            | Self::Verify { common, .. }
            | Self::Oracle { common, .. }
            | Self::Relations { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Synthesize { .. } => "synthesize",
            Self::Approx { .. } => "approx",
            Self::Rho { .. } => "rho",
            Self::Verify { .. } => "verify",
            Self::Oracle { .. } => "oracle",
            Self::Relations { .. } => "relations",
        }
    }
}

fn parse_objective(s: &str) -> Result<ObjectiveName, CliError> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| CliError::Schema(format!("unknown objective `{s}`")))
}

/// Merges a config file with flag overrides; flags win.
pub fn effective_config(cmd: &Command, file: Option<&Path>) -> Result<RunConfig, CliError> {
    let mut cfg = match file {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let common = cmd.common();
    if common.backend.is_some() {
        cfg.backend = common.backend.clone();
    }
    if common.time_limit.is_some() {
        cfg.time_limit = common.time_limit;
    }
    if common.cuts.is_some() {
        cfg.cuts = common.cuts.clone();
    }
    if common.phase_mode.is_some() {
        cfg.phase_mode = common.phase_mode;
    }
    let apply_problem = |cfg: &mut RunConfig, p: &ProblemArgs| {
        if p.fixture.is_some() {
            cfg.fixture = p.fixture.clone();
        }
        if p.p.is_some() {
            cfg.p = p.p;
        }
        if p.d.is_some() {
            cfg.d = p.d;
        }
        if p.seed.is_some() {
            cfg.seed = p.seed;
        }
    };
    match cmd {
        Command::Synthesize { problem, objective, .. } | Command::Oracle { problem, objective, .. } => {
            apply_problem(&mut cfg, problem);
            if let Some(o) = objective {
                cfg.objective = Some(parse_objective(o)?);
            }
        }
        Command::Approx { problem, objective, epsilon, k, .. } => {
            apply_problem(&mut cfg, problem);
            if let Some(o) = objective {
                cfg.objective = Some(parse_objective(o)?);
            }
            if epsilon.is_some() {
                cfg.epsilon = *epsilon;
            }
            if k.is_some() {
                cfg.k = *k;
            }
        }
        Command::Relations { problem, .. } => apply_problem(&mut cfg, problem),
        Command::Rho { seed_circuit, passes, .. } => {
            if let Some(r) = cfg.rho.as_mut() {
                if let Some(s) = seed_circuit {
                    r.seed = circuit_source(s);
                }
                if passes.is_some() {
                    r.passes = *passes;
                }
            } else if seed_circuit.is_some() || passes.is_some() {
                return Err(CliError::Schema("rho needs a `rho` section in the config".into()));
            }
        }
        Command::Verify { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn circuit_source(s: &str) -> CircuitSource {
    if Path::new(s).exists() {
        CircuitSource::File(s.into())
    } else {
        CircuitSource::Fixture(s.to_owned())
    }
}

fn builtin_target(name: &str, qubits: usize) -> Result<ComplexMatrix, CliError> {
    if name.eq_ignore_ascii_case("identity") {
        return Ok(ComplexMatrix::identity(1 << qubits));
    }
    if let Some(f) = fixtures::fixture(name) {
        return Ok(f.target);
    }
    if let Some(t) = fixtures::benchmark_target(name) {
        return Ok(t);
    }
    let (_, base) = builtin_matrix(name, None).map_err(|e| CliError::Schema(format!("unknown target `{name}`: {e}")))?;
    let arity = base.num_qubits().map_err(|e| CliError::Schema(e.to_string()))?;
    let qs: Vec<usize> = (1..=arity).collect();
    embed(&base, &qs, qubits.max(arity)).map_err(|e| CliError::Schema(e.to_string()))
}

fn load_target_file(path: &Path) -> Result<ComplexMatrix, CliError> {
    let text = crate::formats::read(path)?;
    if let Ok(c) = CircuitJson::from_str(&text, "target") {
        return Ok(circuit_unitary(&c.to_specs()?, c.qubits)?);
    }
    if let Ok(t) = serde_json::from_str::<TargetSpec>(&text) {
        if let TargetSpec::Matrix(m) = t {
            return Ok(crate::formats::matrix_from_json(&m)?);
        }
    }
    let m: crate::formats::MatrixJson =
        serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: not a circuit or matrix: {e}", path.display())))?;
    Ok(crate::formats::matrix_from_json(&m)?)
}

fn resolve_target(spec: &TargetSpec, qubits: usize) -> Result<ComplexMatrix, CliError> {
    match spec {
        TargetSpec::Name(n) => builtin_target(n, qubits),
        TargetSpec::File(p) => load_target_file(p),
        TargetSpec::Matrix(m) => Ok(crate::formats::matrix_from_json(m)?),
        TargetSpec::Circuit(gates) => {
            let specs = gates.iter().map(GateJson::to_spec).collect::<Result<Vec<_>, _>>()?;
            Ok(circuit_unitary(&specs, qubits)?)
        }
    }
}

fn max_qubit(gates: &[GateSpec]) -> usize {
    gates.iter().flat_map(|g| g.qubits.iter().copied()).max().unwrap_or(1)
}

/// Builds the synthesis problem described by `cfg`.
pub fn resolve_problem(cfg: &RunConfig) -> Result<SynthesisProblem, CliError> {
    let fixture = match &cfg.fixture {
        Some(name) => Some(fixtures::fixture(name).ok_or_else(|| {
            CliError::Schema(format!("unknown fixture `{name}` (known: {})", fixtures::fixture_names().join(", ")))
        })?),
        None => None,
    };
    let gates: Vec<GateSpec> = match (&cfg.gate_set, &fixture) {
        (Some(GateSetSpec::Gates(g)), _) => g.iter().map(GateJson::to_spec).collect::<Result<_, _>>()?,
        (Some(GateSetSpec::File(p)), _) => CircuitJson::load(p)?.to_specs()?,
        (None, Some(f)) => f.gates.clone(),
        (None, None) => return Err(CliError::Schema("no gate set: give `gate_set` or `fixture`".into())),
    };
    let qubits = cfg.qubits.or(fixture.as_ref().map(|f| f.qubits)).unwrap_or_else(|| max_qubit(&gates));
    let target = match (&cfg.target, &fixture) {
        (Some(t), _) => resolve_target(t, qubits)?,
        (None, Some(f)) => f.target.clone(),
        (None, None) => return Err(CliError::Schema("no target: give `target` or `fixture`".into())),
    };
    let p = cfg.p.or(fixture.as_ref().map(|f| f.p)).ok_or_else(|| CliError::Schema("no position budget `p`".into()))?;
    let gs = GateSet::new(qubits, &gates, EqualityMode::Exact).map_err(|e| CliError::Schema(e.to_string()))?;
    let mut prob = SynthesisProblem::new(target, gs, p);
    prob.d = cfg.d;
    if let Some(o) = cfg.objective {
        prob.objective = o.into();
    }
    if let Some(m) = cfg.phase_mode {
        prob.phase_mode = m.into();
    }
    if let Some(w) = &cfg.weights {
        let mut w = w.clone();
        if w.len() == gates.len() && prob.gate_set.len() == gates.len() + 1 {
            w.insert(prob.gate_set.identity_index(), 0.0);
        }
        prob.weights = Some(w);
    }
    prob.approx = ApproxParams { epsilon: cfg.epsilon.unwrap_or(ApproxParams::default().epsilon), k: cfg.k.unwrap_or(ApproxParams::default().k) };
    if let Some(c) = &cfg.cuts {
        prob.cuts = CutSelection::parse(c).map_err(CliError::Schema)?;
    }
    if let Some(b) = cfg.normalize_su {
        prob.normalize_su = b;
    }
    if let Some(b) = cfg.hull_tightening {
        prob.hull_tightening = b;
    }
    Ok(prob)
}

fn backend_for(cfg: &RunConfig) -> HighsBackend {
    let limits = SolverLimits { time_limit_s: cfg.time_limit, seed: Some(cfg.seed.unwrap_or(0)), ..SolverLimits::default() };
    HighsBackend::new(limits)
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Optimal => "optimal",
        Status::Feasible => "feasible",
        Status::Infeasible => "infeasible",
        Status::TimeLimit => "time_limit",
        Status::Unsupported => "unsupported",
    }
}

pub fn exit_code_for(s: Status) -> i32 {
    match s {
        Status::Optimal => EXIT_OPTIMAL,
        Status::Feasible => EXIT_FEASIBLE,
        Status::Infeasible => EXIT_INFEASIBLE,
        Status::TimeLimit => EXIT_TIMEOUT,
        Status::Unsupported => EXIT_BACKEND,
    }
}

const CUT_TAGS: [&str; 6] = ["identity", "commuting", "equivalent", "redundancy", "hc1", "hc2"];

/// Fidelity figures of `gates` against `target`, all recomputed from the circuit.
struct Figures {
    fidelity: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    frobenius_sq: Option<f64>,
    lower_bound: Option<f64>,
}

fn figures(gates: &[GateSpec], qubits: usize, target: &ComplexMatrix) -> Result<Figures, CliError> {
    let u = circuit_unitary(gates, qubits)?;
    if u.dim() != target.dim() {
        return Err(CliError::Schema(format!("circuit has dimension {}, target {}", u.dim(), target.dim())));
    }
    let ov = overlap(&u, target);
    let (_, fro, _) = overlap_stats(&u, target);
    let scale = 4.0 * u.dim() as f64;
    Ok(Figures {
        fidelity: fidelity(&u, target).ok(),
        alpha: Some(ov.re),
        beta: Some(ov.im),
        frobenius_sq: Some(fro),
        lower_bound: Some((1.0 - fro / scale).max(0.0).powi(2)),
    })
}

fn report_for_result(cmd: &str, cfg: &RunConfig, prob: &SynthesisProblem, r: &SynthesisResult, wall: f64) -> Result<ResultReport, CliError> {
    let qubits = prob.gate_set.num_qubits();
    let fig = if r.has_solution() { Some(figures(&r.sequence, qubits, &prob.target)?) } else { None };
    let (depth, schedule) = schedule_depth(&r.sequence.iter().map(|g| g.qubits.clone()).collect::<Vec<_>>());
    let cut_counts: BTreeMap<String, usize> =
        r.stats.constraint_counts.iter().filter(|(k, _)| CUT_TAGS.contains(&k.as_str())).cloned().collect();
    Ok(ResultReport {
        command: cmd.into(),
        config: cfg.clone(),
        status: status_name(r.certificate.status).into(),
        qubits,
        gates: r.sequence.iter().map(GateJson::from_spec).collect(),
        counts: GateCounts::of(&r.sequence),
        depth,
        schedule,
        objective_value: finite(r.objective_value),
        bound: finite(r.certificate.bound),
        gap: finite(r.certificate.gap),
        fidelity: fig.as_ref().and_then(|f| f.fidelity),
        alpha: fig.as_ref().and_then(|f| f.alpha),
        beta: fig.as_ref().and_then(|f| f.beta),
        frobenius_sq: fig.as_ref().and_then(|f| f.frobenius_sq),
        fidelity_lower_bound: fig.as_ref().and_then(|f| f.lower_bound),
        global_phase: r.global_phase.map(|(a, b)| [a, b]),
        wall_clock_s: wall,
        cut_counts,
        model: Some(ModelSummary {
            engine: r.stats.engine.clone(),
            variables: r.stats.num_vars,
            binaries: r.stats.num_binaries,
            constraints: r.stats.num_constraints,
            fallback: r.stats.fallback,
        }),
        rho: None,
        warnings: r.warnings.clone(),
    })
}

fn run_synthesis(cmd: &Command, cfg: &RunConfig) -> Result<(ResultReport, i32), CliError> {
    let start = Instant::now();
    let mut prob = resolve_problem(cfg)?;
    let approx = matches!(cmd, Command::Approx { .. });
    if approx && cfg.objective.is_none() {
        prob.objective = SynthesisObjective::FrobeniusOa;
    }
    if approx != prob.objective.is_approximate() {
        let expected = if approx { "an approximate objective" } else { "weighted_gate_count or depth" };
        return Err(CliError::Schema(format!("`{}` needs {expected}", cmd.name())));
    }
    let common = cmd.common();
    let exhaustive = matches!(cmd, Command::Oracle { .. }) || cfg.backend.as_deref() == Some("exhaustive");
    if let Some(path) = &common.dump_lp {
        let (p, _) = prob.prepare()?;
        let catalog = relations_for(&p)?;
        let (model, _) = build_model(&p, catalog.as_ref())?;
        std::fs::write(path, model.to_lp_string()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    let backend = backend_for(cfg);
    let engine = if exhaustive { Engine::Exhaustive(prob.oracle_limits) } else { Engine::Mip(&backend) };
    let result = match synthesize(&prob, engine) {
        Ok(r) => r,
        Err(SynthesisError::Oracle(OracleError::Inconclusive { .. })) => {
            return Err(CliError::Backend("exhaustive search exceeded its node budget".into()));
        }
        Err(e) => return Err(e.into()),
    };
    let report = report_for_result(cmd.name(), cfg, &prob, &result, start.elapsed().as_secs_f64())?;
    Ok((report, exit_code_for(result.certificate.status)))
}

fn load_seed(src: &CircuitSource) -> Result<(usize, Vec<GateSpec>), CliError> {
    match src {
        CircuitSource::Fixture(name) => {
            fixtures::seed_circuit(name).ok_or_else(|| CliError::Schema(format!("unknown seed circuit `{name}`")))
        }
        CircuitSource::File(p) => {
            let c = CircuitJson::load(p)?;
            Ok((c.qubits, c.to_specs()?))
        }
    }
}

fn run_rho(cfg: &RunConfig) -> Result<(ResultReport, i32), CliError> {
    let start = Instant::now();
    let section = cfg.rho.as_ref().ok_or_else(|| CliError::Schema("rho needs a `rho` section in the config".into()))?;
    let (qubits, seed) = load_seed(&section.seed)?;
    let templates = section.elementary_gates.iter().map(GateJson::to_spec).collect::<Result<Vec<_>, _>>()?;
    let mut rc = RhoConfig::new(section.window_length, section.accept_window, section.max_qubits, templates);
    rc.passes = section.passes.unwrap_or(1);
    if let Some(m) = section.window_mode {
        rc.window_mode = m.into();
    }
    let backend = backend_for(cfg);
    let cuts = match &cfg.cuts {
        Some(c) => CutSelection::parse(c).map_err(CliError::Schema)?,
        None => CutSelection::default(),
    };
    let mut oracle = OracleWindowSolver::default();
    let mut milp = MipWindowSolver { backend: &backend, cuts };
    let solver: &mut dyn WindowSolver = match section.window_solver.as_deref() {
        Some("milp") => &mut milp,
        _ => &mut oracle,
    };
    let out = rolling_horizon_passes(&seed, &rc, solver)?;
    let eq = equivalence_fidelity(&seed, &out.gates)?;
    let target = circuit_unitary(&seed, qubits)?;
    let fig = figures(&out.gates, qubits, &target)?;
    let (depth, schedule) = schedule_depth(&out.gates.iter().map(|g| g.qubits.clone()).collect::<Vec<_>>());
    let windows = out
        .windows
        .iter()
        .map(|w| WindowJson {
            pass: w.pass,
            positions: w.positions.clone(),
            qubits: w.qubits.clone(),
            before: w.before,
            after: w.after,
            accepted: w.accepted,
            action: match w.action {
                WindowAction::PassThrough => "pass_through",
                WindowAction::Optimized => "optimized",
                WindowAction::Unsolved => "unsolved",
            }
            .into(),
            note: w.note.clone(),
        })
        .collect();
    let report = ResultReport {
        command: "rho".into(),
        config: cfg.clone(),
        status: "feasible".into(),
        qubits,
        gates: out.gates.iter().map(GateJson::from_spec).collect(),
        counts: GateCounts::of(&out.gates),
        depth,
        schedule,
        objective_value: Some(out.gates.len() as f64),
        bound: None,
        gap: None,
        fidelity: fig.fidelity,
        alpha: fig.alpha,
        beta: fig.beta,
        frobenius_sq: fig.frobenius_sq,
        fidelity_lower_bound: fig.lower_bound,
        global_phase: None,
        wall_clock_s: start.elapsed().as_secs_f64(),
        cut_counts: BTreeMap::new(),
        model: None,
        rho: Some(RhoJson { seed_gates: seed.len(), pass_counts: out.pass_counts.clone(), equivalence_fidelity: eq, windows }),
        warnings: out.warnings.clone(),
    };
    Ok((report, EXIT_FEASIBLE))
}

/// Evaluates `circuit` against `target` with no solving.
pub fn verify_circuit(circuit: &CircuitJson, target: &ComplexMatrix, cfg: &RunConfig) -> Result<ResultReport, CliError> {
    let start = Instant::now();
    let gates = circuit.to_specs()?;
    let fig = figures(&gates, circuit.qubits, target)?;
    let (depth, schedule) = schedule_depth(&gates.iter().map(|g| g.qubits.clone()).collect::<Vec<_>>());
    Ok(ResultReport {
        command: "verify".into(),
        config: cfg.clone(),
        status: "verified".into(),
        qubits: circuit.qubits,
        gates: circuit.gates.clone(),
        counts: GateCounts::of(&gates),
        depth,
        schedule,
        objective_value: None,
        bound: None,
        gap: None,
        fidelity: fig.fidelity,
        alpha: fig.alpha,
        beta: fig.beta,
        frobenius_sq: fig.frobenius_sq,
        fidelity_lower_bound: fig.lower_bound,
        global_phase: None,
        wall_clock_s: start.elapsed().as_secs_f64(),
        cut_counts: BTreeMap::new(),
        model: None,
        rho: None,
        warnings: Vec::new(),
    })
}

fn run_verify(circuit: &Path, target: Option<&str>, cfg: &RunConfig) -> Result<(ResultReport, i32), CliError> {
    let c = CircuitJson::load(circuit)?;
    let t = match (target, &cfg.target) {
        (Some(s), _) if Path::new(s).exists() => load_target_file(Path::new(s))?,
        (Some(s), _) => builtin_target(s, c.qubits)?,
        (None, Some(spec)) => resolve_target(spec, c.qubits)?,
        (None, None) => match &cfg.fixture {
            Some(f) => builtin_target(f, c.qubits)?,
            None => ComplexMatrix::identity(1 << c.qubits),
        },
    };
    Ok((verify_circuit(&c, &t, cfg)?, EXIT_OPTIMAL))
}

fn run_relations(cfg: &RunConfig, k_max: usize) -> Result<(serde_json::Value, i32), CliError> {
    let prob = resolve_problem(cfg)?;
    let opts = RelationOptions { k_max, mode: prob.relation_mode(), ..RelationOptions::default() };
    let cat = qsynth_core::gates::detect_relations_with(&prob.gate_set, &opts).map_err(|e| CliError::Schema(e.to_string()))?;
    let label = |k: usize| prob.gate_set.gate(k).spec.label();
    let seq = |s: &[usize]| s.iter().map(|&k| label(k)).collect::<Vec<_>>();
    let value = serde_json::json!({
        "gates": (0..prob.gate_set.len()).map(label).collect::<Vec<_>>(),
        "mode": format!("{:?}", opts.mode),
        "commuting_pairs": cat.commuting_pairs.iter().map(|&(a, b)| [label(a), label(b)]).collect::<Vec<_>>(),
        "equivalent_pairs": cat.equivalent_pairs.iter().map(|(f, k)| serde_json::json!({"forbidden": seq(f), "kept": seq(k)})).collect::<Vec<_>>(),
        "equivalent_triplets": cat.equivalent_triplets.iter().map(|(f, k)| serde_json::json!({"forbidden": seq(f), "kept": seq(k)})).collect::<Vec<_>>(),
        "redundancies": cat.redundancies.iter().map(|r| serde_json::json!({"sequence": seq(&r.sequence), "replacement": label(r.replacement)})).collect::<Vec<_>>(),
        "k_max": cat.k_max,
        "warnings": cat.warnings,
    });
    Ok((value, EXIT_OPTIMAL))
}

fn summary(r: &ResultReport) -> String {
    let mut s = format!("{}: {} | {} gates, depth {}", r.command, r.status, r.counts.total, r.depth);
    if let Some(f) = r.fidelity {
        s += &format!(", fidelity {f:.9}");
    }
    if let Some(o) = r.objective_value {
        s += &format!(", objective {o}");
    }
    if let Some(rho) = &r.rho {
        s += &format!(", passes {:?} from {}", rho.pass_counts, rho.seed_gates);
    }
    s += &format!(" ({:.2}s)", r.wall_clock_s);
    let gates: Vec<String> = r.gates.iter().map(|g| g.to_spec().map(|s| s.label()).unwrap_or_else(|_| g.name.clone())).collect();
    if !gates.is_empty() {
        s += &format!("\n  {}", gates.join(" "));
    }
    for w in &r.warnings {
        s += &format!("\n  warning: {w}");
    }
    s
}

/// Runs one configuration and returns the JSON output and exit code.
fn run_one(cmd: &Command, file: Option<&Path>) -> Result<(serde_json::Value, String, i32), CliError> {
    let cfg = effective_config(cmd, file)?;
    let (report, code) = match cmd {
        Command::Synthesize { .. } | Command::Approx { .. } | Command::Oracle { .. } => run_synthesis(cmd, &cfg)?,
        Command::Rho { .. } => run_rho(&cfg)?,
        Command::Verify { circuit, target, .. } => run_verify(circuit, target.as_deref(), &cfg)?,
        Command::Relations { k_max, .. } => {
            let (v, code) = run_relations(&cfg, *k_max)?;
            let text = serde_json::to_string_pretty(&v).expect("json");
            return Ok((v, text, code));
        }
    };
    let text = summary(&report);
    Ok((serde_json::to_value(&report).expect("json"), text, code))
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<(), CliError> {
    std::fs::write(path, serde_json::to_string_pretty(v).expect("json") + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_SCHEMA,
            };
        }
    };
    let common = cli.command.common().clone();
    let configs: Vec<Option<PathBuf>> = if common.config.is_empty() { vec![None] } else { common.config.iter().cloned().map(Some).collect() };
    if configs.len() == 1 {
        return match run_one(&cli.command, configs[0].as_deref()) {
            Ok((v, text, code)) => {
                if !common.quiet {
                    let _ = writeln!(std::io::stdout(), "{text}");
                }
                if let Some(p) = &common.report {
                    if let Err(e) = write_json(p, &v) {
                        eprintln!("error: {e}");
                        return e.exit_code();
                    }
                }
                code
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        };
    }
    run_batch(&cli.command, &configs, &common)
}

/// Runs several configurations on `--jobs` worker threads. Reports go to
/// `<report dir>/<config stem>.json`; the exit code is the largest one.
fn run_batch(cmd: &Command, configs: &[Option<PathBuf>], common: &CommonArgs) -> i32 {
    if let Some(dir) = &common.report {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("error: {}: {e}", dir.display());
            return EXIT_IO;
        }
    }
    let next = AtomicUsize::new(0);
    let codes = Mutex::new(vec![0; configs.len()]);
    std::thread::scope(|s| {
        for _ in 0..common.jobs.clamp(1, configs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(file) = configs.get(i) else { break };
                let path = file.as_deref();
                let label = path.map(|p| p.display().to_string()).unwrap_or_default();
                let code = match run_one(cmd, path) {
                    Ok((v, text, code)) => {
                        if !common.quiet {
                            let _ = writeln!(std::io::stdout(), "[{label}] {text}");
                        }
                        let out = common.report.as_ref().zip(path.and_then(Path::file_stem)).map(|(d, stem)| d.join(stem).with_extension("json"));
                        match out.map(|p| write_json(&p, &v)) {
                            Some(Err(e)) => {
                                eprintln!("[{label}] error: {e}");
                                e.exit_code()
                            }
                            _ => code,
                        }
                    }
                    Err(e) => {
                        eprintln!("[{label}] error: {e}");
                        e.exit_code()
                    }
                };
                codes.lock().expect("no poisoned lock")[i] = code;
            });
        }
    });
    codes.into_inner().expect("no poisoned lock").into_iter().max().unwrap_or(0)
}
