//! JSON circuits, gate sets, run configurations and result reports, plus a
//! small OpenQASM 2 importer for named gates.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qsynth_core::cuts::CutSelection;
use qsynth_core::encoding::{ComplexMatrix, C64};
use qsynth_core::formulation::{PhaseMode, SynthesisObjective};
use qsynth_core::gates::{GateError, GateSpec};
use qsynth_core::rho::WindowMode;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("cannot read `{path}`: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid JSON in {what}: {source}")]
    Json { what: String, source: serde_json::Error },
    #[error("invalid gate: {0}")]
    Gate(#[from] GateError),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("QASM line {line}: {message}")]
    Qasm { line: usize, message: String },
}

/// Complex entries are written as `[re, im]` pairs, row-major.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateJson {
    pub name: String,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    /// Explicit base matrix for gates outside the built-in library.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixJson>,
}

impl GateJson {
    pub fn to_spec(&self) -> Result<GateSpec, FormatError> {
        match &self.matrix {
            Some(m) => Ok(GateSpec::new(&self.name, &self.qubits, self.angle, matrix_from_json(m)?)?),
            None => Ok(GateSpec::builtin(&self.name, &self.qubits, self.angle)?),
        }
    }

    /// Serializes `spec`, embedding its matrix only when the name is not a built-in.
    pub fn from_spec(spec: &GateSpec) -> Self {
        let builtin = qsynth_core::gates::builtin_matrix(&spec.name, spec.param)
            .map(|(_, m)| m.approx_eq(&spec.base_matrix, 1e-12))
            .unwrap_or(false);
        Self {
            name: spec.name.clone(),
            qubits: spec.qubits.clone(),
            angle: spec.param,
            matrix: (!builtin).then(|| matrix_to_json(&spec.base_matrix)),
        }
    }
}

pub fn matrix_from_json(m: &MatrixJson) -> Result<ComplexMatrix, FormatError> {
    let rows = m.iter().map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect()).collect();
    ComplexMatrix::from_rows(rows).map_err(|e| FormatError::Schema(e.to_string()))
}

pub fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    (0..m.dim()).map(|i| (0..m.dim()).map(|j| [m.get(i, j).re, m.get(i, j).im]).collect()).collect()
}

/// A gate list on `qubits` qubits. Unknown top-level keys are ignored so
/// that result reports load as circuits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitJson {
    pub qubits: usize,
    pub gates: Vec<GateJson>,
}

impl CircuitJson {
    pub fn from_specs(qubits: usize, specs: &[GateSpec]) -> Self {
        Self { qubits, gates: specs.iter().map(GateJson::from_spec).collect() }
    }

    pub fn to_specs(&self) -> Result<Vec<GateSpec>, FormatError> {
        let specs = self.gates.iter().map(GateJson::to_spec).collect::<Result<Vec<_>, _>>()?;
        for s in &specs {
            if let Some(&q) = s.qubits.iter().find(|&&q| q == 0 || q > self.qubits) {
                return Err(FormatError::Schema(format!("gate {} uses qubit {q} outside 1..={}", s.label(), self.qubits)));
            }
        }
        Ok(specs)
    }

    pub fn from_str(text: &str, what: &str) -> Result<Self, FormatError> {
        serde_json::from_str(text).map_err(|source| FormatError::Json { what: what.to_owned(), source })
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        let text = read(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("qasm")) {
            return parse_qasm(&text);
        }
        Self::from_str(&text, &path.display().to_string())
    }
}

pub fn read(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.to_owned(), source })
}

/// Where the target unitary comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// A built-in gate acting on qubits `1..=arity`, or a named fixture target.
    Name(String),
    /// A circuit or matrix JSON file.
    File(PathBuf),
    Matrix(MatrixJson),
    /// The product of a gate list.
    Circuit(Vec<GateJson>),
}

/// Where the elementary gates come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GateSetSpec {
    File(PathBuf),
    Gates(Vec<GateJson>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveName {
    WeightedGateCount,
    Depth,
    LinearizedFidelity,
    FrobeniusOa,
    ExactFidelity,
}

impl From<ObjectiveName> for SynthesisObjective {
    fn from(o: ObjectiveName) -> Self {
        match o {
            ObjectiveName::WeightedGateCount => Self::WeightedGateCount,
            ObjectiveName::Depth => Self::Depth,
            ObjectiveName::LinearizedFidelity => Self::LinearizedFidelity,
            ObjectiveName::FrobeniusOa => Self::FrobeniusOa,
            ObjectiveName::ExactFidelity => Self::ExactFidelity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PhaseModeName {
    Exact,
    Global,
}

impl From<PhaseModeName> for PhaseMode {
    fn from(p: PhaseModeName) -> Self {
        match p {
            PhaseModeName::Exact => Self::Exact,
            PhaseModeName::Global => Self::GlobalPhase,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowModeName {
    Exact,
    GlobalPhase,
    SuNormalized,
}

impl From<WindowModeName> for WindowMode {
    fn from(w: WindowModeName) -> Self {
        match w {
            WindowModeName::Exact => Self::Exact,
            WindowModeName::GlobalPhase => Self::GlobalPhase,
            WindowModeName::SuNormalized => Self::SuNormalized,
        }
    }
}

/// Rolling-horizon settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoSection {
    /// Seed circuit: a fixture name or circuit file.
    pub seed: CircuitSource,
    pub window_length: usize,
    pub accept_window: usize,
    pub max_qubits: usize,
    /// Gate templates (qubits only fix the arity).
    pub elementary_gates: Vec<GateJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_mode: Option<WindowModeName>,
    /// `oracle` (default) or `milp`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_solver: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CircuitSource {
    Fixture(String),
    File(PathBuf),
}

/// Everything a run needs. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Loads target, gate set and `p` from the built-in registry; explicit fields override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_set: Option<GateSetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_mode: Option<PhaseModeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// `"all"`, `"none"` or a comma-separated family list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cuts: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize_su: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hull_tightening: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<RhoSection>,
}

impl RunConfig {
    pub fn from_str(text: &str, what: &str) -> Result<Self, FormatError> {
        serde_json::from_str(text).map_err(|source| FormatError::Json { what: what.to_owned(), source })
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        Self::from_str(&read(path)?, &path.display().to_string())
    }

    /// Schema checks that need no file access.
    pub fn validate(&self) -> Result<(), FormatError> {
        let bad = |m: String| Err(FormatError::Schema(m));
        if self.qubits == Some(0) {
            return bad("qubits must be at least 1".into());
        }
        if self.p == Some(0) {
            return bad("p must be at least 1".into());
        }
        if self.d == Some(0) {
            return bad("d must be at least 1".into());
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return bad(format!("epsilon must be positive, got {e}"));
            }
        }
        if let Some(k) = self.k {
            if k < 2 {
                return bad(format!("k must be at least 2, got {k}"));
            }
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return bad(format!("time_limit must be positive, got {t}"));
            }
        }
        if let Some(w) = &self.weights {
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return bad("weights must be finite and non-negative".into());
            }
        }
        if let Some(c) = &self.cuts {
            CutSelection::parse(c).map_err(FormatError::Schema)?;
        }
        if let Some(b) = &self.backend {
            if !crate::backend::BACKENDS.contains(&b.as_str()) {
                return bad(format!("unknown backend `{b}` (expected one of {:?})", crate::backend::BACKENDS));
            }
        }
        if let Some(r) = &self.rho {
            if r.window_length == 0 || r.accept_window == 0 || r.accept_window > r.window_length || r.max_qubits == 0 {
                return bad("rho needs 1 <= accept_window <= window_length and max_qubits >= 1".into());
            }
            if r.passes == Some(0) {
                return bad("rho passes must be at least 1".into());
            }
            if let Some(s) = &r.window_solver {
                if s != "oracle" && s != "milp" {
                    return bad(format!("unknown window_solver `{s}`"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GateCounts {
    pub total: usize,
    pub per_gate: BTreeMap<String, usize>,
    pub entangling: usize,
    pub t_count: usize,
}

impl GateCounts {
    pub fn of(gates: &[GateSpec]) -> Self {
        let mut per_gate = BTreeMap::new();
        for g in gates {
            *per_gate.entry(g.name.clone()).or_insert(0) += 1;
        }
        Self {
            total: gates.len(),
            per_gate,
            entangling: gates.iter().filter(|g| g.arity() >= 2).count(),
            t_count: gates.iter().filter(|g| g.name == "T" || g.name == "Tdg").count(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub engine: String,
    pub variables: usize,
    pub binaries: usize,
    pub constraints: usize,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowJson {
    pub pass: usize,
    pub positions: Vec<usize>,
    pub qubits: Vec<usize>,
    pub before: usize,
    pub after: usize,
    pub accepted: usize,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoJson {
    pub seed_gates: usize,
    pub pass_counts: Vec<usize>,
    pub equivalence_fidelity: f64,
    pub windows: Vec<WindowJson>,
}

/// Machine-readable outcome of any subcommand. `qubits` and `gates` make
/// it loadable as a circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultReport {
    pub command: String,
    pub config: RunConfig,
    pub status: String,
    pub qubits: usize,
    pub gates: Vec<GateJson>,
    pub counts: GateCounts,
    pub depth: usize,
    /// Layer of each gate, 1-based.
    pub schedule: Vec<usize>,
    pub objective_value: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub fidelity: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub frobenius_sq: Option<f64>,
    pub fidelity_lower_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_phase: Option<[f64; 2]>,
    pub wall_clock_s: f64,
    pub cut_counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<RhoJson>,
    pub warnings: Vec<String>,
}

impl ResultReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_str(text: &str) -> Result<Self, FormatError> {
        serde_json::from_str(text).map_err(|source| FormatError::Json { what: "report".into(), source })
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|source| FormatError::Io { path: path.to_owned(), source })
    }
}

/// Finite values only; NaN and infinities become `None`.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Reads `OPENQASM 2.0` gate statements such as `cx q[0],q[2];` or
/// `rz(pi/2) q[1];`. Register indices are 0-based and become qubits 1, 2, ...
pub fn parse_qasm(text: &str) -> Result<CircuitJson, FormatError> {
    let mut qubits = 0usize;
    let mut gates = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split("//").next().unwrap_or("").trim();
        let err = |message: String| FormatError::Qasm { line: n + 1, message };
        for stmt in line.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let lower = stmt.to_ascii_lowercase();
            if lower.starts_with("openqasm") || lower.starts_with("include") || lower.starts_with("barrier") {
                continue;
            }
            if let Some(rest) = lower.strip_prefix("qreg") {
                if qubits > 0 {
                    return Err(err("only one quantum register is supported".into()));
                }
                qubits = register_index(rest.trim()).map_err(&err)?.1;
                continue;
            }
            if lower.starts_with("creg") || lower.starts_with("measure") || lower.starts_with("if") || lower.starts_with("gate") {
                return Err(err(format!("unsupported statement `{stmt}`")));
            }
            let (head, args) = match stmt.find(|ch: char| ch.is_whitespace() || ch == '(') {
                Some(k) if stmt[k..].starts_with('(') => {
                    let close = stmt.find(')').ok_or_else(|| err("unclosed parameter list".into()))?;
                    (&stmt[..close + 1], stmt[close + 1..].trim())
                }
                Some(k) => (&stmt[..k], stmt[k..].trim()),
                None => return Err(err(format!("gate without operands `{stmt}`"))),
            };
            let (name, angle) = match head.find('(') {
                Some(k) => (&head[..k], Some(eval_angle(&head[k + 1..head.len() - 1]).map_err(&err)?)),
                None => (head, None),
            };
            let name = match name.to_ascii_lowercase().as_str() {
                "cx" => "CNOT".to_owned(),
                "u1" | "p" => "P".to_owned(),
                "id" => "I".to_owned(),
                "sdg" => "Sdg".to_owned(),
                "tdg" => "Tdg".to_owned(),
                "sx" => "SX".to_owned(),
                "sxdg" => "SXdg".to_owned(),
                "csx" => "CV".to_owned(),
                "iswap" => "iSWAP".to_owned(),
                other => other.to_ascii_uppercase(),
            };
            let qs = args
                .split(',')
                .map(|a| register_index(a.trim()).map(|(_, i)| i + 1))
                .collect::<Result<Vec<_>, _>>()
                .map_err(&err)?;
            if qubits == 0 {
                return Err(err("gate before qreg declaration".into()));
            }
            if let Some(q) = qs.iter().find(|&&q| q > qubits) {
                return Err(err(format!("qubit index {} outside register of size {qubits}", q - 1)));
            }
            GateSpec::builtin(&name, &qs, angle).map_err(|e| err(e.to_string()))?;
            gates.push(GateJson { name, qubits: qs, angle, matrix: None });
        }
    }
    if qubits == 0 {
        return Err(FormatError::Qasm { line: 0, message: "no qreg declaration".into() });
    }
    Ok(CircuitJson { qubits, gates })
}

fn register_index(s: &str) -> Result<(&str, usize), String> {
    let open = s.find('[').ok_or_else(|| format!("expected `name[index]`, got `{s}`"))?;
    let close = s.find(']').ok_or_else(|| format!("expected `name[index]`, got `{s}`"))?;
    let idx = s[open + 1..close].trim().parse::<usize>().map_err(|e| format!("bad index in `{s}`: {e}"))?;
    Ok((s[..open].trim(), idx))
}

/// Angles of the form `x`, `pi`, `-pi/4`, `3*pi/8` or `0.25*pi`.
fn eval_angle(s: &str) -> Result<f64, String> {
    let s = s.trim().replace(' ', "");
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b.to_owned()),
        None => (false, s.clone()),
    };
    let (num, den) = match body.split_once('/') {
        Some((a, b)) => (a.to_owned(), b.parse::<f64>().map_err(|_| format!("bad angle `{s}`"))?),
        None => (body.clone(), 1.0),
    };
    let mut value = 1.0;
    for factor in num.split('*') {
        value *= match factor {
            "pi" => std::f64::consts::PI,
            f => f.parse::<f64>().map_err(|_| format!("bad angle `{s}`"))?,
        };
    }
    Ok(if neg { -value } else { value } / den)
}
