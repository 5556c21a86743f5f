//! The synthesis model: gate selection, cumulative products, target
//! conditions, depth scheduling and objectives, plus solution extraction.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::cuts::{self, CutContext, CutSelection};
use crate::encoding::{c, encode_real, fidelity_unchecked, j_matrix, su_normalize, ComplexMatrix, EncodingError, RealMatrix};
use crate::fingerprint::EqualityMode;
use crate::gates::{detect_relations_with, GateError, GateSet, GateSpec, RelationCatalog, RelationOptions};
use crate::mip::{self, BackendError, MipError, MipModel, Objective, ObjectiveSense, Sense, Solution, SolverBackend, Status, VarId};
use crate::oracle::{exhaustive_synthesize, overlap_stats, residual_summary, OracleError, OracleLimits, OracleObjective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SynthesisObjective {
    WeightedGateCount,
    Depth,
    LinearizedFidelity,
    FrobeniusOa,
    ExactFidelity,
}

impl SynthesisObjective {
    /// Objectives that drop the target equality.
    pub fn is_approximate(self) -> bool {
        matches!(self, Self::LinearizedFidelity | Self::FrobeniusOa | Self::ExactFidelity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseMode {
    Exact,
    GlobalPhase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxParams {
    pub epsilon: f64,
    /// Number of tangent points.
    pub k: usize,
}

impl Default for ApproxParams {
    fn default() -> Self {
        Self { epsilon: 0.125, k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthesisError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Mip(#[from] MipError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Cut(#[from] cuts::CutError),
    #[error("model integrity violated: {message}\n{dump}")]
    ModelIntegrity { message: String, dump: String },
}

/// A complete synthesis instance.
#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    pub target: ComplexMatrix,
    pub gate_set: GateSet,
    /// Number of gate positions.
    pub p: usize,
    /// Depth budget; `None` means `p`.
    pub d: Option<usize>,
    pub objective: SynthesisObjective,
    /// Per-gate weights indexed like the gate set; `None` means all ones.
    pub weights: Option<Vec<f64>>,
    pub phase_mode: PhaseMode,
    pub cuts: CutSelection,
    pub approx: ApproxParams,
    /// Rescale target and gates into SU(2^Q) before building (exact mode only).
    pub normalize_su: bool,
    /// Add `Σ_g V[p,g] = Ĝ_{p−1}`, implied by one-hot selection.
    pub hull_tightening: bool,
    /// Enumeration cap for relation detection.
    pub relation_count_limit: usize,
    /// Budget for the exhaustive fallback.
    pub oracle_limits: OracleLimits,
}

impl SynthesisProblem {
    pub fn new(target: ComplexMatrix, gate_set: GateSet, p: usize) -> Self {
        Self {
            target,
            gate_set,
            p,
            d: None,
            objective: SynthesisObjective::WeightedGateCount,
            weights: None,
            phase_mode: PhaseMode::Exact,
            cuts: CutSelection::default(),
            approx: ApproxParams::default(),
            normalize_su: false,
            hull_tightening: true,
            relation_count_limit: RelationOptions::default().count_limit,
            oracle_limits: OracleLimits::default(),
        }
    }

    pub fn with_objective(mut self, objective: SynthesisObjective) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_phase_mode(mut self, mode: PhaseMode) -> Self {
        self.phase_mode = mode;
        self
    }

    pub fn with_cuts(mut self, cuts: CutSelection) -> Self {
        self.cuts = cuts;
        self
    }

    pub fn depth_budget(&self) -> usize {
        self.d.unwrap_or(self.p)
    }

    /// Weights per gate index, identity forced to zero.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = self.weights.clone().unwrap_or_else(|| vec![1.0; self.gate_set.len()]);
        w[self.gate_set.identity_index()] = 0.0;
        w
    }

    /// Equality used for relation detection: up to phase only where the
    /// objective cannot tell phases apart.
    pub fn relation_mode(&self) -> EqualityMode {
        let phase_blind = match self.objective {
            SynthesisObjective::WeightedGateCount | SynthesisObjective::Depth => self.phase_mode == PhaseMode::GlobalPhase,
            SynthesisObjective::ExactFidelity => true,
            _ => false,
        };
        if phase_blind {
            EqualityMode::UpToPhase
        } else {
            EqualityMode::Exact
        }
    }

    /// Target equality used by verification and by the oracle.
    pub fn target_mode(&self) -> EqualityMode {
        match self.phase_mode {
            PhaseMode::Exact => EqualityMode::Exact,
            PhaseMode::GlobalPhase => EqualityMode::UpToPhase,
        }
    }

    /// Checks invariants and applies the optional SU rescaling.
    pub fn prepare(&self) -> Result<(SynthesisProblem, Vec<String>), SynthesisError> {
        let mut warnings = Vec::new();
        let bad = |m: String| Err(SynthesisError::InvalidProblem(m));
        if self.p == 0 {
            return bad(String::from("P must be at least 1"));
        }
        if self.depth_budget() == 0 || self.depth_budget() > self.p {
            return bad(format!("depth budget {} must lie in 1..={}", self.depth_budget(), self.p));
        }
        if self.target.dim() != self.gate_set.dim() {
            return bad(format!("target has dimension {}, gate set needs {}", self.target.dim(), self.gate_set.dim()));
        }
        if !self.target.is_unitary(crate::encoding::TOL_UNITARY) {
            return bad(format!("target is not unitary (defect {:e})", self.target.unitarity_defect()));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.gate_set.len() {
                return bad(format!("{} weights for {} gates", w.len(), self.gate_set.len()));
            }
            if let Some(k) = w.iter().position(|x| !(*x >= 0.0) || !x.is_finite()) {
                return bad(format!("weight of gate {k} is negative or not finite"));
            }
        }
        if self.objective == SynthesisObjective::FrobeniusOa {
            if !(self.approx.epsilon > 0.0 && self.approx.epsilon <= 1.0) {
                return bad(format!("epsilon {} outside (0, 1]", self.approx.epsilon));
            }
            if self.approx.k < 2 {
                return bad(format!("K = {} must be at least 2", self.approx.k));
            }
        }
        let mut out = self.clone();
        if self.normalize_su && self.phase_mode == PhaseMode::Exact {
            out.target = su_normalize(&self.target)?;
            let specs: Vec<GateSpec> = self
                .gate_set
                .gates()
                .iter()
                .map(|g| {
                    let base = su_normalize(&g.spec.base_matrix)?;
                    Ok(GateSpec { base_matrix: base, ..g.spec.clone() })
                })
                .collect::<Result<_, SynthesisError>>()?;
            out.gate_set = GateSet::new(self.gate_set.num_qubits(), &specs, self.gate_set.equality_mode())?;
            warnings.push(String::from("target and gates rescaled into SU(2^Q)"));
        }
        let (cuts, cut_warnings) = self.cuts.effective(self.objective, self.phase_mode);
        out.cuts = cuts;
        warnings.extend(cut_warnings);
        Ok((out, warnings))
    }
}

/// Variables of a `2^{Q+1}`-square real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatVars {
    pub dim: usize,
    pub vars: Vec<VarId>,
}

impl MatVars {
    pub fn at(&self, i: usize, j: usize) -> VarId {
        self.vars[i * self.dim + j]
    }
}

/// Either a model variable or a known constant (used for `Ĝ_0 = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Entry {
    Var(VarId),
    Const(f64),
}

/// Handles to every decision variable of a built model.
#[derive(Debug, Clone, Default)]
pub struct ModelHandles {
    /// `z[p][g]`, positions 0-based.
    pub z: Vec<Vec<VarId>>,
    /// `ghat[p]` is `Ĝ_{p+1}`.
    pub ghat: Vec<MatVars>,
    /// `v[p][g]` is `z[g,p]·Ĝ_{p−1}` for `p ≥ 1` (0-based); `v[0]` is empty.
    pub v: Vec<Vec<MatVars>>,
    /// `b[p][d]`, depth `d + 1`.
    pub b: Vec<Vec<VarId>>,
    pub r: Option<VarId>,
    pub s: Option<VarId>,
    pub e: Option<MatVars>,
    pub ehat: Option<MatVars>,
    pub alpha: Option<VarId>,
    pub beta: Option<VarId>,
    pub real_dim: usize,
}

impl ModelHandles {
    pub fn positions(&self) -> usize {
        self.z.len()
    }

    /// Entry `(i, j)` of `Ĝ_p` for `p ∈ 0..=P` (1-based, `Ĝ_0 = 1`).
    pub fn ghat_entry(&self, p: usize, i: usize, j: usize) -> Entry {
        if p == 0 {
            Entry::Const(if i == j { 1.0 } else { 0.0 })
        } else {
            Entry::Var(self.ghat[p - 1].at(i, j))
        }
    }
}

fn mat_vars(model: &mut MipModel, name: &str, dim: usize, lo: f64, hi: f64) -> MatVars {
    let vars = (0..dim * dim).map(|k| model.add_continuous(format!("{name}_{}_{}", k / dim, k % dim), lo, hi)).collect();
    MatVars { dim, vars }
}

/// Gate selection, one-hot rows and the McCormick-linearized product recursion.
pub fn build_base(problem: &SynthesisProblem) -> Result<(MipModel, ModelHandles), SynthesisError> {
    let gs = &problem.gate_set;
    let n = 2 * gs.dim();
    let mut model = MipModel::new();
    let mut h = ModelHandles { real_dim: n, ..ModelHandles::default() };
    for p in 0..problem.p {
        let row: Vec<VarId> = (0..gs.len()).map(|g| model.add_binary(format!("z_{g}_{}", p + 1))).collect();
        model.add_constraint(row.iter().map(|&z| (z, 1.0)).collect(), Sense::Eq, 1.0, "one_hot");
        h.z.push(row);
    }
    let reals: Vec<&RealMatrix> = gs.gates().iter().map(|g| g.real_matrix.as_real()).collect();
    // Ĝ_1 = Σ_g z[g,1] R(g)
    let g1 = mat_vars(&mut model, "Gh_1", n, -1.0, 1.0);
    for i in 0..n {
        for j in 0..n {
            let mut terms = vec![(g1.at(i, j), 1.0)];
            for (g, r) in reals.iter().enumerate() {
                let a = r.get(i, j);
                if a != 0.0 {
                    terms.push((h.z[0][g], -a));
                }
            }
            model.add_constraint(terms, Sense::Eq, 0.0, "product");
        }
    }
    h.ghat.push(g1);
    h.v.push(Vec::new());
    for p in 1..problem.p {
        let prev = h.ghat[p - 1].clone();
        let mut vs = Vec::with_capacity(gs.len());
        for g in 0..gs.len() {
            let z = h.z[p][g];
            let vars = prev.vars.iter().map(|&x| model.add_mccormick(z, x)).collect::<Result<Vec<_>, _>>()?;
            vs.push(MatVars { dim: n, vars });
        }
        if problem.hull_tightening {
            for k in 0..n * n {
                let mut terms: Vec<(VarId, f64)> = vs.iter().map(|m| (m.vars[k], 1.0)).collect();
                terms.push((prev.vars[k], -1.0));
                model.add_constraint(terms, Sense::Eq, 0.0, "hull");
            }
        }
        let cur = mat_vars(&mut model, &format!("Gh_{}", p + 1), n, -1.0, 1.0);
        for i in 0..n {
            for j in 0..n {
                let mut terms = vec![(cur.at(i, j), 1.0)];
                for (g, r) in reals.iter().enumerate() {
                    for k in 0..n {
                        let a = r.get(k, j);
                        if a != 0.0 {
                            terms.push((vs[g].at(i, k), -a));
                        }
                    }
                }
                model.add_constraint(terms, Sense::Eq, 0.0, "product");
            }
        }
        h.ghat.push(cur);
        h.v.push(vs);
    }
    Ok((model, h))
}

/// `Ĝ_P = R(T)` in exact mode, `Ĝ_P = r R(T) + s R(iT)` in global-phase mode.
pub fn add_target(problem: &SynthesisProblem, model: &mut MipModel, h: &mut ModelHandles) {
    let rt = encode_real(&problem.target).into_real();
    let last = h.ghat.last().expect("P ≥ 1").clone();
    let n = h.real_dim;
    match problem.phase_mode {
        PhaseMode::Exact => {
            for i in 0..n {
                for j in 0..n {
                    model.add_constraint(vec![(last.at(i, j), 1.0)], Sense::Eq, rt.get(i, j), "target");
                }
            }
        }
        PhaseMode::GlobalPhase => {
            let rit = encode_real(&problem.target.scale(c(0.0, 1.0))).into_real();
            let r = model.add_continuous("r", -1.0, 1.0);
            let s = model.add_continuous("s", -1.0, 1.0);
            for i in 0..n {
                for j in 0..n {
                    let terms = vec![(last.at(i, j), 1.0), (r, -rt.get(i, j)), (s, -rit.get(i, j))];
                    model.add_constraint(terms, Sense::Eq, 0.0, "target");
                }
            }
            h.r = Some(r);
            h.s = Some(s);
        }
    }
}

pub fn add_objective_gate_count(problem: &SynthesisProblem, model: &mut MipModel, h: &ModelHandles) {
    let w = problem.weights();
    let id = problem.gate_set.identity_index();
    let mut linear = Vec::new();
    for row in &h.z {
        for (g, &z) in row.iter().enumerate() {
            if g != id && w[g] != 0.0 {
                linear.push((z, w[g]));
            }
        }
    }
    model.set_objective(Objective { sense: ObjectiveSense::Minimize, linear, ..Objective::default() });
}

/// Depth binaries with monotone, unit-step layering and per-layer qubit disjointness.
pub fn add_depth_scheduling(problem: &SynthesisProblem, model: &mut MipModel, h: &mut ModelHandles) -> Result<(), SynthesisError> {
    let gs = &problem.gate_set;
    let dmax = problem.depth_budget();
    for p in 0..problem.p {
        let row: Vec<VarId> = (0..dmax).map(|d| model.add_binary(format!("b_{}_{}", p + 1, d + 1))).collect();
        model.add_constraint(row.iter().map(|&b| (b, 1.0)).collect(), Sense::Eq, 1.0, "depth");
        h.b.push(row);
    }
    // the first position starts at depth 1
    model.variables[h.b[0][0].0].lower = 1.0;
    for p in 1..problem.p {
        let terms: Vec<(VarId, f64)> = (0..dmax)
            .flat_map(|d| [(h.b[p][d], (d + 1) as f64), (h.b[p - 1][d], -((d + 1) as f64))])
            .collect();
        model.add_constraint(terms.clone(), Sense::Ge, 0.0, "depth");
        model.add_constraint(terms, Sense::Le, 1.0, "depth");
    }
    // y[g][p][d] = z[g,p]·b[p,d] for gates with non-empty support
    let mut y: Vec<Vec<Vec<VarId>>> = vec![Vec::new(); gs.len()];
    for g in 0..gs.len() {
        if gs.gate(g).support.is_empty() {
            continue;
        }
        for p in 0..problem.p {
            let row = (0..dmax)
                .map(|d| model.add_mccormick_binary_tagged(h.z[p][g], h.b[p][d], "depth"))
                .collect::<Result<Vec<_>, _>>()?;
            y[g].push(row);
        }
    }
    for q in 1..=gs.num_qubits() {
        let on_q: Vec<usize> = gs.gates_on_qubit(q).collect();
        if on_q.is_empty() {
            continue;
        }
        for d in 0..dmax {
            let terms: Vec<(VarId, f64)> = on_q.iter().flat_map(|&g| (0..problem.p).map(|p| (y[g][p][d], 1.0)).collect::<Vec<_>>()).collect();
            model.add_constraint(terms, Sense::Le, 1.0, "depth");
        }
    }
    let mut linear: Vec<(VarId, f64)> = (0..dmax).map(|d| (h.b[problem.p - 1][d], (d + 1) as f64)).collect();
    // an all-identity selection has depth 0, not the pinned first layer
    let id = gs.identity_index();
    let empty = model.add_continuous("empty", 0.0, 1.0);
    for p in 0..problem.p {
        model.add_constraint(vec![(empty, 1.0), (h.z[p][id], -1.0)], Sense::Le, 0.0, "depth");
    }
    linear.push((empty, -1.0));
    model.set_objective(Objective { sense: ObjectiveSense::Minimize, linear, ..Objective::default() });
    Ok(())
}

fn add_alpha(problem: &SynthesisProblem, model: &mut MipModel, h: &mut ModelHandles) -> VarId {
    let rt = encode_real(&problem.target).into_real();
    let last = h.ghat.last().expect("P ≥ 1").clone();
    let n = h.real_dim;
    let scale = 1.0 / n as f64;
    let alpha = model.add_continuous("alpha", -1.0, 1.0);
    let mut terms = vec![(alpha, 1.0)];
    for i in 0..n {
        for j in 0..n {
            let a = rt.get(i, j);
            if a != 0.0 {
                terms.push((last.at(i, j), -a * scale));
            }
        }
    }
    model.add_constraint(terms, Sense::Eq, 0.0, "objective");
    h.alpha = Some(alpha);
    alpha
}

fn add_beta(problem: &SynthesisProblem, model: &mut MipModel, h: &mut ModelHandles) -> VarId {
    let rt = encode_real(&problem.target).into_real();
    let n = h.real_dim;
    let m = j_matrix(n / 2).matmul(&rt.transpose());
    let last = h.ghat.last().expect("P ≥ 1").clone();
    let scale = 1.0 / n as f64;
    let beta = model.add_continuous("beta", -1.0, 1.0);
    let mut terms = vec![(beta, 1.0)];
    // β = −Tr(J R(T)ᵀ Ĝ)/2^{Q+1} = −Σ_{ij} M_ij Ĝ_ji / 2^{Q+1}
    for i in 0..n {
        for j in 0..n {
            let a = m.get(i, j);
            if a != 0.0 {
                terms.push((last.at(j, i), a * scale));
            }
        }
    }
    model.add_constraint(terms, Sense::Eq, 0.0, "objective");
    h.beta = Some(beta);
    beta
}

/// Maximize the real trace overlap `α`.
pub fn add_objective_linearized_fidelity(problem: &SynthesisProblem, model: &mut MipModel, h: &mut ModelHandles) {
    let alpha = add_alpha(problem, model, h);
    model.set_objective(Objective { sense: ObjectiveSense::Maximize, linear: vec![(alpha, 1.0)], ..Objective::default() });
}

/// Tangent grid `a_k`, uniform on `[−ε, ε]` with both endpoints.
pub fn tangent_grid(epsilon: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| -epsilon + 2.0 * epsilon * i as f64 / (k - 1) as f64).collect()
}

/// `Ĝ_P = R(T) + E`, `|E_ij| ≤ ε`, minimize `Σ Ê_ij` under tangent cuts.
pub fn add_objective_frobenius_oa(problem: &SynthesisProblem, model: &mut MipModel, h: &mut ModelHandles) {
    let eps = problem.approx.epsilon;
    let rt = encode_real(&problem.target).into_real();
    let last = h.ghat.last().expect("P ≥ 1").clone();
    let n = h.real_dim;
    let e = mat_vars(model, "E", n, -eps, eps);
    let eh = mat_vars(model, "Eh", n, 0.0, eps * eps);
    let grid = tangent_grid(eps, problem.approx.k);
    for i in 0..n {
        for j in 0..n {
            model.add_constraint(vec![(last.at(i, j), 1.0), (e.at(i, j), -1.0)], Sense::Eq, rt.get(i, j), "objective");
            for &a in &grid {
                // Ê ≥ 2aE − a²
                model.add_constraint(vec![(eh.at(i, j), 1.0), (e.at(i, j), -2.0 * a)], Sense::Ge, -a * a, "objective");
            }
        }
    }
    let linear = eh.vars.iter().map(|&v| (v, 1.0)).collect();
    model.set_objective(Objective { sense: ObjectiveSense::Minimize, linear, ..Objective::default() });
    h.e = Some(e);
    h.ehat = Some(eh);
}

/// Maximize `α² + β²`; needs a non-convex quadratic backend.
pub fn add_objective_exact_fidelity(problem: &SynthesisProblem, model: &mut MipModel, h: &mut ModelHandles) {
    let alpha = add_alpha(problem, model, h);
    let beta = add_beta(problem, model, h);
    model.set_objective(Objective {
        sense: ObjectiveSense::Maximize,
        quadratic: vec![(alpha, alpha, 1.0), (beta, beta, 1.0)],
        ..Objective::default()
    });
}

/// Greedy monotone layering of a fixed gate order.
///
/// Returns the depth and the layer (1-based) of every gate.
pub fn schedule_depth<S: AsRef<[usize]>>(supports: &[S]) -> (usize, Vec<usize>) {
    let mut layers = Vec::with_capacity(supports.len());
    let mut depth = 0usize;
    let mut busy: Vec<usize> = Vec::new();
    for s in supports {
        let s = s.as_ref();
        if depth == 0 || s.iter().any(|q| busy.contains(q)) {
            depth += 1;
            busy.clear();
        }
        busy.extend_from_slice(s);
        layers.push(depth);
    }
    (depth, layers)
}

/// Where the model is solved.
pub enum Engine<'a> {
    Mip(&'a dyn SolverBackend),
    Exhaustive(OracleLimits),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub status: Status,
    pub bound: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub engine: String,
    pub num_vars: usize,
    pub num_binaries: usize,
    pub num_constraints: usize,
    /// Constraints added per family tag.
    pub constraint_counts: Vec<(String, usize)>,
    pub solve_seconds: f64,
    pub fallback: bool,
}

/// Verified outcome of a synthesis run.
#[derive(Debug, Clone)]
pub struct SynthesisResult {
    /// Selected gates in circuit order, identities stripped.
    pub sequence: Vec<GateSpec>,
    pub indices: Vec<usize>,
    pub objective_value: f64,
    /// Depth of `sequence` by greedy layering.
    pub depth: usize,
    pub layers: Vec<usize>,
    /// Layer per position as chosen by the model (depth objective only).
    pub model_layers: Option<Vec<usize>>,
    pub realized_unitary: Option<ComplexMatrix>,
    pub fidelity_to_target: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub frobenius_sq: Option<f64>,
    /// `(1 − ‖E‖²/2^{Q+2})²` when `α ≥ 0`.
    pub fidelity_lower_bound: Option<f64>,
    pub global_phase: Option<(f64, f64)>,
    pub certificate: Certificate,
    pub stats: SolveStats,
    pub warnings: Vec<String>,
}

impl SynthesisResult {
    pub fn has_solution(&self) -> bool {
        self.realized_unitary.is_some()
    }

    pub fn gate_count(&self) -> usize {
        self.indices.len()
    }

    fn empty(status: Status, stats: SolveStats, warnings: Vec<String>) -> Self {
        Self {
            sequence: Vec::new(),
            indices: Vec::new(),
            objective_value: f64::NAN,
            depth: 0,
            layers: Vec::new(),
            model_layers: None,
            realized_unitary: None,
            fidelity_to_target: None,
            alpha: None,
            beta: None,
            frobenius_sq: None,
            fidelity_lower_bound: None,
            global_phase: None,
            certificate: Certificate { status, bound: f64::NAN, gap: f64::NAN },
            stats,
            warnings,
        }
    }
}

/// Builds the full model for a prepared problem: base, target, objective and cuts.
pub fn build_model(problem: &SynthesisProblem, catalog: Option<&RelationCatalog>) -> Result<(MipModel, ModelHandles), SynthesisError> {
    let (mut model, mut h) = build_base(problem)?;
    if !problem.objective.is_approximate() {
        add_target(problem, &mut model, &mut h);
    }
    match problem.objective {
        SynthesisObjective::WeightedGateCount => add_objective_gate_count(problem, &mut model, &h),
        SynthesisObjective::Depth => add_depth_scheduling(problem, &mut model, &mut h)?,
        SynthesisObjective::LinearizedFidelity => add_objective_linearized_fidelity(problem, &mut model, &mut h),
        SynthesisObjective::FrobeniusOa => add_objective_frobenius_oa(problem, &mut model, &mut h),
        SynthesisObjective::ExactFidelity => add_objective_exact_fidelity(problem, &mut model, &mut h),
    }
    let weights = problem.weights();
    let ctx = CutContext { objective: problem.objective, weights: &weights };
    cuts::apply(&mut model, &h, problem, catalog, &ctx)?;
    Ok((model, h))
}

/// Relation catalog needed by the selected cuts, if any.
pub fn relations_for(problem: &SynthesisProblem) -> Result<Option<RelationCatalog>, SynthesisError> {
    let c = &problem.cuts;
    if !(c.commuting_pairs || c.equivalent_patterns || c.redundancy) {
        return Ok(None);
    }
    let opts = RelationOptions {
        k_max: c.redundancy_k_max,
        mode: problem.relation_mode(),
        count_limit: problem.relation_count_limit,
        triplets: c.equivalent_patterns,
    };
    Ok(Some(detect_relations_with(&problem.gate_set, &opts)?))
}

/// Runs the whole pipeline: prepare, detect relations, build, solve, verify.
pub fn synthesize(problem: &SynthesisProblem, engine: Engine<'_>) -> Result<SynthesisResult, SynthesisError> {
    let (prob, mut warnings) = problem.prepare()?;
    match engine {
        Engine::Exhaustive(limits) => synthesize_exhaustive(&prob, limits, warnings, false),
        Engine::Mip(backend) => {
            let catalog = relations_for(&prob)?;
            if let Some(cat) = &catalog {
                warnings.extend(cat.warnings.iter().cloned());
            }
            let (model, h) = build_model(&prob, catalog.as_ref())?;
            let sol = mip::solve(&model, backend)?;
            let mut stats = model_stats(&model, backend.name(), sol.solve_seconds);
            if sol.status == Status::Unsupported {
                warnings.push(format!("backend `{}` cannot solve this objective; using the exhaustive oracle", backend.name()));
                let mut r = synthesize_exhaustive(&prob, prob.oracle_limits, warnings, true)?;
                stats.engine = format!("{} -> exhaustive", backend.name());
                stats.fallback = true;
                r.stats = stats;
                return Ok(r);
            }
            extract_and_verify_with(&prob, &model, &sol, &h, stats, warnings)
        }
    }
}

fn model_stats(model: &MipModel, engine: &str, seconds: f64) -> SolveStats {
    let mut counts: Vec<(String, usize)> = model.constraint_counts().into_iter().map(|(k, v)| (String::from(k), v)).collect();
    counts.sort();
    SolveStats {
        engine: String::from(engine),
        num_vars: model.num_vars(),
        num_binaries: model.num_binaries(),
        num_constraints: model.constraints.len(),
        constraint_counts: counts,
        solve_seconds: seconds,
        fallback: false,
    }
}

fn synthesize_exhaustive(prob: &SynthesisProblem, limits: OracleLimits, warnings: Vec<String>, fallback: bool) -> Result<SynthesisResult, SynthesisError> {
    let objective = match prob.objective {
        SynthesisObjective::WeightedGateCount => OracleObjective::GateCount { weights: prob.weights() },
        SynthesisObjective::Depth => OracleObjective::Depth,
        SynthesisObjective::LinearizedFidelity => OracleObjective::MaxAlpha,
        SynthesisObjective::FrobeniusOa => OracleObjective::MinFrobenius { epsilon: prob.approx.epsilon },
        SynthesisObjective::ExactFidelity => OracleObjective::MaxFidelity,
    };
    let stats = SolveStats { engine: String::from("exhaustive"), fallback, ..SolveStats::default() };
    let found = exhaustive_synthesize(&prob.target, &prob.gate_set, prob.p, &objective, prob.target_mode(), limits)?;
    let out = match found {
        Some(o) if !(prob.objective == SynthesisObjective::Depth && o.value > prob.depth_budget() as f64) => o,
        _ => return Ok(SynthesisResult::empty(Status::Infeasible, stats, warnings)),
    };
    let mut r = assemble(prob, out.sequence, out.value, None, Certificate { status: Status::Optimal, bound: out.value, gap: 0.0 }, stats, warnings);
    if prob.objective == SynthesisObjective::FrobeniusOa {
        // the oracle optimizes the true squared norm, not its outer approximation
        r.objective_value = r.frobenius_sq.unwrap_or(out.value);
    }
    Ok(r)
}

fn assemble(
    prob: &SynthesisProblem,
    indices: Vec<usize>,
    objective_value: f64,
    model_layers: Option<Vec<usize>>,
    certificate: Certificate,
    stats: SolveStats,
    warnings: Vec<String>,
) -> SynthesisResult {
    let gs = &prob.gate_set;
    let realized = gs.product(&indices);
    let supports: Vec<&[usize]> = indices.iter().map(|&g| gs.gate(g).support.as_slice()).collect();
    let (depth, layers) = schedule_depth(&supports);
    let fidelity = fidelity_unchecked(&realized, &prob.target);
    let (alpha, fro, _) = overlap_stats(&realized, &prob.target);
    let beta = crate::encoding::overlap(&realized, &prob.target).im;
    let n = 2.0 * gs.dim() as f64;
    let lb = if alpha >= 0.0 { Some((1.0 - fro / (2.0 * n)).powi(2)) } else { None };
    let global_phase = match prob.phase_mode {
        PhaseMode::GlobalPhase if !prob.objective.is_approximate() => {
            let ov = crate::encoding::overlap(&realized, &prob.target);
            // realized = λ T with λ = conj(Tr(T†U))/|..|; report λ = r + is
            let lam = ov / ov.norm();
            Some((lam.re, lam.im))
        }
        _ => None,
    };
    SynthesisResult {
        sequence: indices.iter().map(|&g| gs.gate(g).spec.clone()).collect(),
        indices,
        objective_value,
        depth,
        layers,
        model_layers,
        realized_unitary: Some(realized),
        fidelity_to_target: Some(fidelity),
        alpha: Some(alpha),
        beta: Some(beta),
        frobenius_sq: Some(fro),
        fidelity_lower_bound: lb,
        global_phase,
        certificate,
        stats,
        warnings,
    }
}

/// Reads the selected gates from a solver point and re-verifies them.
pub fn extract_and_verify(problem: &SynthesisProblem, model: &MipModel, solution: &Solution, h: &ModelHandles) -> Result<SynthesisResult, SynthesisError> {
    let stats = model_stats(model, "external", solution.solve_seconds);
    extract_and_verify_with(problem, model, solution, h, stats, Vec::new())
}

fn extract_and_verify_with(
    prob: &SynthesisProblem,
    model: &MipModel,
    sol: &Solution,
    h: &ModelHandles,
    stats: SolveStats,
    warnings: Vec<String>,
) -> Result<SynthesisResult, SynthesisError> {
    if !sol.has_point() {
        return Ok(SynthesisResult::empty(sol.status, stats, warnings));
    }
    let gs = &prob.gate_set;
    let id = gs.identity_index();
    let mut chosen = Vec::new();
    for row in &h.z {
        let (g, _) = row.iter().enumerate().map(|(g, &z)| (g, sol.value(z))).fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
        if sol.value(row[g]) < 0.5 {
            return Err(integrity(prob, "no gate selected at a position", model, sol, &prob.gate_set.product(&chosen)));
        }
        chosen.push(g);
    }
    let model_layers = if h.b.is_empty() {
        None
    } else {
        Some(
            h.b.iter()
                .zip(&chosen)
                .filter(|(_, &g)| g != id)
                .map(|(row, _)| row.iter().position(|&b| sol.value(b) > 0.5).map_or(0, |d| d + 1))
                .collect(),
        )
    };
    let indices: Vec<usize> = chosen.into_iter().filter(|&g| g != id).collect();
    let cert = Certificate { status: sol.status, bound: sol.best_bound, gap: sol.gap };
    let mut r = assemble(prob, indices, sol.objective_value, model_layers, cert, stats, warnings);
    let realized = &r.realized_unitary.clone().expect("assembled");
    let fid = r.fidelity_to_target.expect("assembled");
    let tol = 1e-6;
    match prob.objective {
        SynthesisObjective::WeightedGateCount | SynthesisObjective::Depth => {
            let ok = match prob.phase_mode {
                PhaseMode::Exact => realized.approx_eq(&prob.target, tol),
                PhaseMode::GlobalPhase => fid >= 1.0 - tol,
            };
            if !ok {
                return Err(integrity(prob, "selected gates do not realize the target", model, sol, realized));
            }
            if let (Some(r_), Some(s_)) = (h.r, h.s) {
                r.global_phase = Some((sol.value(r_), sol.value(s_)));
            }
            if prob.objective == SynthesisObjective::Depth && sol.objective_value + tol < r.depth as f64 {
                return Err(integrity(prob, "model depth below the greedy depth of its own sequence", model, sol, realized));
            }
            if prob.objective == SynthesisObjective::WeightedGateCount {
                let w = prob.weights();
                let cost: f64 = r.indices.iter().map(|&g| w[g]).sum();
                if (cost - sol.objective_value).abs() > tol * cost.max(1.0) {
                    return Err(integrity(prob, "objective differs from the weight of the selected gates", model, sol, realized));
                }
            }
        }
        SynthesisObjective::LinearizedFidelity => {
            let a = r.alpha.expect("assembled");
            if (a - sol.objective_value).abs() > tol {
                return Err(integrity(prob, "model α differs from recomputed α", model, sol, realized));
            }
        }
        SynthesisObjective::FrobeniusOa => {
            let fro = r.frobenius_sq.expect("assembled");
            if sol.objective_value > fro + tol {
                return Err(integrity(prob, "outer-approximation value exceeds the recomputed ‖E‖²", model, sol, realized));
            }
        }
        SynthesisObjective::ExactFidelity => {
            if (fid - sol.objective_value).abs() > tol {
                return Err(integrity(prob, "model fidelity differs from recomputed fidelity", model, sol, realized));
            }
        }
    }
    Ok(r)
}

fn integrity(prob: &SynthesisProblem, message: &str, model: &MipModel, sol: &Solution, realized: &ComplexMatrix) -> SynthesisError {
    let mut dump = format!(
        "status {:?}, objective {}, {} variables, {} constraints",
        sol.status,
        sol.objective_value,
        model.num_vars(),
        model.constraints.len()
    );
    if let Some(v) = model.first_violation(&sol.values, 1e-6) {
        dump.push_str(&format!("\nfirst violation at tolerance 1e-6: {v}"));
    }
    dump.push_str(&format!("\nrealized vs target: {}", residual_summary(realized, &prob.target)));
    SynthesisError::ModelIntegrity { message: String::from(message), dump }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::extend_gate;

    fn gate(name: &str, q: &[usize], nq: usize) -> ComplexMatrix {
        extend_gate(&GateSpec::builtin(name, q, None).unwrap(), nq).unwrap().full_matrix
    }

    #[test]
    fn schedule_examples() {
        let (d, layers) = schedule_depth(&[vec![1, 2], vec![1], vec![2]]);
        assert_eq!((d, layers), (2, vec![1, 2, 2]));
        assert_eq!(schedule_depth(&[vec![1], vec![1, 2], vec![2]]).0, 3);
        assert_eq!(schedule_depth(&[vec![1], vec![2], vec![1, 2]]).0, 2);
        assert_eq!(schedule_depth::<Vec<usize>>(&[]).0, 0);
        assert_eq!(schedule_depth(&vec![vec![3]; 4]).0, 4);
        assert_eq!(schedule_depth(&[vec![1], vec![2], vec![3]]).0, 1);
    }

    #[test]
    fn grid_contains_endpoints() {
        assert_eq!(tangent_grid(0.125, 5), vec![-0.125, -0.0625, 0.0, 0.0625, 0.125]);
    }

    #[test]
    fn base_model_size_audit() {
        let gs = GateSet::from_builtins(2, &[("H", &[1]), ("CNOT", &[1, 2])], EqualityMode::Exact).unwrap();
        let prob = SynthesisProblem { hull_tightening: false, ..SynthesisProblem::new(gate("H", &[1], 2), gs, 3) };
        let (model, h) = build_base(&prob).unwrap();
        let n2 = 8 * 8;
        let g = 3;
        // z, Ĝ_1..Ĝ_P and (P−1)·|G| McCormick matrices
        assert_eq!(model.num_vars(), 3 * g + 3 * n2 + 2 * g * n2);
        assert_eq!(model.num_binaries(), 3 * g);
        assert_eq!(model.constraints.len(), 3 + 3 * n2 + 4 * 2 * g * n2);
        assert_eq!(h.v[1].len(), g);
    }

    #[test]
    fn integral_point_of_known_circuit_satisfies_model() {
        // plug the exact point for H·CNOT into the model and check every row
        let gs = GateSet::from_builtins(2, &[("H", &[1]), ("CNOT", &[1, 2])], EqualityMode::Exact).unwrap();
        let target = gs.product(&[1, 2]);
        let prob = SynthesisProblem::new(target, gs.clone(), 3);
        let (mut model, mut h) = build_base(&prob).unwrap();
        add_target(&prob, &mut model, &mut h);
        add_objective_gate_count(&prob, &mut model, &h);
        let seq = [1, 2, 0];
        let mut x = vec![0.0; model.num_vars()];
        let mut acc = ComplexMatrix::identity(4);
        for (p, &g) in seq.iter().enumerate() {
            x[h.z[p][g].0] = 1.0;
            let prev = encode_real(&acc).into_real();
            if p > 0 {
                for (gg, m) in h.v[p].iter().enumerate() {
                    for k in 0..m.vars.len() {
                        x[m.vars[k].0] = if gg == g { prev.as_slice()[k] } else { 0.0 };
                    }
                }
            }
            acc = &acc * &gs.gate(g).full_matrix;
            let cur = encode_real(&acc).into_real();
            for k in 0..h.ghat[p].vars.len() {
                x[h.ghat[p].vars[k].0] = cur.as_slice()[k];
            }
        }
        assert_eq!(model.first_violation(&x, 1e-12), None);
        assert_eq!(model.objective_value(&x), 2.0);
    }

    #[test]
    fn beta_coefficients_match_alpha_beta() {
        let gs = GateSet::from_builtins(1, &[("H", &[1]), ("T", &[1])], EqualityMode::Exact).unwrap();
        let target = gate("S", &[1], 1);
        let prob = SynthesisProblem::new(target.clone(), gs.clone(), 2).with_objective(SynthesisObjective::ExactFidelity);
        let (mut model, mut h) = build_base(&prob).unwrap();
        add_objective_exact_fidelity(&prob, &mut model, &mut h);
        let u = gs.product(&[1, 2]);
        let ru = encode_real(&u).into_real();
        let (a, b) = crate::encoding::alpha_beta(&ru, &target).unwrap();
        // evaluate the α, β rows at Ĝ_2 = R(u)
        let mut x = vec![0.0; model.num_vars()];
        for k in 0..16 {
            x[h.ghat[1].vars[k].0] = ru.as_slice()[k];
        }
        x[h.alpha.unwrap().0] = a;
        x[h.beta.unwrap().0] = b;
        for c in model.constraints.iter().filter(|c| c.tag == "objective") {
            let lhs: f64 = c.terms.iter().map(|&(v, w)| w * x[v.0]).sum();
            assert!((lhs - c.rhs).abs() < 1e-12);
        }
        assert!((model.objective_value(&x) - fidelity_unchecked(&u, &target)).abs() < 1e-12);
    }

    #[test]
    fn prepare_rejects_bad_input() {
        let gs = GateSet::from_builtins(1, &[("H", &[1])], EqualityMode::Exact).unwrap();
        let t = gate("H", &[1], 1);
        assert!(SynthesisProblem::new(t.clone(), gs.clone(), 0).prepare().is_err());
        let mut p = SynthesisProblem::new(t.clone(), gs.clone(), 2);
        p.weights = Some(vec![0.0, -1.0]);
        assert!(p.prepare().is_err());
        let mut p = SynthesisProblem::new(t.clone(), gs.clone(), 2).with_objective(SynthesisObjective::FrobeniusOa);
        p.approx.k = 1;
        assert!(p.prepare().is_err());
        let mut p = SynthesisProblem::new(t, gs, 2);
        p.d = Some(3);
        assert!(p.prepare().is_err());
    }

    #[test]
    fn exhaustive_engine_end_to_end() {
        let gs = GateSet::from_builtins(1, &[("T", &[1]), ("H", &[1])], EqualityMode::Exact).unwrap();
        let prob = SynthesisProblem::new(gate("S", &[1], 1), gs, 3);
        let r = synthesize(&prob, Engine::Exhaustive(OracleLimits::default())).unwrap();
        assert_eq!(r.indices, vec![1, 1]);
        assert_eq!(r.objective_value, 2.0);
        assert!((r.fidelity_to_target.unwrap() - 1.0).abs() < 1e-12);
    }
}
