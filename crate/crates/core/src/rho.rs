//! Rolling-horizon optimization of long gate lists.
//!
//! A seed circuit is consumed front to back. Each step picks the earliest
//! block that is closed on its qubits and fits the length and qubit caps,
//! resynthesizes it on a compact local register, keeps a prefix of the result
//! and pushes the rest back in front of the remaining seed.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::cuts::CutSelection;
use crate::encoding::{su_normalize, ComplexMatrix};
use crate::fingerprint::{matrices_equal, EqualityMode};
use crate::formulation::{synthesize, Engine, PhaseMode, SynthesisObjective, SynthesisProblem};
use crate::gates::{embed, GateError, GateSet, GateSpec};
use crate::mip::{SolverBackend, Status};
use crate::oracle::{MeetInTheMiddle, OracleError, OracleLimits};

pub type GateList = Vec<GateSpec>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RhoError {
    #[error("index {index} out of range for a list of {len} gates")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("repeated qubit {0}")]
    RepeatedQubit(usize),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("window solver failed: {0}")]
    Solver(String),
    #[error("output circuit differs from the seed (fidelity {0})")]
    NotEquivalent(f64),
}

/// Qubits touched by a list of gates, ascending.
pub fn qubits_of<'a>(gates: impl IntoIterator<Item = &'a GateSpec>) -> BTreeSet<usize> {
    gates.into_iter().flat_map(|g| g.qubits.iter().copied()).collect()
}

fn check_index(t: &[GateSpec], i: usize) -> Result<(), RhoError> {
    if i == 0 || i > t.len() {
        return Err(RhoError::IndexOutOfRange { index: i, len: t.len() });
    }
    Ok(())
}

/// Positions (0-based) of gates among `t[1..=i]` that touch `q`.
pub fn gates_on_qubits_up_to_indices(t: &[GateSpec], q: &BTreeSet<usize>, i: usize) -> Result<Vec<usize>, RhoError> {
    check_index(t, i)?;
    Ok((0..i).filter(|&j| t[j].qubits.iter().any(|x| q.contains(x))).collect())
}

/// Gates among `t[1..=i]` (1-based `i`) acting on any qubit of `q`, in order.
pub fn gates_on_qubits_up_to(t: &[GateSpec], q: &BTreeSet<usize>, i: usize) -> Result<GateList, RhoError> {
    Ok(gates_on_qubits_up_to_indices(t, q, i)?.into_iter().map(|j| t[j].clone()).collect())
}

/// Closure of [`gates_on_qubits_up_to_indices`] under the qubits it selects.
pub fn recursive_gates_on_qubits_up_to_indices(t: &[GateSpec], q: &BTreeSet<usize>, i: usize) -> Result<Vec<usize>, RhoError> {
    let mut q = q.clone();
    loop {
        let sel = gates_on_qubits_up_to_indices(t, &q, i)?;
        let new_q = qubits_of(sel.iter().map(|&j| &t[j]));
        if new_q.len() > q.len() {
            q = new_q;
        } else {
            return Ok(sel);
        }
    }
}

pub fn recursive_gates_on_qubits_up_to(t: &[GateSpec], q: &BTreeSet<usize>, i: usize) -> Result<GateList, RhoError> {
    Ok(recursive_gates_on_qubits_up_to_indices(t, q, i)?.into_iter().map(|j| t[j].clone()).collect())
}

/// Positions (0-based) of the first block of `t`.
///
/// If the first gate alone exceeds `max_qubits` it is returned on its own.
pub fn find_first_block_indices(t: &[GateSpec], window_length: usize, max_qubits: usize) -> Result<Vec<usize>, RhoError> {
    if t.is_empty() {
        return Err(RhoError::IndexOutOfRange { index: 1, len: 0 });
    }
    let mut q = qubits_of([&t[0]]);
    let mut i = 1;
    let mut best: Vec<usize> = Vec::new();
    loop {
        if i > t.len() {
            break;
        }
        let seq = recursive_gates_on_qubits_up_to_indices(t, &q, i)?;
        q = qubits_of(seq.iter().map(|&j| &t[j]));
        if seq.len() > window_length || q.len() > max_qubits {
            break;
        }
        if seq.len() == window_length {
            return Ok(seq);
        }
        best = seq;
        i += 1;
    }
    if best.is_empty() {
        best.push(0);
    }
    Ok(best)
}

pub fn find_first_block(t: &[GateSpec], window_length: usize, max_qubits: usize) -> Result<GateList, RhoError> {
    Ok(find_first_block_indices(t, window_length, max_qubits)?.into_iter().map(|j| t[j].clone()).collect())
}

/// Unitary of a gate list on `num_qubits` qubits, left-to-right product.
pub fn circuit_unitary(gates: &[GateSpec], num_qubits: usize) -> Result<ComplexMatrix, RhoError> {
    let mut acc = ComplexMatrix::identity(1 << num_qubits);
    for g in gates {
        acc = &acc * &embed(&g.base_matrix, &g.qubits, num_qubits)?;
    }
    Ok(acc)
}

/// `B_acc† · T` where `B_acc` is the product of the accepted gates.
pub fn retarget(target: &ComplexMatrix, accepted: &[GateSpec]) -> Result<ComplexMatrix, RhoError> {
    let nq = target.num_qubits().map_err(GateError::from)?;
    let b = circuit_unitary(accepted, nq)?;
    Ok(&b.adjoint() * target)
}

/// `CNOT(a,c) CNOT(b,c) RZ(θ)(c) CNOT(b,c) CNOT(a,c)`, which equals `exp(−iθ/2 Z⊗Z⊗Z)`.
pub fn parity_ladder_zzz(theta: f64, qubits: [usize; 3]) -> Result<GateList, RhoError> {
    let [a, b, c] = qubits;
    if a == b || a == c {
        return Err(RhoError::RepeatedQubit(a));
    }
    if b == c {
        return Err(RhoError::RepeatedQubit(b));
    }
    Ok(vec![
        GateSpec::builtin("CNOT", &[a, c], None)?,
        GateSpec::builtin("CNOT", &[b, c], None)?,
        GateSpec::builtin("RZ", &[c], Some(theta))?,
        GateSpec::builtin("CNOT", &[b, c], None)?,
        GateSpec::builtin("CNOT", &[a, c], None)?,
    ])
}

/// Parity ladders for every 3-subset of `1..=n`, in lexicographic order.
pub fn zzz_hypergraph_seed(n: usize, theta: f64) -> Result<GateList, RhoError> {
    let mut out = Vec::new();
    for a in 1..=n {
        for b in a + 1..=n {
            for c in b + 1..=n {
                out.extend(parity_ladder_zzz(theta, [a, b, c])?);
            }
        }
    }
    Ok(out)
}

/// Instantiates gate templates on every ordered tuple of distinct qubits of a
/// `num_qubits` register, dropping instances equal to an earlier one.
pub fn instantiate_gate_set(templates: &[GateSpec], num_qubits: usize, mode: EqualityMode) -> Result<GateSet, RhoError> {
    let mut specs: Vec<GateSpec> = Vec::new();
    let mut mats: Vec<ComplexMatrix> = Vec::new();
    let ident = ComplexMatrix::identity(1 << num_qubits);
    for t in templates {
        let arity = t.qubits.len();
        if arity > num_qubits {
            continue;
        }
        for tuple in ordered_tuples(num_qubits, arity) {
            let spec = GateSpec { qubits: tuple, ..t.clone() };
            let m = embed(&spec.base_matrix, &spec.qubits, num_qubits)?;
            if matrices_equal(&m, &ident, mode, crate::encoding::TOL_IDENTITY) || mats.iter().any(|x| matrices_equal(x, &m, mode, crate::encoding::TOL_IDENTITY)) {
                continue;
            }
            mats.push(m);
            specs.push(spec);
        }
    }
    Ok(GateSet::new(num_qubits, &specs, mode)?)
}

/// Window gate set plus, per index, the template-valued spec to emit.
fn window_gates(templates: &[GateSpec], num_qubits: usize, mode: WindowMode) -> Result<(GateSet, GateList), RhoError> {
    let gs = match mode {
        WindowMode::SuNormalized => {
            let su = templates
                .iter()
                .map(|t| Ok(GateSpec { base_matrix: su_normalize(&t.base_matrix).map_err(GateError::from)?, ..t.clone() }))
                .collect::<Result<Vec<_>, RhoError>>()?;
            instantiate_gate_set(&su, num_qubits, EqualityMode::Exact)?
        }
        m => instantiate_gate_set(templates, num_qubits, m.equality())?,
    };
    let originals = gs
        .gates()
        .iter()
        .map(|eg| {
            templates
                .iter()
                .find(|t| t.name == eg.spec.name && t.param == eg.spec.param && t.qubits.len() == eg.spec.qubits.len())
                .map_or_else(|| eg.spec.clone(), |t| GateSpec { qubits: eg.spec.qubits.clone(), ..t.clone() })
        })
        .collect();
    Ok((gs, originals))
}

fn ordered_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for p in &out {
            for q in (1..=n).filter(|q| !p.contains(q)) {
                next.push([p.as_slice(), &[q]].concat());
            }
        }
        out = next;
    }
    out
}

/// Result of one window solve, as indices into the window gate set.
#[derive(Debug, Clone, PartialEq)]
pub enum WindowOutcome {
    Optimized(Vec<usize>),
    Unsolved(String),
}

/// Exact gate-count resynthesis of one window.
pub trait WindowSolver {
    fn name(&self) -> &str;

    /// Shortest sequence over `gate_set` of at most `max_len` gates equal to `target`.
    fn solve_window(&mut self, target: &ComplexMatrix, gate_set: &GateSet, max_len: usize, mode: EqualityMode) -> Result<WindowOutcome, RhoError>;
}

/// Meet-in-the-middle search, with one forward ball cached per register size.
pub struct OracleWindowSolver {
    pub forward_depth: usize,
    pub limits: OracleLimits,
    cache: HashMap<(usize, bool), MeetInTheMiddle>,
}

impl OracleWindowSolver {
    pub fn new(forward_depth: usize, limits: OracleLimits) -> Self {
        Self { forward_depth, limits, cache: HashMap::new() }
    }
}

impl Default for OracleWindowSolver {
    fn default() -> Self {
        Self::new(5, OracleLimits { max_nodes: 4_000_000 })
    }
}

impl WindowSolver for OracleWindowSolver {
    fn name(&self) -> &str {
        "exhaustive"
    }

    fn solve_window(&mut self, target: &ComplexMatrix, gate_set: &GateSet, max_len: usize, mode: EqualityMode) -> Result<WindowOutcome, RhoError> {
        let key = (gate_set.num_qubits(), mode == EqualityMode::UpToPhase);
        if !self.cache.contains_key(&key) {
            let depth = self.forward_depth.min(max_len.max(1));
            match MeetInTheMiddle::new(gate_set, mode, depth, self.limits) {
                Ok(m) => {
                    self.cache.insert(key, m);
                }
                Err(e) => return Ok(WindowOutcome::Unsolved(format!("{e}"))),
            }
        }
        let mitm = &self.cache[&key];
        match mitm.shortest(target, max_len, self.limits) {
            Ok(Some(seq)) => Ok(WindowOutcome::Optimized(seq)),
            Ok(None) => Ok(WindowOutcome::Unsolved(format!("no sequence of at most {max_len} gates"))),
            Err(e) => Ok(WindowOutcome::Unsolved(format!("{e}"))),
        }
    }
}

/// Window solver that builds and solves the synthesis model.
pub struct MipWindowSolver<'a> {
    pub backend: &'a dyn SolverBackend,
    pub cuts: CutSelection,
}

impl WindowSolver for MipWindowSolver<'_> {
    fn name(&self) -> &str {
        self.backend.name()
    }

    fn solve_window(&mut self, target: &ComplexMatrix, gate_set: &GateSet, max_len: usize, mode: EqualityMode) -> Result<WindowOutcome, RhoError> {
        let phase_mode = match mode {
            EqualityMode::Exact => PhaseMode::Exact,
            EqualityMode::UpToPhase => PhaseMode::GlobalPhase,
        };
        let prob = SynthesisProblem::new(target.clone(), gate_set.clone(), max_len.max(1))
            .with_objective(SynthesisObjective::WeightedGateCount)
            .with_phase_mode(phase_mode)
            .with_cuts(self.cuts);
        let r = synthesize(&prob, Engine::Mip(self.backend)).map_err(|e| RhoError::Solver(format!("{e}")))?;
        match r.certificate.status {
            Status::Optimal | Status::Feasible if r.has_solution() => Ok(WindowOutcome::Optimized(r.indices)),
            s => Ok(WindowOutcome::Unsolved(format!("status {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RhoConfig {
    pub window_length: usize,
    pub accept_window: usize,
    pub max_qubits: usize,
    /// Gate templates; only the name, matrix and arity are used.
    pub elementary_gates: Vec<GateSpec>,
    pub passes: usize,
    /// Equality required between a window and its replacement.
    pub window_mode: WindowMode,
}

/// How a window and its replacement must agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WindowMode {
    Exact,
    GlobalPhase,
    /// Exact equality after rescaling window product and gates into SU(2^k).
    SuNormalized,
}

impl WindowMode {
    pub fn equality(self) -> EqualityMode {
        match self {
            Self::GlobalPhase => EqualityMode::UpToPhase,
            Self::Exact | Self::SuNormalized => EqualityMode::Exact,
        }
    }
}

impl RhoConfig {
    pub fn new(window_length: usize, accept_window: usize, max_qubits: usize, elementary_gates: Vec<GateSpec>) -> Self {
        Self { window_length, accept_window, max_qubits, elementary_gates, passes: 1, window_mode: WindowMode::GlobalPhase }
    }

    pub fn validate(&self) -> Result<(), RhoError> {
        if self.window_length == 0 {
            return Err(RhoError::Config(String::from("window_length must be at least 1")));
        }
        if self.accept_window == 0 || self.accept_window > self.window_length {
            return Err(RhoError::Config(format!("accept_window must lie in 1..={}", self.window_length)));
        }
        if self.max_qubits == 0 {
            return Err(RhoError::Config(String::from("max_qubits must be at least 1")));
        }
        if self.passes == 0 {
            return Err(RhoError::Config(String::from("passes must be at least 1")));
        }
        if self.elementary_gates.is_empty() {
            return Err(RhoError::Config(String::from("empty elementary gate set")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowAction {
    PassThrough,
    Optimized,
    Unsolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowLog {
    pub pass: usize,
    /// Block positions in the remaining list at the time of selection (0-based).
    pub positions: Vec<usize>,
    pub qubits: Vec<usize>,
    pub before: usize,
    pub after: usize,
    pub accepted: usize,
    pub action: WindowAction,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoOutcome {
    pub gates: GateList,
    pub windows: Vec<WindowLog>,
    /// Gate count after each pass.
    pub pass_counts: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Runs one rolling-horizon pass over `t`.
pub fn rolling_horizon(t: &[GateSpec], config: &RhoConfig, solver: &mut dyn WindowSolver) -> Result<RhoOutcome, RhoError> {
    config.validate()?;
    let mut gate_sets: HashMap<usize, (GateSet, GateList)> = HashMap::new();
    let mut output: GateList = Vec::new();
    let mut full: GateList = t.to_vec();
    let mut windows = Vec::new();
    let mut warnings = Vec::new();
    while !full.is_empty() {
        let idx = find_first_block_indices(&full, config.window_length, config.max_qubits)?;
        let block: GateList = idx.iter().map(|&j| full[j].clone()).collect();
        let qubits: Vec<usize> = qubits_of(&block).into_iter().collect();
        let mut rest = Vec::with_capacity(full.len() - idx.len());
        let mut k = 0;
        for (j, g) in full.into_iter().enumerate() {
            if k < idx.len() && idx[k] == j {
                k += 1;
            } else {
                rest.push(g);
            }
        }
        full = rest;
        let mut log = WindowLog {
            pass: 1,
            positions: idx,
            qubits: qubits.clone(),
            before: block.len(),
            after: block.len(),
            accepted: block.len(),
            action: WindowAction::PassThrough,
            note: None,
        };
        if qubits.len() <= 1 || block.len() == 1 || qubits.len() > config.max_qubits {
            output.extend(block);
            windows.push(log);
            continue;
        }
        let local = qubits.len();
        let to_local = |q: usize| qubits.iter().position(|&x| x == q).expect("block qubit") + 1;
        let local_block: GateList = block.iter().map(|g| g.relabeled(to_local)).collect();
        let target = circuit_unitary(&local_block, local)?;
        if !gate_sets.contains_key(&local) {
            gate_sets.insert(local, window_gates(&config.elementary_gates, local, config.window_mode)?);
        }
        let (gs, originals) = &gate_sets[&local];
        let target = match config.window_mode {
            WindowMode::SuNormalized => su_normalize(&target).map_err(GateError::from)?,
            _ => target,
        };
        let optimized: GateList = match solver.solve_window(&target, gs, block.len(), config.window_mode.equality())? {
            WindowOutcome::Optimized(seq) => {
                let cand: GateList = seq.iter().map(|&g| originals[g].relabeled(|q| qubits[q - 1])).collect();
                log.action = WindowAction::Optimized;
                cand
            }
            WindowOutcome::Unsolved(why) => {
                warnings.push(format!("window on qubits {qubits:?} kept unoptimized: {why}"));
                log.action = WindowAction::Unsolved;
                log.note = Some(why);
                block
            }
        };
        log.after = optimized.len();
        if full.is_empty() || optimized.len() < config.accept_window {
            log.accepted = optimized.len();
            output.extend(optimized);
        } else {
            let (head, tail) = optimized.split_at(config.accept_window);
            log.accepted = head.len();
            output.extend_from_slice(head);
            let mut next = tail.to_vec();
            next.extend(full);
            full = next;
        }
        windows.push(log);
    }
    let pass_counts = vec![output.len()];
    Ok(RhoOutcome { gates: output, windows, pass_counts, warnings })
}

/// Runs up to `config.passes` passes, each seeded by the previous output,
/// stopping after a pass without improvement. The result is checked against
/// the seed up to global phase.
pub fn rolling_horizon_passes(t: &[GateSpec], config: &RhoConfig, solver: &mut dyn WindowSolver) -> Result<RhoOutcome, RhoError> {
    config.validate()?;
    let mut cur = t.to_vec();
    let mut all = RhoOutcome { gates: Vec::new(), windows: Vec::new(), pass_counts: Vec::new(), warnings: Vec::new() };
    for pass in 1..=config.passes {
        let out = rolling_horizon(&cur, config, solver)?;
        all.windows.extend(out.windows.into_iter().map(|w| WindowLog { pass, ..w }));
        all.warnings.extend(out.warnings);
        let improved = out.gates.len() < cur.len();
        all.pass_counts.push(out.gates.len());
        cur = out.gates;
        if !improved {
            break;
        }
    }
    let f = equivalence_fidelity(t, &cur)?;
    if (1.0 - f).abs() > 1e-9 {
        return Err(RhoError::NotEquivalent(f));
    }
    all.gates = cur;
    Ok(all)
}

/// Fidelity between the unitaries of two gate lists on their joint support.
pub fn equivalence_fidelity(a: &[GateSpec], b: &[GateSpec]) -> Result<f64, RhoError> {
    let nq = qubits_of(a.iter().chain(b)).into_iter().max().unwrap_or(1);
    let ua = circuit_unitary(a, nq)?;
    let ub = circuit_unitary(b, nq)?;
    Ok(crate::encoding::fidelity_unchecked(&ua, &ub))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn g(name: &str, q: &[usize]) -> GateSpec {
        GateSpec::builtin(name, q, None).unwrap()
    }

    fn set(q: &[usize]) -> BTreeSet<usize> {
        q.iter().copied().collect()
    }

    fn random_list(rng: &mut StdRng, len: usize, nq: usize) -> GateList {
        (0..len)
            .map(|_| {
                if rng.random_bool(0.4) {
                    let a = rng.random_range(1..=nq);
                    let mut b = rng.random_range(1..=nq);
                    while b == a {
                        b = rng.random_range(1..=nq);
                    }
                    g("CNOT", &[a, b])
                } else {
                    g(["H", "S", "T"][rng.random_range(0..3)], &[rng.random_range(1..=nq)])
                }
            })
            .collect()
    }

    #[test]
    fn selects_gates_on_qubits() {
        let t = vec![g("H", &[1]), g("X", &[2]), g("CNOT", &[1, 2])];
        let got = gates_on_qubits_up_to(&t, &set(&[1]), 3).unwrap();
        assert_eq!(got, vec![t[0].clone(), t[2].clone()]);
        assert!(gates_on_qubits_up_to(&t, &set(&[]), 3).unwrap().is_empty());
        assert!(gates_on_qubits_up_to(&t, &set(&[1]), 4).is_err());
        assert!(gates_on_qubits_up_to(&t, &set(&[1]), 0).is_err());
    }

    #[test]
    fn selection_matches_naive_filter() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..100 {
            let t = random_list(&mut rng, 12, 4);
            let q: BTreeSet<usize> = (1..=4).filter(|_| rng.random_bool(0.4)).collect();
            let i = rng.random_range(1..=12);
            let mut naive = Vec::new();
            for gate in &t[..i] {
                if gate.qubits.iter().any(|x| q.contains(x)) {
                    naive.push(gate.clone());
                }
            }
            assert_eq!(gates_on_qubits_up_to(&t, &q, i).unwrap(), naive);
        }
    }

    #[test]
    fn single_qubit_lists_need_no_recursion() {
        let t = vec![g("H", &[1]), g("T", &[2]), g("S", &[1])];
        for i in 1..=3 {
            assert_eq!(recursive_gates_on_qubits_up_to(&t, &set(&[1]), i).unwrap(), gates_on_qubits_up_to(&t, &set(&[1]), i).unwrap());
        }
    }

    #[test]
    fn closure_holds_on_random_circuits() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..100 {
            let t = random_list(&mut rng, 15, 5);
            let i = rng.random_range(1..=15);
            let q = set(&[rng.random_range(1..=5)]);
            let sel = recursive_gates_on_qubits_up_to_indices(&t, &q, i).unwrap();
            let qs = qubits_of(sel.iter().map(|&j| &t[j]));
            for j in 0..i {
                if !sel.contains(&j) {
                    assert!(t[j].qubits.iter().all(|x| !qs.contains(x)));
                }
            }
        }
    }

    #[test]
    fn block_stops_before_caps() {
        let t = vec![g("H", &[1]), g("H", &[2]), g("CNOT", &[1, 2]), g("CNOT", &[2, 3]), g("T", &[1])];
        assert_eq!(find_first_block_indices(&t, 10, 4).unwrap(), vec![0, 1, 2, 3, 4]);
        // CNOT(2,3) would need qubit 3
        assert_eq!(find_first_block_indices(&t, 10, 2).unwrap(), vec![0, 1, 2]);
        // both caps exceeded by the same gate
        assert_eq!(find_first_block_indices(&t, 3, 2).unwrap(), vec![0, 1, 2]);
        assert_eq!(find_first_block_indices(&t, 2, 4).unwrap(), vec![0]);
        let wide = vec![g("CNOT", &[1, 2]), g("H", &[1])];
        assert_eq!(find_first_block_indices(&wide, 5, 1).unwrap(), vec![0]);
    }

    #[test]
    fn retarget_examples() {
        let t = circuit_unitary(&[g("H", &[1]), g("CNOT", &[1, 2]), g("T", &[2])], 2).unwrap();
        assert!(retarget(&t, &[]).unwrap().approx_eq(&t, 1e-12));
        let cx = circuit_unitary(&[g("CNOT", &[1, 2])], 2).unwrap();
        assert!(retarget(&t, &[g("CNOT", &[1, 2])]).unwrap().approx_eq(&(&cx * &t), 1e-12));
        let seed = [g("H", &[1]), g("CNOT", &[1, 2]), g("T", &[2])];
        assert!(retarget(&t, &seed).unwrap().approx_eq(&ComplexMatrix::identity(4), 1e-12));
    }

    #[test]
    fn parity_ladder_matches_exponential() {
        let lad = parity_ladder_zzz(0.0, [1, 2, 3]).unwrap();
        assert!(circuit_unitary(&lad, 3).unwrap().approx_eq(&ComplexMatrix::identity(8), 1e-12));
        let theta = core::f64::consts::FRAC_PI_2;
        let lad = parity_ladder_zzz(theta, [1, 2, 3]).unwrap();
        // Z⊗Z⊗Z is diagonal with entries (−1)^{popcount}
        let direct = ComplexMatrix::diagonal(
            &(0..8usize)
                .map(|k| {
                    let z = if k.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    let a = -theta / 2.0 * z;
                    crate::encoding::C64::from_polar(1.0, a)
                })
                .collect::<Vec<_>>(),
        );
        let u = circuit_unitary(&lad, 3).unwrap();
        assert!(u.approx_eq(&direct, 1e-12));
        assert!(parity_ladder_zzz(1.0, [1, 1, 2]).is_err());
        assert_eq!(zzz_hypergraph_seed(5, theta).unwrap().len(), 50);
    }

    #[test]
    fn instantiation_drops_symmetric_duplicates() {
        let gs = instantiate_gate_set(&[g("CZ", &[1, 2]), g("H", &[1])], 3, EqualityMode::Exact).unwrap();
        // 3 CZ pairs, 3 H, plus the identity
        assert_eq!(gs.len(), 7);
        let gs = instantiate_gate_set(&[g("CNOT", &[1, 2]), g("H", &[1]), g("S", &[1])], 2, EqualityMode::UpToPhase).unwrap();
        assert_eq!(gs.len(), 7);
    }

    #[test]
    fn rolling_horizon_cancels_and_preserves_unitary() {
        let seed = vec![g("H", &[1]), g("H", &[1]), g("CNOT", &[1, 2]), g("S", &[2]), g("S", &[2]), g("CNOT", &[1, 2]), g("H", &[3])];
        let mut cfg = RhoConfig::new(6, 6, 2, vec![g("CNOT", &[1, 2]), g("H", &[1]), g("S", &[1]), g("Z", &[1])]);
        cfg.passes = 2;
        let mut solver = OracleWindowSolver::new(3, OracleLimits::default());
        let out = rolling_horizon_passes(&seed, &cfg, &mut solver).unwrap();
        assert!(out.gates.len() < seed.len());
        assert!((equivalence_fidelity(&seed, &out.gates).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn partial_acceptance_prepends_remainder() {
        let seed: GateList = vec![g("CNOT", &[1, 2]), g("H", &[2]), g("CNOT", &[2, 3]), g("H", &[1]), g("CNOT", &[1, 3]), g("T", &[3]), g("CNOT", &[1, 2])];
        let cfg = RhoConfig::new(4, 1, 3, vec![g("CNOT", &[1, 2]), g("H", &[1]), g("T", &[1])]);
        let mut solver = OracleWindowSolver::new(3, OracleLimits::default());
        let out = rolling_horizon(&seed, &cfg, &mut solver).unwrap();
        assert!((equivalence_fidelity(&seed, &out.gates).unwrap() - 1.0).abs() < 1e-9);
        assert!(out.windows.len() > 1);
    }

    #[test]
    fn config_validation() {
        let cfg = RhoConfig::new(4, 5, 3, vec![g("H", &[1])]);
        assert!(cfg.validate().is_err());
        let cfg = RhoConfig::new(4, 2, 0, vec![g("H", &[1])]);
        assert!(cfg.validate().is_err());
    }
}
