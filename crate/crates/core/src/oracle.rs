//! Exhaustive reference synthesis.
//!
//! [`exhaustive_synthesize`] explores gate sequences length by length, merging
//! sequences that realize the same unitary. [`MeetInTheMiddle`] answers
//! shortest-sequence queries for larger registers by matching a cached
//! forward ball against a backward search from the target.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
#[allow(unused_imports)]
use num_traits::Float;

use crate::encoding::{c, encode_real, fidelity_unchecked, overlap, ComplexMatrix, C64, TOL_IDENTITY};
use crate::fingerprint::{fingerprint, matrices_equal, EqualityMode};
use crate::gates::GateSet;

/// What the oracle optimizes.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleObjective {
    /// Minimum total weight (weights indexed by gate; identity ignored).
    GateCount { weights: Vec<f64> },
    /// Minimum scheduled depth over all sequences of length at most `P`.
    Depth,
    /// Maximum phase-invariant fidelity.
    MaxFidelity,
    /// Maximum real trace overlap `α`.
    MaxAlpha,
    /// Minimum `‖R(U) − R(T)‖_F²` subject to every entry within `epsilon`.
    MinFrobenius { epsilon: f64 },
}

impl OracleObjective {
    pub fn unit_count(gs: &GateSet) -> Self {
        Self::GateCount { weights: vec![1.0; gs.len()] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    /// Maximum number of distinct search states.
    pub max_nodes: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { max_nodes: 2_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    /// Gate indices, identities excluded.
    pub sequence: Vec<usize>,
    /// Objective value (weight, depth, F, α or ‖E‖²).
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("oracle inconclusive: node budget {budget} exhausted at length {length}")]
    Inconclusive { budget: usize, length: usize },
    #[error("target dimension {found} does not match gate set dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

struct Node {
    parent: u32,
    gate: u32,
    len: u32,
}

const ROOT: u32 = u32::MAX;

fn chain(nodes: &[Node], mut k: u32) -> Vec<usize> {
    let mut out = Vec::new();
    while k != ROOT {
        let n = &nodes[k as usize];
        if n.gate != ROOT {
            out.push(n.gate as usize);
        }
        k = n.parent;
    }
    out.reverse();
    out
}

/// Minimal-objective sequence of at most `p_max` non-identity gates, or
/// `Ok(None)` when no sequence within the budget is feasible.
///
/// Target equality follows `mode`: exact matrix equality, or equality up to a
/// global phase. Fidelity objectives ignore `mode` for feasibility.
pub fn exhaustive_synthesize(
    target: &ComplexMatrix,
    gs: &GateSet,
    p_max: usize,
    objective: &OracleObjective,
    mode: EqualityMode,
    limits: OracleLimits,
) -> Result<Option<OracleOutcome>, OracleError> {
    if target.dim() != gs.dim() {
        return Err(OracleError::DimensionMismatch { expected: gs.dim(), found: target.dim() });
    }
    match objective {
        OracleObjective::GateCount { weights } => weighted_count(target, gs, p_max, weights, mode, limits),
        OracleObjective::Depth => min_depth(target, gs, p_max, mode, limits),
        _ => best_value(target, gs, p_max, objective, limits),
    }
}

fn weighted_count(
    target: &ComplexMatrix,
    gs: &GateSet,
    p_max: usize,
    weights: &[f64],
    mode: EqualityMode,
    limits: OracleLimits,
) -> Result<Option<OracleOutcome>, OracleError> {
    let ids: Vec<usize> = gs.non_identity().collect();
    let mut nodes = vec![Node { parent: ROOT, gate: ROOT, len: 0 }];
    let mut best: HashMap<u64, (f64, u32)> = HashMap::new();
    let root = ComplexMatrix::identity(gs.dim());
    best.insert(fingerprint(&root, mode), (0.0, 0));
    let mut hit: Option<(f64, u32)> = matrices_equal(&root, target, mode, TOL_IDENTITY).then_some((0.0, 0));
    let mut frontier = vec![(0u32, root, 0.0f64)];
    for len in 1..=p_max {
        let mut next = Vec::new();
        for (k, m, w) in &frontier {
            for &g in &ids {
                let nw = w + weights[g];
                let prod = m * &gs.gate(g).full_matrix;
                let key = fingerprint(&prod, mode);
                if let Some(&(old, _)) = best.get(&key) {
                    if old <= nw + 1e-12 {
                        continue;
                    }
                }
                if nodes.len() >= limits.max_nodes {
                    return Err(OracleError::Inconclusive { budget: limits.max_nodes, length: len });
                }
                let id = nodes.len() as u32;
                nodes.push(Node { parent: *k, gate: g as u32, len: len as u32 });
                best.insert(key, (nw, id));
                if matrices_equal(&prod, target, mode, TOL_IDENTITY) && hit.is_none_or(|(hw, _)| nw < hw - 1e-12) {
                    hit = Some((nw, id));
                }
                next.push((id, prod, nw));
            }
        }
        // states superseded within this level are dropped from the frontier
        next.retain(|(id, m, _)| best.get(&fingerprint(m, mode)).is_some_and(|&(_, b)| b == *id));
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    Ok(hit.map(|(w, id)| OracleOutcome { sequence: chain(&nodes, id), value: w }))
}

fn mix_key(fp: u64, depth: u32, mask: u64) -> u64 {
    let mut h = fp ^ 0x51_7cc1_b727_220a_u64.wrapping_mul(depth as u64 + 1);
    h = h.rotate_left(17) ^ mask.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    h.wrapping_mul(0xbf58_476d_1ce4_e5b9)
}

fn min_depth(
    target: &ComplexMatrix,
    gs: &GateSet,
    p_max: usize,
    mode: EqualityMode,
    limits: OracleLimits,
) -> Result<Option<OracleOutcome>, OracleError> {
    let ids: Vec<usize> = gs.non_identity().collect();
    let masks: Vec<u64> = (0..gs.len()).map(|g| gs.gate(g).support.iter().map(|q| 1u64 << q).sum()).collect();
    let root = ComplexMatrix::identity(gs.dim());
    if matrices_equal(&root, target, mode, TOL_IDENTITY) {
        return Ok(Some(OracleOutcome { sequence: Vec::new(), value: 0.0 }));
    }
    let mut nodes = vec![Node { parent: ROOT, gate: ROOT, len: 0 }];
    let mut seen: HashMap<u64, ()> = HashMap::new();
    let mut hit: Option<(u32, u32)> = None;
    // (node, matrix, current depth, qubits busy at that depth)
    let mut frontier = vec![(0u32, root, 0u32, 0u64)];
    for len in 1..=p_max {
        let mut next = Vec::new();
        for (k, m, d, busy) in &frontier {
            for &g in &ids {
                let (nd, nb) = if *d == 0 || busy & masks[g] != 0 { (d + 1, masks[g]) } else { (*d, busy | masks[g]) };
                if hit.is_some_and(|(hd, _)| nd >= hd) {
                    continue;
                }
                let prod = m * &gs.gate(g).full_matrix;
                let key = mix_key(fingerprint(&prod, mode), nd, nb);
                if seen.insert(key, ()).is_some() {
                    continue;
                }
                if nodes.len() >= limits.max_nodes {
                    return Err(OracleError::Inconclusive { budget: limits.max_nodes, length: len });
                }
                let id = nodes.len() as u32;
                nodes.push(Node { parent: *k, gate: g as u32, len: len as u32 });
                if matrices_equal(&prod, target, mode, TOL_IDENTITY) {
                    hit = Some((nd, id));
                }
                next.push((id, prod, nd, nb));
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    Ok(hit.map(|(d, id)| OracleOutcome { sequence: chain(&nodes, id), value: d as f64 }))
}

/// `(α, ‖R(U) − R(T)‖_F², max entry of |R(U) − R(T)|)` computed in complex arithmetic.
pub fn overlap_stats(u: &ComplexMatrix, t: &ComplexMatrix) -> (f64, f64, f64) {
    let alpha = overlap(u, t).re;
    let mut fro = 0.0;
    let mut max_entry = 0.0f64;
    for (a, b) in u.as_slice().iter().zip(t.as_slice()) {
        let d = a - b;
        fro += 2.0 * d.norm_sqr();
        max_entry = max_entry.max(d.re.abs()).max(d.im.abs());
    }
    (alpha, fro, max_entry)
}

fn best_value(
    target: &ComplexMatrix,
    gs: &GateSet,
    p_max: usize,
    objective: &OracleObjective,
    limits: OracleLimits,
) -> Result<Option<OracleOutcome>, OracleError> {
    // fidelity is phase invariant; α and ‖E‖ are not
    let mode = match objective {
        OracleObjective::MaxFidelity => EqualityMode::UpToPhase,
        _ => EqualityMode::Exact,
    };
    // larger score is better
    let score = |u: &ComplexMatrix| -> Option<f64> {
        match objective {
            OracleObjective::MaxFidelity => Some(fidelity_unchecked(u, target)),
            OracleObjective::MaxAlpha => Some(overlap_stats(u, target).0),
            OracleObjective::MinFrobenius { epsilon } => {
                let (_, fro, max_entry) = overlap_stats(u, target);
                (max_entry <= epsilon + 1e-12).then_some(-fro)
            }
            _ => unreachable!(),
        }
    };
    let ids: Vec<usize> = gs.non_identity().collect();
    let root = ComplexMatrix::identity(gs.dim());
    let mut nodes = vec![Node { parent: ROOT, gate: ROOT, len: 0 }];
    let mut seen: HashMap<u64, ()> = HashMap::new();
    seen.insert(fingerprint(&root, mode), ());
    let mut hit: Option<(f64, u32)> = score(&root).map(|s| (s, 0));
    let mut frontier = vec![(0u32, root)];
    for len in 1..=p_max {
        let mut next = Vec::new();
        for (k, m) in &frontier {
            for &g in &ids {
                let prod = m * &gs.gate(g).full_matrix;
                if seen.insert(fingerprint(&prod, mode), ()).is_some() {
                    continue;
                }
                if nodes.len() >= limits.max_nodes {
                    return Err(OracleError::Inconclusive { budget: limits.max_nodes, length: len });
                }
                let id = nodes.len() as u32;
                nodes.push(Node { parent: *k, gate: g as u32, len: len as u32 });
                if let Some(s) = score(&prod) {
                    if hit.is_none_or(|(h, _)| s > h + 1e-13) {
                        hit = Some((s, id));
                    }
                }
                next.push((id, prod));
            }
        }
        frontier = next;
    }
    Ok(hit.map(|(s, id)| {
        let value = if matches!(objective, OracleObjective::MinFrobenius { .. }) { -s } else { s };
        OracleOutcome { sequence: chain(&nodes, id), value }
    }))
}

/// Sparse rows of a gate matrix: `(row, [(col, value)])`.
#[derive(Debug, Clone)]
struct SparseGate {
    entries: Vec<(u32, u32, C64)>,
}

impl SparseGate {
    fn new(m: &ComplexMatrix) -> Self {
        let n = m.dim();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let z = m.get(i, j);
                if z.norm() > 1e-15 {
                    entries.push((i as u32, j as u32, z));
                }
            }
        }
        Self { entries }
    }

    fn apply(&self, v: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|z| *z = c(0.0, 0.0));
        for &(i, j, z) in &self.entries {
            out[i as usize] += z * v[j as usize];
        }
    }
}

fn probe_vector(dim: usize) -> Vec<C64> {
    // fixed splitmix64 stream; any generic vector works
    let mut s: u64 = 0x2545_f491_4f6c_dd1d;
    let mut next = || {
        s = s.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = s;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let v: Vec<C64> = (0..dim).map(|_| c(next(), next())).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

fn vector_key(v: &[C64], mode: EqualityMode) -> u64 {
    let phase = match mode {
        EqualityMode::Exact => c(1.0, 0.0),
        EqualityMode::UpToPhase => v
            .iter()
            .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
            .map(|z| z.conj() / z.norm())
            .unwrap_or(c(1.0, 0.0)),
    };
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for z in v {
        let w = z * phase;
        for x in [w.re, w.im] {
            h ^= ((x * 1e7).round() + 0.0) as i64 as u64;
            h = h.wrapping_mul(0x1000_0000_01b3).rotate_left(23);
        }
    }
    h
}

/// Bidirectional shortest-sequence search with a reusable forward ball.
///
/// Unitaries are identified through their action on one fixed generic
/// vector, which separates distinct unitaries almost surely; every candidate
/// is re-verified with full matrices before being returned.
pub struct MeetInTheMiddle {
    gs: GateSet,
    mode: EqualityMode,
    ids: Vec<usize>,
    sparse: Vec<SparseGate>,
    sparse_adj: Vec<SparseGate>,
    probe: Vec<C64>,
    nodes: Vec<Node>,
    forward: HashMap<u64, u32>,
    depth: usize,
}

impl MeetInTheMiddle {
    /// Builds the forward ball of all products of at most `forward_depth` gates.
    pub fn new(gs: &GateSet, mode: EqualityMode, forward_depth: usize, limits: OracleLimits) -> Result<Self, OracleError> {
        let ids: Vec<usize> = gs.non_identity().collect();
        let sparse = (0..gs.len()).map(|g| SparseGate::new(&gs.gate(g).full_matrix)).collect();
        let sparse_adj = (0..gs.len()).map(|g| SparseGate::new(&gs.gate(g).full_matrix.adjoint())).collect();
        let probe = probe_vector(gs.dim());
        let mut me = Self {
            gs: gs.clone(),
            mode,
            ids,
            sparse,
            sparse_adj,
            probe,
            nodes: vec![Node { parent: ROOT, gate: ROOT, len: 0 }],
            forward: HashMap::new(),
            depth: forward_depth,
        };
        me.forward.insert(vector_key(&me.probe, mode), 0);
        let mut frontier: Vec<(u32, Vec<C64>)> = vec![(0, me.probe.clone())];
        let mut buf = vec![c(0.0, 0.0); gs.dim()];
        for len in 1..=forward_depth {
            let mut next = Vec::new();
            for (k, v) in &frontier {
                for &g in &me.ids {
                    // prepend g: (g·U) v = g (U v)
                    me.sparse[g].apply(v, &mut buf);
                    let key = vector_key(&buf, mode);
                    if me.forward.contains_key(&key) {
                        continue;
                    }
                    if me.nodes.len() >= limits.max_nodes {
                        return Err(OracleError::Inconclusive { budget: limits.max_nodes, length: len });
                    }
                    let id = me.nodes.len() as u32;
                    me.nodes.push(Node { parent: *k, gate: g as u32, len: len as u32 });
                    me.forward.insert(key, id);
                    if len < forward_depth {
                        next.push((id, buf.clone()));
                    }
                }
            }
            frontier = next;
        }
        Ok(me)
    }

    pub fn gate_set(&self) -> &GateSet {
        &self.gs
    }

    pub fn forward_size(&self) -> usize {
        self.forward.len()
    }

    /// Forward node sequence in left-to-right order.
    fn forward_sequence(&self, mut k: u32) -> Vec<usize> {
        // nodes were built by prepending, so walking to the root yields left-to-right order
        let mut out = Vec::new();
        while k != ROOT && k != 0 {
            let n = &self.nodes[k as usize];
            out.push(n.gate as usize);
            k = n.parent;
        }
        out
    }

    /// A shortest sequence of at most `max_len` gates equal to `target` under
    /// the search mode, or `None` if there is none.
    pub fn shortest(&self, target: &ComplexMatrix, max_len: usize, limits: OracleLimits) -> Result<Option<Vec<usize>>, OracleError> {
        if target.dim() != self.gs.dim() {
            return Err(OracleError::DimensionMismatch { expected: self.gs.dim(), found: target.dim() });
        }
        let n = target.dim();
        let apply_target = |w: &[C64], out: &mut [C64]| {
            for i in 0..n {
                out[i] = (0..n).map(|j| target.get(i, j) * w[j]).sum();
            }
        };
        let mut tw = vec![c(0.0, 0.0); n];
        let mut back_nodes = vec![Node { parent: ROOT, gate: ROOT, len: 0 }];
        let mut back_seen: HashMap<u64, ()> = HashMap::new();
        back_seen.insert(vector_key(&self.probe, self.mode), ());
        let mut frontier: Vec<(u32, Vec<C64>)> = vec![(0, self.probe.clone())];
        let mut buf = vec![c(0.0, 0.0); n];
        let back_max = max_len.saturating_sub(self.depth);
        for b in 0..=back_max {
            let mut best: Option<Vec<usize>> = None;
            for (k, w) in &frontier {
                apply_target(w, &mut tw);
                if let Some(&f) = self.forward.get(&vector_key(&tw, self.mode)) {
                    let a = self.nodes[f as usize].len as usize;
                    if a + b > max_len || best.as_ref().is_some_and(|s| s.len() <= a + b) {
                        continue;
                    }
                    let mut seq = self.forward_sequence(f);
                    seq.extend(chain(&back_nodes, *k));
                    if matrices_equal(&self.gs.product(&seq), target, self.mode, TOL_IDENTITY) {
                        best = Some(seq);
                    }
                }
            }
            if best.is_some() {
                return Ok(best);
            }
            if b == back_max {
                break;
            }
            let mut next = Vec::new();
            for (k, w) in &frontier {
                for &g in &self.ids {
                    // append g on the right of U_r: (U_r g)† v = g† (U_r† v)
                    self.sparse_adj[g].apply(w, &mut buf);
                    if back_seen.insert(vector_key(&buf, self.mode), ()).is_some() {
                        continue;
                    }
                    if back_nodes.len() >= limits.max_nodes {
                        return Err(OracleError::Inconclusive { budget: limits.max_nodes, length: self.depth + b + 1 });
                    }
                    let id = back_nodes.len() as u32;
                    back_nodes.push(Node { parent: *k, gate: g as u32, len: (b + 1) as u32 });
                    next.push((id, buf.clone()));
                }
            }
            frontier = next;
        }
        Ok(None)
    }
}

/// Human-readable rendering of a sequence, e.g. `H(2) CNOT(1,2) H(2)`.
pub fn describe(gs: &GateSet, seq: &[usize]) -> String {
    let parts: Vec<String> = seq.iter().map(|&g| gs.gate(g).spec.label()).collect();
    if parts.is_empty() {
        String::from("(empty)")
    } else {
        parts.join(" ")
    }
}

/// `R(U)` residual diagnostics used in error messages.
pub(crate) fn residual_summary(u: &ComplexMatrix, t: &ComplexMatrix) -> String {
    let e = encode_real(u).into_real().sub(encode_real(t).as_real());
    format!("max |R(U) - R(T)| = {:.3e}, fidelity = {:.12}", e.as_slice().iter().fold(0.0f64, |a, x| a.max(x.abs())), fidelity_unchecked(u, t))
}
