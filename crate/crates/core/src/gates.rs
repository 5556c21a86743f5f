//! Elementary gates, their extension to the full register, and algebraic
//! relation detection.
//!
//! Qubits are numbered from 1. Qubit 1 is the most significant tensor factor,
//! so on `Q` qubits it owns bit `Q - 1` of a basis-state index. The base matrix
//! of a gate on `qubits = [q0, q1, ..]` has `q0` as its most significant slot.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use hashbrown::{HashMap, HashSet};
#[allow(unused_imports)]
use num_traits::Float;

use crate::encoding::{c, encode_real, ComplexMatrix, EncodingError, RealEncodedMatrix, C64, TOL_IDENTITY, TOL_UNITARY};
use crate::fingerprint::{fingerprint, matrices_equal, EqualityMode};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GateError {
    #[error("unknown gate name `{0}`")]
    UnknownGate(String),
    #[error("gate `{name}` acts on {expected} qubit(s), got {found}")]
    WrongArity { name: String, expected: usize, found: usize },
    #[error("gate `{0}` needs an angle")]
    MissingAngle(String),
    #[error("gate `{0}` takes no angle")]
    UnexpectedAngle(String),
    #[error("gate `{0}` acts on no qubits")]
    NoQubits(String),
    #[error("qubit {qubit} out of range 1..={num_qubits}")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("qubit {0} listed twice")]
    DuplicateQubit(usize),
    #[error("gate `{name}` is not unitary (defect {defect:e})")]
    NotUnitary { name: String, defect: f64 },
    #[error("gates {first} and {second} coincide as matrices")]
    DuplicateGate { first: usize, second: usize },
    #[error("more than one identity gate ({first} and {second})")]
    DuplicateIdentity { first: usize, second: usize },
    #[error("k_max = {0} outside 2..=5")]
    KMaxOutOfRange(usize),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

/// A named gate placed on specific qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSpec {
    pub name: String,
    pub qubits: Vec<usize>,
    pub param: Option<f64>,
    pub base_matrix: ComplexMatrix,
}

impl GateSpec {
    /// Custom gate from an explicit matrix.
    pub fn new(name: &str, qubits: &[usize], param: Option<f64>, base_matrix: ComplexMatrix) -> Result<Self, GateError> {
        if qubits.is_empty() {
            return Err(GateError::NoQubits(name.to_owned()));
        }
        let arity = base_matrix.num_qubits()?;
        if arity != qubits.len() {
            return Err(GateError::WrongArity { name: name.to_owned(), expected: arity, found: qubits.len() });
        }
        for (k, q) in qubits.iter().enumerate() {
            if qubits[..k].contains(q) {
                return Err(GateError::DuplicateQubit(*q));
            }
        }
        let defect = base_matrix.unitarity_defect();
        if !(defect <= TOL_UNITARY) {
            return Err(GateError::NotUnitary { name: name.to_owned(), defect });
        }
        Ok(Self { name: name.to_owned(), qubits: qubits.to_vec(), param, base_matrix })
    }

    /// Gate from the built-in library. Names are case-insensitive.
    pub fn builtin(name: &str, qubits: &[usize], param: Option<f64>) -> Result<Self, GateError> {
        let (canonical, base) = builtin_matrix(name, param)?;
        let arity = base.num_qubits()?;
        if arity != qubits.len() {
            return Err(GateError::WrongArity { name: name.to_owned(), expected: arity, found: qubits.len() });
        }
        Self::new(canonical, qubits, param, base)
    }

    pub fn arity(&self) -> usize {
        self.qubits.len()
    }

    /// Short human label such as `CNOT(1,3)` or `RZ[1.5708](2)`.
    pub fn label(&self) -> String {
        let qs: Vec<String> = self.qubits.iter().map(|q| format!("{q}")).collect();
        match self.param {
            Some(t) => format!("{}[{:.4}]({})", self.name, t, qs.join(",")),
            None => format!("{}({})", self.name, qs.join(",")),
        }
    }

    /// Same gate moved onto other qubits via `map(old) = new`.
    pub fn relabeled(&self, map: impl Fn(usize) -> usize) -> Self {
        Self { qubits: self.qubits.iter().map(|&q| map(q)).collect(), ..self.clone() }
    }
}

fn single(rows: [[C64; 2]; 2]) -> ComplexMatrix {
    ComplexMatrix::from_fn(2, |i, j| rows[i][j])
}

fn controlled(u: &ComplexMatrix) -> ComplexMatrix {
    let n = u.dim();
    ComplexMatrix::from_fn(2 * n, |i, j| match (i < n, j < n) {
        (true, true) => {
            if i == j {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        }
        (false, false) => u.get(i - n, j - n),
        _ => c(0.0, 0.0),
    })
}

/// Golden ratio.
pub const PHI: f64 = 1.618_033_988_749_894_9;

fn fib_r() -> ComplexMatrix {
    ComplexMatrix::diagonal(&[C64::from_polar(1.0, -4.0 * PI / 5.0), C64::from_polar(1.0, 3.0 * PI / 5.0)])
}

fn fib_f() -> ComplexMatrix {
    let a = 1.0 / PHI;
    let b = 1.0 / PHI.sqrt();
    ComplexMatrix::from_real_rows(&[&[a, b], &[b, -a]]).expect("2x2")
}

/// Fibonacci braid generator `σ1` or `σ2`.
pub fn sigma(which: u8) -> ComplexMatrix {
    let phase = C64::from_polar(1.0, PI / 10.0);
    let r = fib_r();
    match which {
        1 => r.scale(phase),
        _ => {
            let f = fib_f();
            (&(&f * &r) * &f).scale(phase)
        }
    }
}

/// Names understood by [`GateSpec::builtin`], in canonical spelling.
pub const BUILTIN_NAMES: &[&str] = &[
    "I", "X", "Y", "Z", "H", "S", "Sdg", "T", "Tdg", "SX", "SXdg", "RX", "RY", "RZ", "P", "CNOT", "CY", "CZ", "CH",
    "CV", "CVdg", "SWAP", "iSWAP", "SIGMA1", "SIGMA1dg", "SIGMA2", "SIGMA2dg", "W1", "W1dg", "W2", "W2dg",
];

/// Matrix and canonical name of a built-in gate.
pub fn builtin_matrix(name: &str, param: Option<f64>) -> Result<(&'static str, ComplexMatrix), GateError> {
    let upper = name.to_ascii_uppercase();
    let key = match upper.as_str() {
        "CX" => "CNOT",
        "V" => "SX",
        "VDG" => "SXDG",
        "PHASE" => "P",
        "CSX" => "CV",
        "CSXDG" => "CVDG",
        other => other,
    };
    let canonical = *BUILTIN_NAMES
        .iter()
        .find(|n| n.to_ascii_uppercase() == key)
        .ok_or_else(|| GateError::UnknownGate(name.to_owned()))?;
    let rotation = matches!(canonical, "RX" | "RY" | "RZ" | "P");
    let theta = match (rotation, param) {
        (true, Some(t)) => t,
        (true, None) => return Err(GateError::MissingAngle(name.to_owned())),
        (false, Some(_)) => return Err(GateError::UnexpectedAngle(name.to_owned())),
        (false, None) => 0.0,
    };
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    let h = c(FRAC_1_SQRT_2, 0.0);
    let x = single([[o, l], [l, o]]);
    let sx = single([[c(0.5, 0.5), c(0.5, -0.5)], [c(0.5, -0.5), c(0.5, 0.5)]]);
    let (ct, st) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let m = match canonical {
        "I" => ComplexMatrix::identity(2),
        "X" => x,
        "Y" => single([[o, -i], [i, o]]),
        "Z" => ComplexMatrix::diagonal(&[l, -l]),
        "H" => single([[h, h], [h, -h]]),
        "S" => ComplexMatrix::diagonal(&[l, i]),
        "Sdg" => ComplexMatrix::diagonal(&[l, -i]),
        "T" => ComplexMatrix::diagonal(&[l, C64::from_polar(1.0, PI / 4.0)]),
        "Tdg" => ComplexMatrix::diagonal(&[l, C64::from_polar(1.0, -PI / 4.0)]),
        "SX" => sx,
        "SXdg" => sx.adjoint(),
        "RX" => single([[c(ct, 0.0), c(0.0, -st)], [c(0.0, -st), c(ct, 0.0)]]),
        "RY" => single([[c(ct, 0.0), c(-st, 0.0)], [c(st, 0.0), c(ct, 0.0)]]),
        "RZ" => ComplexMatrix::diagonal(&[C64::from_polar(1.0, -theta / 2.0), C64::from_polar(1.0, theta / 2.0)]),
        "P" => ComplexMatrix::diagonal(&[l, C64::from_polar(1.0, theta)]),
        "CNOT" => controlled(&x),
        "CY" => controlled(&single([[o, -i], [i, o]])),
        "CZ" => ComplexMatrix::diagonal(&[l, l, l, -l]),
        "CH" => controlled(&single([[h, h], [h, -h]])),
        "CV" => controlled(&sx),
        "CVdg" => controlled(&sx.adjoint()),
        "SWAP" => ComplexMatrix::from_fn(4, |r, s| if r == [0, 2, 1, 3][s] { l } else { o }),
        "iSWAP" => ComplexMatrix::from_fn(4, |r, s| match (r, s) {
            (0, 0) | (3, 3) => l,
            (1, 2) | (2, 1) => i,
            _ => o,
        }),
        "SIGMA1" => sigma(1),
        "SIGMA1dg" => sigma(1).adjoint(),
        "SIGMA2" => sigma(2),
        "SIGMA2dg" => sigma(2).adjoint(),
        "W1" => &sigma(1) * &sigma(1),
        "W1dg" => (&sigma(1) * &sigma(1)).adjoint(),
        "W2" => &sigma(2) * &sigma(2),
        "W2dg" => (&sigma(2) * &sigma(2)).adjoint(),
        _ => unreachable!("every builtin name has a matrix"),
    };
    Ok((canonical, m))
}

/// The braid generators `σ1, σ1⁻¹, σ2, σ2⁻¹` followed by the weaves
/// `σ1², σ1⁻², σ2², σ2⁻²`, all on qubit 1.
pub fn fibonacci_generators() -> Vec<GateSpec> {
    ["SIGMA1", "SIGMA1dg", "SIGMA2", "SIGMA2dg", "W1", "W1dg", "W2", "W2dg"]
        .iter()
        .map(|n| GateSpec::builtin(n, &[1], None).expect("builtin"))
        .collect()
}

/// Just the four weaves.
pub fn fibonacci_weaves() -> Vec<GateSpec> {
    fibonacci_generators().split_off(4)
}

#[inline]
fn bit_of(qubit: usize, num_qubits: usize) -> usize {
    num_qubits - qubit
}

fn check_qubits(qubits: &[usize], num_qubits: usize) -> Result<(), GateError> {
    for (k, &q) in qubits.iter().enumerate() {
        if q == 0 || q > num_qubits {
            return Err(GateError::QubitOutOfRange { qubit: q, num_qubits });
        }
        if qubits[..k].contains(&q) {
            return Err(GateError::DuplicateQubit(q));
        }
    }
    Ok(())
}

/// Embeds `base` (acting on `qubits`, slot order) into the `2^Q` register.
pub fn embed(base: &ComplexMatrix, qubits: &[usize], num_qubits: usize) -> Result<ComplexMatrix, GateError> {
    check_qubits(qubits, num_qubits)?;
    let k = qubits.len();
    if base.dim() != 1 << k {
        return Err(GateError::WrongArity { name: String::from("<matrix>"), expected: base.num_qubits()?, found: k });
    }
    let bits: Vec<usize> = qubits.iter().map(|&q| bit_of(q, num_qubits)).collect();
    let mask: usize = bits.iter().map(|b| 1 << b).sum();
    let local = |idx: usize| -> usize { bits.iter().fold(0, |acc, &b| (acc << 1) | ((idx >> b) & 1)) };
    let scatter = |loc: usize| -> usize {
        bits.iter().enumerate().map(|(slot, &b)| ((loc >> (k - 1 - slot)) & 1) << b).sum()
    };
    let n = 1usize << num_qubits;
    let mut out = ComplexMatrix::zeros(n);
    for col in 0..n {
        let lc = local(col);
        let rest = col & !mask;
        for lr in 0..(1 << k) {
            let z = base.get(lr, lc);
            if z != c(0.0, 0.0) {
                out.set(rest | scatter(lr), col, z);
            }
        }
    }
    Ok(out)
}

/// Whether `u` factors as identity on qubit `q` times something on the rest.
pub fn acts_trivially(u: &ComplexMatrix, q: usize, num_qubits: usize) -> bool {
    if q == 0 || q > num_qubits || u.dim() != 1 << num_qubits {
        return false;
    }
    let m = 1usize << bit_of(q, num_qubits);
    let n = u.dim();
    for i in 0..n {
        for j in 0..n {
            let z = u.get(i, j);
            if (i & m) != (j & m) {
                if z.norm() > TOL_IDENTITY {
                    return false;
                }
            } else if i & m != 0 && (z - u.get(i ^ m, j ^ m)).norm() > TOL_IDENTITY {
                return false;
            }
        }
    }
    true
}

/// A gate lifted to the full register.
#[derive(Debug, Clone)]
pub struct ExtendedGate {
    pub spec: GateSpec,
    pub full_matrix: ComplexMatrix,
    pub real_matrix: RealEncodedMatrix,
    pub index: usize,
    /// Qubits on which the gate acts non-trivially, ascending.
    pub support: Vec<usize>,
}

impl ExtendedGate {
    pub fn is_identity(&self) -> bool {
        self.full_matrix.approx_eq(&ComplexMatrix::identity(self.full_matrix.dim()), TOL_IDENTITY)
    }
}

pub fn extend_gate(spec: &GateSpec, num_qubits: usize) -> Result<ExtendedGate, GateError> {
    let full_matrix = embed(&spec.base_matrix, &spec.qubits, num_qubits)?;
    let support = (1..=num_qubits).filter(|&q| !acts_trivially(&full_matrix, q, num_qubits)).collect();
    let real_matrix = encode_real(&full_matrix);
    Ok(ExtendedGate { spec: spec.clone(), full_matrix, real_matrix, index: 0, support })
}

/// Ordered elementary gate set with exactly one identity.
#[derive(Debug, Clone)]
pub struct GateSet {
    num_qubits: usize,
    gates: Vec<ExtendedGate>,
    identity: usize,
    mode: EqualityMode,
}

impl GateSet {
    /// Builds the set in declaration order. If no declared gate is the
    /// identity, one named `I` is inserted at index 0.
    pub fn new(num_qubits: usize, specs: &[GateSpec], mode: EqualityMode) -> Result<Self, GateError> {
        let mut gates = specs.iter().map(|s| extend_gate(s, num_qubits)).collect::<Result<Vec<_>, _>>()?;
        let ids: Vec<usize> = (0..gates.len()).filter(|&k| gates[k].is_identity()).collect();
        if ids.len() > 1 {
            return Err(GateError::DuplicateIdentity { first: ids[0], second: ids[1] });
        }
        let identity = match ids.first() {
            Some(&k) => k,
            None => {
                let spec = GateSpec::builtin("I", &[1], None)?;
                gates.insert(0, extend_gate(&spec, num_qubits)?);
                0
            }
        };
        for (k, g) in gates.iter_mut().enumerate() {
            g.index = k;
        }
        for a in 0..gates.len() {
            for b in 0..a {
                if matrices_equal(&gates[a].full_matrix, &gates[b].full_matrix, mode, TOL_IDENTITY) {
                    return Err(GateError::DuplicateGate { first: b, second: a });
                }
            }
        }
        Ok(Self { num_qubits, gates, identity, mode })
    }

    /// Convenience constructor from built-in names, e.g. `("CNOT", &[1, 2])`.
    pub fn from_builtins(num_qubits: usize, names: &[(&str, &[usize])], mode: EqualityMode) -> Result<Self, GateError> {
        let specs = names.iter().map(|(n, q)| GateSpec::builtin(n, q, None)).collect::<Result<Vec<_>, _>>()?;
        Self::new(num_qubits, &specs, mode)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn gates(&self) -> &[ExtendedGate] {
        &self.gates
    }

    pub fn gate(&self, k: usize) -> &ExtendedGate {
        &self.gates[k]
    }

    pub fn identity_index(&self) -> usize {
        self.identity
    }

    pub fn equality_mode(&self) -> EqualityMode {
        self.mode
    }

    /// Indices of the non-identity gates in canonical order.
    pub fn non_identity(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.gates.len()).filter(move |&k| k != self.identity)
    }

    /// Gates acting non-trivially on qubit `q`.
    pub fn gates_on_qubit(&self, q: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.gates.len()).filter(move |&k| self.gates[k].support.contains(&q))
    }

    /// Left-to-right product `g[seq[0]] · g[seq[1]] · ...`.
    pub fn product(&self, seq: &[usize]) -> ComplexMatrix {
        seq.iter().fold(ComplexMatrix::identity(self.dim()), |acc, &k| &acc * &self.gates[k].full_matrix)
    }

    /// Finds a gate equal to `m` under `mode`.
    pub fn find(&self, m: &ComplexMatrix, mode: EqualityMode) -> Option<usize> {
        (0..self.gates.len()).find(|&k| matrices_equal(&self.gates[k].full_matrix, m, mode, TOL_IDENTITY))
    }
}

/// A sequence of at least two gates whose product equals a single gate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Redundancy {
    pub sequence: Vec<usize>,
    pub replacement: usize,
}

/// Relations found among the gates of a [`GateSet`].
///
/// Pattern pairs are stored as `(forbidden, kept)`; the kept side is the
/// lexicographically largest index sequence of its class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelationCatalog {
    /// Commuting `(i, j)` with `i < j`.
    pub commuting_pairs: Vec<(usize, usize)>,
    pub equivalent_pairs: Vec<([usize; 2], [usize; 2])>,
    pub equivalent_triplets: Vec<([usize; 3], [usize; 3])>,
    pub redundancies: Vec<Redundancy>,
    /// Longest redundancy length actually enumerated.
    pub k_max: usize,
    pub mode: Option<EqualityMode>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationOptions {
    pub k_max: usize,
    pub mode: EqualityMode,
    /// Upper bound on `n^k` sequences enumerated for redundancies and triplets.
    pub count_limit: usize,
    pub triplets: bool,
}

impl Default for RelationOptions {
    fn default() -> Self {
        Self { k_max: 3, mode: EqualityMode::Exact, count_limit: 250_000, triplets: true }
    }
}

/// Groups matrices by equality under `mode`, verifying every hash match.
struct Classes<'a> {
    mode: EqualityMode,
    buckets: HashMap<u64, Vec<usize>>,
    reps: Vec<(ComplexMatrix, Vec<&'a [usize]>)>,
}

impl<'a> Classes<'a> {
    fn new(mode: EqualityMode) -> Self {
        Self { mode, buckets: HashMap::new(), reps: Vec::new() }
    }

    fn insert(&mut self, m: ComplexMatrix, member: &'a [usize]) {
        let key = fingerprint(&m, self.mode);
        let bucket = self.buckets.entry(key).or_default();
        for &r in bucket.iter() {
            if matrices_equal(&self.reps[r].0, &m, self.mode, TOL_IDENTITY) {
                self.reps[r].1.push(member);
                return;
            }
        }
        bucket.push(self.reps.len());
        self.reps.push((m, vec![member]));
    }
}

pub fn detect_relations(gs: &GateSet, k_max: usize, up_to_phase: bool) -> Result<RelationCatalog, GateError> {
    let mode = if up_to_phase { EqualityMode::UpToPhase } else { EqualityMode::Exact };
    detect_relations_with(gs, &RelationOptions { k_max, mode, ..RelationOptions::default() })
}

pub fn detect_relations_with(gs: &GateSet, opts: &RelationOptions) -> Result<RelationCatalog, GateError> {
    if !(2..=5).contains(&opts.k_max) {
        return Err(GateError::KMaxOutOfRange(opts.k_max));
    }
    let mode = opts.mode;
    let ids: Vec<usize> = gs.non_identity().collect();
    let n = ids.len();
    let mat = |k: usize| &gs.gate(k).full_matrix;
    let mut cat = RelationCatalog { mode: Some(mode), ..RelationCatalog::default() };

    let mut k_max = opts.k_max;
    while k_max > 2 && (n as f64).powi(k_max as i32) > opts.count_limit as f64 {
        k_max -= 1;
    }
    if k_max < opts.k_max {
        cat.warnings.push(format!(
            "redundancy length reduced from {} to {} ({} gates, count limit {})",
            opts.k_max, k_max, n, opts.count_limit
        ));
    }
    cat.k_max = k_max;

    // Redundancies, level by level; a sequence containing a shorter redundant
    // window is not reported again.
    let mut redundant: HashSet<Vec<usize>> = HashSet::new();
    let mut alive: Vec<(Vec<usize>, ComplexMatrix)> = ids.iter().map(|&g| (vec![g], mat(g).clone())).collect();
    let mut pair_products: HashMap<(usize, usize), ComplexMatrix> = HashMap::new();
    for len in 2..=k_max {
        let mut next = Vec::new();
        for (seq, prod) in &alive {
            for &g in &ids {
                let mut s = seq.clone();
                s.push(g);
                if (2..len).any(|w| redundant.contains(&s[len - w..])) {
                    continue;
                }
                let p = prod * mat(g);
                if len == 2 {
                    pair_products.insert((s[0], s[1]), p.clone());
                }
                match gs.find(&p, mode) {
                    Some(r) => {
                        redundant.insert(s.clone());
                        cat.redundancies.push(Redundancy { sequence: s, replacement: r });
                    }
                    None => {
                        if len < k_max {
                            next.push((s, p));
                        }
                    }
                }
            }
        }
        alive = next;
    }
    drop(alive);

    for (x, &a) in ids.iter().enumerate() {
        for &b in &ids[x + 1..] {
            let ab = &pair_products[&(a, b)];
            let ba = &pair_products[&(b, a)];
            if matrices_equal(ab, ba, mode, TOL_IDENTITY) {
                cat.commuting_pairs.push((a, b));
            }
        }
    }

    // Equivalent ordered pairs whose common product is not itself a gate.
    let pair_keys: Vec<[usize; 2]> = ids.iter().flat_map(|&a| ids.iter().map(move |&b| [a, b])).collect();
    let mut forbidden_pairs: HashSet<[usize; 2]> = cat.commuting_pairs.iter().map(|&(a, b)| [a, b]).collect();
    {
        let mut classes = Classes::new(mode);
        for key in &pair_keys {
            if redundant.contains(&key[..]) {
                continue;
            }
            classes.insert(pair_products[&(key[0], key[1])].clone(), key);
        }
        for (_, members) in classes.reps {
            if members.len() < 2 {
                continue;
            }
            let kept = *members.iter().max().expect("nonempty");
            let kept = [kept[0], kept[1]];
            for m in members {
                let f = [m[0], m[1]];
                if f != kept && !forbidden_pairs.contains(&f) {
                    cat.equivalent_pairs.push((f, kept));
                }
            }
        }
        cat.equivalent_pairs.sort();
        forbidden_pairs.extend(cat.equivalent_pairs.iter().map(|(f, _)| *f));
    }

    if opts.triplets {
        if (n as f64).powi(3) > opts.count_limit as f64 {
            cat.warnings.push(format!("triplet detection skipped ({n}^3 exceeds count limit {})", opts.count_limit));
        } else {
            let canonical_pair = |a: usize, b: usize| !forbidden_pairs.contains(&[a, b]) && !redundant.contains(&[a, b][..]);
            let mut triples: Vec<[usize; 3]> = Vec::new();
            for &a in &ids {
                for &b in &ids {
                    if !canonical_pair(a, b) {
                        continue;
                    }
                    for &cc in &ids {
                        if canonical_pair(b, cc) {
                            triples.push([a, b, cc]);
                        }
                    }
                }
            }
            let mut classes = Classes::new(mode);
            for t in &triples {
                let p = &pair_products[&(t[0], t[1])] * mat(t[2]);
                if gs.find(&p, mode).is_none() {
                    classes.insert(p, t);
                }
            }
            for (_, members) in classes.reps {
                if members.len() < 2 {
                    continue;
                }
                let kept = *members.iter().max().expect("nonempty");
                let kept = [kept[0], kept[1], kept[2]];
                for m in members {
                    let f = [m[0], m[1], m[2]];
                    if f != kept {
                        cat.equivalent_triplets.push((f, kept));
                    }
                }
            }
            cat.equivalent_triplets.sort();
        }
    }
    Ok(cat)
}

impl RelationCatalog {
    /// Re-multiplies every stored relation and returns the worst residual.
    pub fn max_residual(&self, gs: &GateSet) -> f64 {
        let mode = self.mode.unwrap_or(EqualityMode::Exact);
        let diff = |a: &ComplexMatrix, b: &ComplexMatrix| match mode {
            EqualityMode::Exact => a.max_abs_diff(b),
            EqualityMode::UpToPhase => {
                let ov = crate::encoding::overlap(a, b);
                let ph = if ov.norm() > 0.0 { ov / ov.norm() } else { c(1.0, 0.0) };
                a.max_abs_diff(&b.scale(ph))
            }
        };
        let mut worst = 0.0f64;
        for &(a, b) in &self.commuting_pairs {
            worst = worst.max(diff(&gs.product(&[a, b]), &gs.product(&[b, a])));
        }
        for (f, k) in &self.equivalent_pairs {
            worst = worst.max(diff(&gs.product(f), &gs.product(k)));
        }
        for (f, k) in &self.equivalent_triplets {
            worst = worst.max(diff(&gs.product(f), &gs.product(k)));
        }
        for r in &self.redundancies {
            worst = worst.max(diff(&gs.product(&r.sequence), &gs.gate(r.replacement).full_matrix));
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_unitary;
    use rand::SeedableRng;

    fn gs(q: usize, names: &[(&str, &[usize])]) -> GateSet {
        GateSet::from_builtins(q, names, EqualityMode::Exact).unwrap()
    }

    #[test]
    fn h_on_first_qubit_is_h_kron_identity() {
        let h = GateSpec::builtin("H", &[1], None).unwrap();
        let e = extend_gate(&h, 2).unwrap();
        assert!(e.full_matrix.approx_eq(&h.base_matrix.kron(&ComplexMatrix::identity(2)), 0.0));
        assert_eq!(e.support, vec![1]);
    }

    #[test]
    fn cnot_1_3_permutes_basis_states() {
        let e = extend_gate(&GateSpec::builtin("CNOT", &[1, 3], None).unwrap(), 3).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for cc in 0..2 {
                    let from = (a << 2) | (b << 1) | cc;
                    let to = (a << 2) | (b << 1) | (cc ^ a);
                    for row in 0..8 {
                        let want = if row == to { 1.0 } else { 0.0 };
                        assert_eq!(e.full_matrix.get(row, from), c(want, 0.0));
                    }
                }
            }
        }
        assert_eq!(e.support, vec![1, 3]);
    }

    #[test]
    fn reversed_cnot_uses_slot_order() {
        let rev = extend_gate(&GateSpec::builtin("CNOT", &[2, 1], None).unwrap(), 2).unwrap();
        let h = GateSpec::builtin("H", &[1], None).unwrap().base_matrix;
        let hh = h.kron(&h);
        let fwd = extend_gate(&GateSpec::builtin("CNOT", &[1, 2], None).unwrap(), 2).unwrap();
        assert!(rev.full_matrix.approx_eq(&(&(&hh * &fwd.full_matrix) * &hh), 1e-12));
    }

    #[test]
    fn x_on_second_qubit() {
        let e = extend_gate(&GateSpec::builtin("X", &[2], None).unwrap(), 2).unwrap();
        let x = GateSpec::builtin("X", &[1], None).unwrap().base_matrix;
        assert!(e.full_matrix.approx_eq(&ComplexMatrix::identity(2).kron(&x), 0.0));
        assert!(acts_trivially(&e.full_matrix, 1, 2));
        assert!(!acts_trivially(&e.full_matrix, 2, 2));
    }

    #[test]
    fn cnot_not_trivial_on_target() {
        let e = extend_gate(&GateSpec::builtin("CNOT", &[1, 2], None).unwrap(), 2).unwrap();
        assert!(!acts_trivially(&e.full_matrix, 2, 2));
        assert!(!acts_trivially(&e.full_matrix, 1, 2));
    }

    #[test]
    fn random_identity_kron_w_is_trivial_on_first() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let w = random_unitary(&mut rng, 4);
            let u = ComplexMatrix::identity(2).kron(&w);
            assert!(acts_trivially(&u, 1, 3));
            assert!(!acts_trivially(&u, 2, 3));
        }
    }

    #[test]
    fn qubit_validation() {
        let x = GateSpec::builtin("X", &[3], None).unwrap();
        assert!(matches!(extend_gate(&x, 2), Err(GateError::QubitOutOfRange { qubit: 3, .. })));
        assert!(matches!(GateSpec::builtin("CNOT", &[1, 1], None), Err(GateError::DuplicateQubit(1))));
        assert!(matches!(GateSpec::builtin("CNOT", &[1], None), Err(GateError::WrongArity { .. })));
        assert!(matches!(GateSpec::builtin("RZ", &[1], None), Err(GateError::MissingAngle(_))));
        assert!(matches!(GateSpec::builtin("foo", &[1], None), Err(GateError::UnknownGate(_))));
        let bad = ComplexMatrix::diagonal(&[c(1.0, 0.0), c(2.0, 0.0)]);
        assert!(matches!(GateSpec::new("bad", &[1], None, bad), Err(GateError::NotUnitary { .. })));
    }

    #[test]
    fn builtins_are_unitary_and_aliases_resolve() {
        for name in BUILTIN_NAMES {
            let (_, m) = builtin_matrix(name, Some(0.3)).or_else(|_| builtin_matrix(name, None)).unwrap();
            assert!(m.is_unitary(1e-12), "{name}");
        }
        assert_eq!(builtin_matrix("cx", None).unwrap().0, "CNOT");
        assert_eq!(builtin_matrix("sdg", None).unwrap().0, "Sdg");
    }

    #[test]
    fn identity_inserted_once() {
        let g = gs(1, &[("H", &[1]), ("T", &[1])]);
        assert_eq!(g.len(), 3);
        assert_eq!(g.identity_index(), 0);
        let g = gs(1, &[("H", &[1]), ("I", &[1])]);
        assert_eq!(g.len(), 2);
        assert_eq!(g.identity_index(), 1);
        let dup = GateSet::from_builtins(1, &[("T", &[1]), ("T", &[1])], EqualityMode::Exact);
        assert!(matches!(dup, Err(GateError::DuplicateGate { .. })));
    }

    #[test]
    fn duplicates_depend_on_mode() {
        let z = GateSpec::builtin("Z", &[1], None).unwrap();
        let rz = GateSpec::builtin("RZ", &[1], Some(PI)).unwrap();
        assert!(GateSet::new(1, &[z.clone(), rz.clone()], EqualityMode::Exact).is_ok());
        assert!(GateSet::new(1, &[z, rz], EqualityMode::UpToPhase).is_err());
    }

    #[test]
    fn fibonacci_braids() {
        let g = fibonacci_generators();
        let s1 = &g[0].base_matrix;
        assert!((s1 * &g[1].base_matrix).approx_eq(&ComplexMatrix::identity(2), 1e-14));
        let w1 = &g[4].base_matrix;
        let w2 = &g[6].base_matrix;
        assert!((w1 * w2).max_abs_diff(&(w2 * w1)) > 0.1);
        let s2 = &g[2].base_matrix;
        let lhs = &(s1 * s2) * s1;
        let rhs = &(s2 * s1) * s2;
        assert!(lhs.approx_eq(&rhs, 1e-12));
    }

    #[test]
    fn xh_equals_hz_detected() {
        let g = gs(1, &[("H", &[1]), ("X", &[1]), ("Z", &[1])]);
        let cat = detect_relations(&g, 3, false).unwrap();
        // I=0, H=1, X=2, Z=3: keep (X,H), forbid (H,Z)
        assert!(cat.equivalent_pairs.contains(&([1, 3], [2, 1])));
        assert!(cat.redundancies.contains(&Redundancy { sequence: vec![2, 2], replacement: 0 }));
        assert!(cat.max_residual(&g) < 1e-8);
    }

    #[test]
    fn t_squared_is_s() {
        let g = gs(1, &[("T", &[1]), ("S", &[1]), ("H", &[1])]);
        let cat = detect_relations(&g, 3, false).unwrap();
        assert!(cat.redundancies.contains(&Redundancy { sequence: vec![1, 1], replacement: 2 }));
        // (T,T,T) contains (T,T), so only shorter windows are reported
        assert!(!cat.redundancies.iter().any(|r| r.sequence == vec![1, 1, 1]));
        assert!(cat.redundancies.iter().all(|r| !r.sequence.contains(&0)));
    }

    #[test]
    fn h_cnot_h_is_cz() {
        let g = gs(2, &[("H", &[2]), ("CNOT", &[1, 2]), ("CZ", &[1, 2])]);
        let cat = detect_relations(&g, 3, false).unwrap();
        assert!(cat.redundancies.contains(&Redundancy { sequence: vec![1, 2, 1], replacement: 3 }));
        assert!(cat.max_residual(&g) < 1e-8);
    }

    #[test]
    fn disjoint_gates_commute() {
        let g = gs(2, &[("T", &[1]), ("X", &[2]), ("H", &[1])]);
        let cat = detect_relations(&g, 2, false).unwrap();
        assert!(cat.commuting_pairs.contains(&(1, 2)));
        assert!(cat.commuting_pairs.contains(&(2, 3)));
        assert!(!cat.commuting_pairs.contains(&(1, 3)));
    }

    #[test]
    fn yang_baxter_triplet() {
        let specs: Vec<GateSpec> = fibonacci_generators().into_iter().take(4).collect();
        let g = GateSet::new(1, &specs, EqualityMode::Exact).unwrap();
        let cat = detect_relations(&g, 2, false).unwrap();
        // I=0, σ1=1, σ1⁻¹=2, σ2=3, σ2⁻¹=4
        assert!(cat.equivalent_triplets.contains(&([1, 3, 1], [3, 1, 3])));
        assert!(cat.max_residual(&g) < 1e-8);
    }

    #[test]
    fn k_max_bounds_and_cap() {
        let g = gs(1, &[("T", &[1]), ("H", &[1])]);
        assert!(matches!(detect_relations(&g, 1, false), Err(GateError::KMaxOutOfRange(1))));
        assert!(matches!(detect_relations(&g, 6, false), Err(GateError::KMaxOutOfRange(6))));
        let opts = RelationOptions { k_max: 5, count_limit: 10, ..RelationOptions::default() };
        let cat = detect_relations_with(&g, &opts).unwrap();
        assert_eq!(cat.k_max, 3);
        assert_eq!(cat.warnings.len(), 1);
    }

    #[test]
    fn phase_mode_finds_more_redundancy() {
        let g = gs(1, &[("X", &[1]), ("Y", &[1]), ("Z", &[1])]);
        let exact = detect_relations(&g, 2, false).unwrap();
        let phase = detect_relations(&g, 2, true).unwrap();
        assert!(!exact.redundancies.iter().any(|r| r.sequence == vec![1, 2]));
        assert!(phase.redundancies.contains(&Redundancy { sequence: vec![1, 2], replacement: 3 }));
    }
}
