//! Symmetry-breaking and strengthening cuts for the synthesis model.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::encoding::{encode_real, ComplexMatrix};
use crate::formulation::{Entry, ModelHandles, PhaseMode, SynthesisObjective, SynthesisProblem};
use crate::gates::{GateSet, RelationCatalog};
use crate::mip::{MipError, MipModel, Sense, VarId};

/// Which cut families to add.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutSelection {
    /// Identities only at the end of the sequence.
    pub identity_symmetry: bool,
    pub commuting_pairs: bool,
    /// Equivalent pairs and triplets.
    pub equivalent_patterns: bool,
    pub redundancy: bool,
    pub redundancy_k_max: usize,
    pub hc1: bool,
    pub hc2: bool,
    /// Big-M form of `hc1` for the global-phase target.
    pub hc1_global_phase: bool,
}

impl Default for CutSelection {
    fn default() -> Self {
        Self { identity_symmetry: true, ..Self::none() }
    }
}

/// The five switchable families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutFamily {
    IdentitySymmetry,
    PatternSymmetry,
    Redundancy,
    Hc1,
    Hc2,
}

impl CutFamily {
    pub const ALL: [CutFamily; 5] = [Self::IdentitySymmetry, Self::PatternSymmetry, Self::Redundancy, Self::Hc1, Self::Hc2];

    pub fn name(self) -> &'static str {
        match self {
            Self::IdentitySymmetry => "identity",
            Self::PatternSymmetry => "symmetry",
            Self::Redundancy => "redundancy",
            Self::Hc1 => "hc1",
            Self::Hc2 => "hc2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(name.trim()))
    }
}

impl CutSelection {
    pub fn none() -> Self {
        Self {
            identity_symmetry: false,
            commuting_pairs: false,
            equivalent_patterns: false,
            redundancy: false,
            redundancy_k_max: 3,
            hc1: false,
            hc2: false,
            hc1_global_phase: false,
        }
    }

    pub fn all() -> Self {
        Self::from_families(&CutFamily::ALL)
    }

    pub fn from_families(families: &[CutFamily]) -> Self {
        let mut s = Self::none();
        for f in families {
            match f {
                CutFamily::IdentitySymmetry => s.identity_symmetry = true,
                CutFamily::PatternSymmetry => {
                    s.commuting_pairs = true;
                    s.equivalent_patterns = true;
                }
                CutFamily::Redundancy => s.redundancy = true,
                CutFamily::Hc1 => s.hc1 = true,
                CutFamily::Hc2 => s.hc2 = true,
            }
        }
        s
    }

    /// Parses a comma-separated family list; `all` and `none` are accepted.
    pub fn parse(list: &str) -> Result<Self, String> {
        let list = list.trim();
        if list.eq_ignore_ascii_case("all") {
            return Ok(Self::all());
        }
        if list.is_empty() || list.eq_ignore_ascii_case("none") {
            return Ok(Self::none());
        }
        let fams = list
            .split(',')
            .map(|n| CutFamily::from_name(n).ok_or_else(|| format!("unknown cut family `{}`", n.trim())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_families(&fams))
    }

    /// Drops or remaps families that do not apply to this objective and phase mode.
    pub fn effective(&self, objective: SynthesisObjective, phase_mode: PhaseMode) -> (Self, Vec<String>) {
        let mut s = *self;
        let mut warnings = Vec::new();
        if objective == SynthesisObjective::Depth && (s.commuting_pairs || s.equivalent_patterns) {
            s.commuting_pairs = false;
            s.equivalent_patterns = false;
            warnings.push(String::from("commuting and equivalent-pattern cuts disabled for the depth objective"));
        }
        if objective.is_approximate() {
            if s.hc1 || s.hc2 || s.hc1_global_phase {
                warnings.push(String::from("hard-constraint cuts need a target equality; disabled"));
            }
            s.hc1 = false;
            s.hc2 = false;
            s.hc1_global_phase = false;
            return (s, warnings);
        }
        match phase_mode {
            PhaseMode::Exact => {
                if s.hc1_global_phase {
                    warnings.push(String::from("global-phase HC-1 ignored in exact mode"));
                    s.hc1_global_phase = false;
                }
            }
            PhaseMode::GlobalPhase => {
                if s.hc1 {
                    s.hc1 = false;
                    s.hc1_global_phase = true;
                }
                if s.hc2 {
                    warnings.push(String::from("HC-2 has no global-phase form; disabled"));
                    s.hc2 = false;
                }
            }
        }
        (s, warnings)
    }

    pub fn any_relation_cuts(&self) -> bool {
        self.commuting_pairs || self.equivalent_patterns || self.redundancy
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CutError {
    #[error("commuting and equivalent-pattern cuts are invalid for the depth objective")]
    DepthIncompatible,
    #[error("{0} requires {1}")]
    Precondition(&'static str, &'static str),
    #[error(transparent)]
    Mip(#[from] MipError),
}

/// Objective information used to decide which relation cuts are sound.
#[derive(Debug, Clone, Copy)]
pub struct CutContext<'a> {
    pub objective: SynthesisObjective,
    pub weights: &'a [f64],
}

impl CutContext<'_> {
    fn weight(&self, seq: &[usize]) -> f64 {
        seq.iter().map(|&g| self.weights[g]).sum()
    }

    /// Rewriting `forbidden` into `kept` never makes the objective worse.
    fn pattern_ok(&self, forbidden: &[usize], kept: &[usize]) -> bool {
        match self.objective {
            SynthesisObjective::WeightedGateCount => self.weight(kept) <= self.weight(forbidden) + 1e-12,
            SynthesisObjective::Depth => false,
            _ => true,
        }
    }
}

/// Adds every selected family.
pub fn apply(
    model: &mut MipModel,
    h: &ModelHandles,
    problem: &SynthesisProblem,
    catalog: Option<&RelationCatalog>,
    ctx: &CutContext<'_>,
) -> Result<(), CutError> {
    let sel = &problem.cuts;
    let gs = &problem.gate_set;
    if sel.identity_symmetry {
        add_identity_symmetry(model, h, gs);
    }
    if let Some(cat) = catalog {
        if sel.commuting_pairs || sel.equivalent_patterns {
            add_commuting_and_equivalent_cuts(model, h, cat, ctx, sel.commuting_pairs, sel.equivalent_patterns)?;
        }
        if sel.redundancy {
            add_redundancy_cuts(model, h, gs, cat, ctx);
        }
    }
    if sel.hc1 || sel.hc2 {
        if problem.phase_mode != PhaseMode::Exact || problem.objective.is_approximate() {
            return Err(CutError::Precondition("HC-1/HC-2", "an exact target equality"));
        }
        add_hc_cuts(model, h, gs, &problem.target, sel.hc1, sel.hc2)?;
    }
    if sel.hc1_global_phase {
        add_hc1_global_phase(model, h, gs, &problem.target)?;
    }
    Ok(())
}

/// `z[I,p] ≤ z[I,p+1]`: once an identity is chosen, all later positions are identities.
pub fn add_identity_symmetry(model: &mut MipModel, h: &ModelHandles, gs: &GateSet) -> usize {
    let id = gs.identity_index();
    let mut n = 0;
    for p in 1..h.positions() {
        model.add_constraint(vec![(h.z[p - 1][id], 1.0), (h.z[p][id], -1.0)], Sense::Le, 0.0, "identity");
        n += 1;
    }
    n
}

fn forbid(model: &mut MipModel, h: &ModelHandles, pattern: &[usize], tag: &'static str) -> usize {
    let k = pattern.len();
    let mut n = 0;
    for start in 0..(h.positions() + 1).saturating_sub(k) {
        let terms = pattern.iter().enumerate().map(|(i, &g)| (h.z[start + i][g], 1.0)).collect();
        model.add_constraint(terms, Sense::Le, (k - 1) as f64, tag);
        n += 1;
    }
    n
}

/// Forbids the non-canonical order of every commuting pair and the non-kept
/// side of every equivalent pair or triplet, at all consecutive positions.
pub fn add_commuting_and_equivalent_cuts(
    model: &mut MipModel,
    h: &ModelHandles,
    catalog: &RelationCatalog,
    ctx: &CutContext<'_>,
    commuting: bool,
    equivalent: bool,
) -> Result<usize, CutError> {
    if ctx.objective == SynthesisObjective::Depth {
        return Err(CutError::DepthIncompatible);
    }
    let mut n = 0;
    if commuting {
        for &(a, b) in &catalog.commuting_pairs {
            // keep the larger order (b, a)
            n += forbid(model, h, &[a, b], "commuting");
        }
    }
    if equivalent {
        for (f, k) in &catalog.equivalent_pairs {
            if ctx.pattern_ok(f, k) {
                n += forbid(model, h, f, "equivalent");
            }
        }
        for (f, k) in &catalog.equivalent_triplets {
            if ctx.pattern_ok(f, k) {
                n += forbid(model, h, f, "equivalent");
            }
        }
    }
    Ok(n)
}

/// Whether replacing `seq` by `replacement` can never increase the optimal depth.
fn redundancy_keeps_depth(gs: &GateSet, seq: &[usize], replacement: usize) -> bool {
    let rep = &gs.gate(replacement).support;
    if rep.is_empty() {
        return true;
    }
    let supports: Vec<&Vec<usize>> = seq.iter().map(|&g| &gs.gate(g).support).collect();
    if supports.iter().all(|s| rep.iter().all(|q| s.contains(q))) {
        return true;
    }
    seq.len() >= 3 && supports[0].iter().any(|q| supports.iter().all(|s| s.contains(q)))
}

/// Forbids every redundant window whose replacement is no worse.
pub fn add_redundancy_cuts(model: &mut MipModel, h: &ModelHandles, gs: &GateSet, catalog: &RelationCatalog, ctx: &CutContext<'_>) -> usize {
    let mut n = 0;
    for r in &catalog.redundancies {
        let ok = match ctx.objective {
            SynthesisObjective::WeightedGateCount => ctx.weights[r.replacement] <= ctx.weight(&r.sequence) + 1e-12,
            SynthesisObjective::Depth => redundancy_keeps_depth(gs, &r.sequence, r.replacement),
            _ => true,
        };
        if ok {
            n += forbid(model, h, &r.sequence, "redundancy");
        }
    }
    n
}

fn entry_terms(e: Entry, coef: f64, terms: &mut Vec<(VarId, f64)>) -> f64 {
    match e {
        Entry::Var(v) => {
            terms.push((v, coef));
            0.0
        }
        Entry::Const(x) => coef * x,
    }
}

/// HC-1: `Ĝ_{P−1} = Σ_g z[g,P] R(T g†)`; HC-2: `Ĝ_{P−2} = Σ_{g,h} w[g,h] R(T h† g†)`
/// with `w[g,h] = z[g,P−1] z[h,P]`.
pub fn add_hc_cuts(model: &mut MipModel, h: &ModelHandles, gs: &GateSet, target: &ComplexMatrix, hc1: bool, hc2: bool) -> Result<usize, CutError> {
    let p = h.positions();
    let n = h.real_dim;
    let mut count = 0;
    if hc1 {
        let mats: Vec<_> = gs.gates().iter().map(|g| encode_real(&(target * &g.full_matrix.adjoint())).into_real()).collect();
        for i in 0..n {
            for j in 0..n {
                let mut terms = Vec::new();
                let k = entry_terms(h.ghat_entry(p - 1, i, j), 1.0, &mut terms);
                for (g, m) in mats.iter().enumerate() {
                    let a = m.get(i, j);
                    if a != 0.0 {
                        terms.push((h.z[p - 1][g], -a));
                    }
                }
                model.add_constraint(terms, Sense::Eq, -k, "hc1");
                count += 1;
            }
        }
    }
    if hc2 && p >= 2 {
        let m = gs.len();
        let mut w = vec![Vec::with_capacity(m); m];
        for (g, row) in w.iter_mut().enumerate() {
            for hh in 0..m {
                row.push(model.add_mccormick_binary_tagged(h.z[p - 2][g], h.z[p - 1][hh], "hc2")?);
                count += 3;
            }
        }
        model.add_constraint(w.iter().flatten().map(|&v| (v, 1.0)).collect(), Sense::Eq, 1.0, "hc2");
        count += 1;
        let mats: Vec<Vec<_>> = (0..m)
            .map(|g| {
                (0..m)
                    .map(|hh| {
                        let prod = &(target * &gs.gate(hh).full_matrix.adjoint()) * &gs.gate(g).full_matrix.adjoint();
                        encode_real(&prod).into_real()
                    })
                    .collect()
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                let mut terms = Vec::new();
                let k = entry_terms(h.ghat_entry(p - 2, i, j), 1.0, &mut terms);
                for g in 0..m {
                    for hh in 0..m {
                        let a = mats[g][hh].get(i, j);
                        if a != 0.0 {
                            terms.push((w[g][hh], -a));
                        }
                    }
                }
                model.add_constraint(terms, Sense::Eq, -k, "hc2");
                count += 1;
            }
        }
    }
    Ok(count)
}

/// HC-1 for `Ĝ_P = r R(T) + s R(iT)`: when `z[g,P] = 1`, `Ĝ_{P−1} = R(λ T g†)`
/// with `λ = r + is`, enforced entrywise with big-M 2.
pub fn add_hc1_global_phase(model: &mut MipModel, h: &ModelHandles, gs: &GateSet, target: &ComplexMatrix) -> Result<usize, CutError> {
    let (r, s) = match (h.r, h.s) {
        (Some(r), Some(s)) => (r, s),
        _ => return Err(CutError::Precondition("global-phase HC-1", "the phase variables r and s")),
    };
    let p = h.positions();
    let half = h.real_dim / 2;
    let mut count = 0;
    for (g, gate) in gs.gates().iter().enumerate() {
        let z = h.z[p - 1][g];
        let m = target * &gate.full_matrix.adjoint();
        for i in 0..half {
            for j in 0..half {
                let v = m.get(i, j);
                let (a, b) = (v.re, v.im);
                // rows (2i, 2j) and (2i+1, 2j): Re and Im of λ m_ij
                for (row, cr, cs) in [(2 * i, a, -b), (2 * i + 1, b, a)] {
                    for sign in [1.0, -1.0] {
                        // sign·(Ĝ − cr·r − cs·s) ≤ 2(1 − z)
                        let mut terms = Vec::new();
                        let k = entry_terms(h.ghat_entry(p - 1, row, 2 * j), sign, &mut terms);
                        terms.push((r, -sign * cr));
                        terms.push((s, -sign * cs));
                        terms.push((z, 2.0));
                        model.add_constraint(terms, Sense::Le, 2.0 - k, "hc1");
                        count += 1;
                    }
                }
            }
        }
    }
    Ok(count)
}
