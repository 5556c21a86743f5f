//! Solver-agnostic mixed-integer model, McCormick product helpers and the
//! backend contract.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use hashbrown::HashMap;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    /// Free-form family label used for bookkeeping (e.g. `"mccormick"`).
    pub tag: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub sense: ObjectiveSense,
    pub linear: Vec<(VarId, f64)>,
    /// Terms `coef * x_i * x_j`.
    pub quadratic: Vec<(VarId, VarId, f64)>,
    pub constant: f64,
}

impl Default for Objective {
    fn default() -> Self {
        Self { sense: ObjectiveSense::Minimize, linear: Vec::new(), quadratic: Vec::new(), constant: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MipError {
    #[error("variable {0:?} does not exist")]
    UnknownVariable(VarId),
    #[error("variable `{0}` must be binary")]
    NotBinary(String),
    #[error("variable `{0}` needs finite bounds for a McCormick product")]
    Unbounded(String),
    #[error("invalid bounds [{lower}, {upper}] for `{name}`")]
    BadBounds { name: String, lower: f64, upper: f64 },
}

/// A linear or quadratic-objective mixed-integer program.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MipModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
}

impl MipModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        self.variables.push(Variable { name: name.into(), lower, upper, kind });
        VarId(self.variables.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, 1.0, VarKind::Binary)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, lower, upper, VarKind::Continuous)
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn add_constraint(&mut self, terms: Vec<(VarId, f64)>, sense: Sense, rhs: f64, tag: &'static str) -> usize {
        self.constraints.push(Constraint { terms, sense, rhs, tag });
        self.constraints.len() - 1
    }

    /// Number of constraints per tag.
    pub fn constraint_counts(&self) -> HashMap<&'static str, usize> {
        let mut out = HashMap::new();
        for c in &self.constraints {
            *out.entry(c.tag).or_insert(0) += 1;
        }
        out
    }

    /// Checks structural invariants: ids in range, binary bounds, finite objective data.
    pub fn validate(&self) -> Result<(), MipError> {
        let n = self.variables.len();
        let check = |v: VarId| if v.0 < n { Ok(()) } else { Err(MipError::UnknownVariable(v)) };
        for v in &self.variables {
            if v.lower > v.upper || v.lower.is_nan() || v.upper.is_nan() {
                return Err(MipError::BadBounds { name: v.name.clone(), lower: v.lower, upper: v.upper });
            }
        }
        for c in &self.constraints {
            c.terms.iter().try_for_each(|&(v, _)| check(v))?;
        }
        self.objective.linear.iter().try_for_each(|&(v, _)| check(v))?;
        self.objective.quadratic.iter().try_for_each(|&(a, b, _)| check(a).and(check(b)))?;
        Ok(())
    }

    /// `β = z·x` for binary `z` and bounded `x`, via the four McCormick inequalities.
    pub fn add_mccormick(&mut self, z: VarId, x: VarId) -> Result<VarId, MipError> {
        self.add_mccormick_tagged(z, x, "mccormick")
    }

    pub fn add_mccormick_tagged(&mut self, z: VarId, x: VarId, tag: &'static str) -> Result<VarId, MipError> {
        let zv = self.variables.get(z.0).ok_or(MipError::UnknownVariable(z))?;
        if zv.kind != VarKind::Binary {
            return Err(MipError::NotBinary(zv.name.clone()));
        }
        let xv = self.variables.get(x.0).ok_or(MipError::UnknownVariable(x))?;
        let (lo, hi) = (xv.lower, xv.upper);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(MipError::Unbounded(xv.name.clone()));
        }
        let name = format!("{}*{}", self.variables[z.0].name, self.variables[x.0].name);
        let b = self.add_continuous(name, lo.min(0.0), hi.max(0.0));
        // β ≤ hi·z, β ≥ lo·z, β ≤ x − lo(1−z), β ≥ x − hi(1−z)
        self.add_constraint(alloc::vec![(b, 1.0), (z, -hi)], Sense::Le, 0.0, tag);
        self.add_constraint(alloc::vec![(b, 1.0), (z, -lo)], Sense::Ge, 0.0, tag);
        self.add_constraint(alloc::vec![(b, 1.0), (x, -1.0), (z, -lo)], Sense::Le, -lo, tag);
        self.add_constraint(alloc::vec![(b, 1.0), (x, -1.0), (z, -hi)], Sense::Ge, -hi, tag);
        Ok(b)
    }

    /// `w = z1·z2` for binaries; `w` is continuous in `[0, 1]` and integral at integral points.
    pub fn add_mccormick_binary(&mut self, z1: VarId, z2: VarId) -> Result<VarId, MipError> {
        self.add_mccormick_binary_tagged(z1, z2, "mccormick_binary")
    }

    pub fn add_mccormick_binary_tagged(&mut self, z1: VarId, z2: VarId, tag: &'static str) -> Result<VarId, MipError> {
        for z in [z1, z2] {
            let v = self.variables.get(z.0).ok_or(MipError::UnknownVariable(z))?;
            if v.kind != VarKind::Binary {
                return Err(MipError::NotBinary(v.name.clone()));
            }
        }
        let name = format!("{}*{}", self.variables[z1.0].name, self.variables[z2.0].name);
        let w = self.add_continuous(name, 0.0, 1.0);
        self.add_constraint(alloc::vec![(w, 1.0), (z1, -1.0)], Sense::Le, 0.0, tag);
        self.add_constraint(alloc::vec![(w, 1.0), (z2, -1.0)], Sense::Le, 0.0, tag);
        self.add_constraint(alloc::vec![(w, 1.0), (z1, -1.0), (z2, -1.0)], Sense::Ge, -1.0, tag);
        Ok(w)
    }

    pub fn set_objective(&mut self, objective: Objective) {
        self.objective = objective;
    }

    pub fn has_quadratic_objective(&self) -> bool {
        !self.objective.quadratic.is_empty()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        let o = &self.objective;
        o.constant
            + o.linear.iter().map(|&(v, a)| a * values[v.0]).sum::<f64>()
            + o.quadratic.iter().map(|&(x, y, a)| a * values[x.0] * values[y.0]).sum::<f64>()
    }

    /// First violated bound, integrality or constraint at `values`, if any.
    pub fn first_violation(&self, values: &[f64], tol: f64) -> Option<String> {
        if values.len() != self.variables.len() {
            return Some(format!("expected {} values, got {}", self.variables.len(), values.len()));
        }
        for (v, &x) in self.variables.iter().zip(values) {
            if x < v.lower - tol || x > v.upper + tol {
                return Some(format!("{} = {x} outside [{}, {}]", v.name, v.lower, v.upper));
            }
            if v.kind == VarKind::Binary && (x - x.round()).abs() > tol {
                return Some(format!("{} = {x} not integral", v.name));
            }
        }
        for (k, c) in self.constraints.iter().enumerate() {
            let lhs: f64 = c.terms.iter().map(|&(v, a)| a * values[v.0]).sum();
            let bad = match c.sense {
                Sense::Le => lhs > c.rhs + tol,
                Sense::Ge => lhs < c.rhs - tol,
                Sense::Eq => (lhs - c.rhs).abs() > tol,
            };
            if bad {
                return Some(format!("constraint {k} ({}) lhs {lhs} vs rhs {}", c.tag, c.rhs));
            }
        }
        None
    }

    /// CPLEX LP text rendering of the model.
    pub fn to_lp_string(&self) -> String {
        let names: Vec<String> = (0..self.variables.len()).map(|k| format!("x{k}")).collect();
        let mut out = String::new();
        let fmt_terms = |out: &mut String, terms: &[(VarId, f64)]| {
            if terms.is_empty() {
                out.push_str(" 0 x0");
            }
            for &(v, a) in terms {
                let _ = write!(out, " {} {} {}", if a < 0.0 { '-' } else { '+' }, a.abs(), names[v.0]);
            }
        };
        let _ = writeln!(out, "\\ variables: x<k> is the k-th model variable; original names in comments");
        for (k, v) in self.variables.iter().enumerate() {
            let _ = writeln!(out, "\\ x{k} = {}", v.name);
        }
        out.push_str(match self.objective.sense {
            ObjectiveSense::Minimize => "Minimize\n",
            ObjectiveSense::Maximize => "Maximize\n",
        });
        out.push_str(" obj:");
        fmt_terms(&mut out, &self.objective.linear);
        if !self.objective.quadratic.is_empty() {
            out.push_str(" + [");
            for &(x, y, a) in &self.objective.quadratic {
                let sign = if a < 0.0 { '-' } else { '+' };
                if x == y {
                    let _ = write!(out, " {sign} {} {} ^ 2", 2.0 * a.abs(), names[x.0]);
                } else {
                    let _ = write!(out, " {sign} {} {} * {}", 2.0 * a.abs(), names[x.0], names[y.0]);
                }
            }
            out.push_str(" ] / 2");
        }
        if self.objective.constant != 0.0 {
            let _ = write!(out, " + {} x_const", self.objective.constant);
        }
        out.push_str("\nSubject To\n");
        for (k, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{k}:");
            fmt_terms(&mut out, &c.terms);
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            let _ = writeln!(out, " {op} {}", c.rhs);
        }
        out.push_str("Bounds\n");
        for (k, v) in self.variables.iter().enumerate() {
            let lo = if v.lower.is_finite() { format!("{}", v.lower) } else { "-inf".to_owned() };
            let hi = if v.upper.is_finite() { format!("{}", v.upper) } else { "+inf".to_owned() };
            let _ = writeln!(out, " {lo} <= {} <= {hi}", names[k]);
        }
        if self.objective.constant != 0.0 {
            out.push_str(" x_const = 1\n");
        }
        let bins: Vec<&String> = (0..self.variables.len())
            .filter(|&k| self.variables[k].kind == VarKind::Binary)
            .map(|k| &names[k])
            .collect();
        if !bins.is_empty() {
            out.push_str("Binaries\n");
            for b in bins {
                let _ = writeln!(out, " {b}");
            }
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    Feasible,
    Infeasible,
    TimeLimit,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// Indexed by [`VarId`]; empty when no point is available.
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub solve_seconds: f64,
}

impl Solution {
    pub fn without_point(status: Status) -> Self {
        Self { status, values: Vec::new(), objective_value: f64::NAN, best_bound: f64::NAN, gap: f64::NAN, solve_seconds: 0.0 }
    }

    pub fn has_point(&self) -> bool {
        matches!(self.status, Status::Optimal | Status::Feasible) && !self.values.is_empty()
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Capabilities {
    pub supports_quadratic_objective: bool,
    pub supports_nonconvex_quadratic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverLimits {
    pub time_limit_s: Option<f64>,
    pub threads: Option<usize>,
    pub gap_tol: f64,
    pub seed: Option<u64>,
}

impl Default for SolverLimits {
    fn default() -> Self {
        Self { time_limit_s: None, threads: None, gap_tol: 1e-6, seed: Some(0) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("solver backend `{backend}` failed: {message}")]
pub struct BackendError {
    pub backend: String,
    pub message: String,
}

/// An external MIP solver.
pub trait SolverBackend {
    fn name(&self) -> &str;
    fn capabilities(&self) -> Capabilities;
    fn limits(&self) -> SolverLimits;
    /// Solves `model`; only called when the objective is within capabilities.
    fn solve_model(&self, model: &MipModel) -> Result<Solution, BackendError>;
}

/// Dispatches to `backend`, answering `Unsupported` for quadratic objectives it cannot handle.
pub fn solve(model: &MipModel, backend: &dyn SolverBackend) -> Result<Solution, BackendError> {
    if model.has_quadratic_objective() {
        let caps = backend.capabilities();
        let convex = quadratic_is_convex(&model.objective);
        if !caps.supports_quadratic_objective || (!convex && !caps.supports_nonconvex_quadratic) {
            return Ok(Solution::without_point(Status::Unsupported));
        }
    }
    backend.solve_model(model)
}

/// Conservative convexity test: only separable quadratics with the right sign count.
fn quadratic_is_convex(o: &Objective) -> bool {
    let sign = match o.sense {
        ObjectiveSense::Minimize => 1.0,
        ObjectiveSense::Maximize => -1.0,
    };
    o.quadratic.iter().all(|&(x, y, a)| x == y && sign * a >= 0.0)
}
