//! Solver backends available to the command-line driver.

use std::collections::BTreeMap;
use std::time::Instant;

use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem};
use qsynth_core::mip::{
    BackendError, Capabilities, MipModel, ObjectiveSense, Sense, Solution, SolverBackend, SolverLimits, Status, VarKind,
};

/// Environment variable that caps every HiGHS solve, in seconds.
pub const TIME_LIMIT_ENV: &str = "QSYNTH_TIME_LIMIT";

/// The HiGHS branch-and-cut solver.
#[derive(Debug, Clone, Default)]
pub struct HighsBackend {
    limits: SolverLimits,
    verbose: bool,
}

impl HighsBackend {
    pub fn new(limits: SolverLimits) -> Self {
        Self { limits, verbose: false }
    }

    pub fn with_time_limit(mut self, seconds: Option<f64>) -> Self {
        self.limits.time_limit_s = seconds;
        self
    }

    pub fn verbose(mut self, on: bool) -> Self {
        self.verbose = on;
        self
    }

    fn effective_time_limit(&self) -> Option<f64> {
        let env = std::env::var(TIME_LIMIT_ENV).ok().and_then(|s| s.trim().parse::<f64>().ok()).filter(|t| *t > 0.0);
        match (self.limits.time_limit_s, env) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

fn err(message: impl Into<String>) -> BackendError {
    BackendError { backend: "highs".into(), message: message.into() }
}

/// Sums repeated variables within a row; HiGHS rejects duplicate indices.
fn merged(terms: &[(qsynth_core::mip::VarId, f64)]) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for &(v, a) in terms {
        *out.entry(v.0).or_insert(0.0) += a;
    }
    out
}

impl SolverBackend for HighsBackend {
    fn name(&self) -> &str {
        "highs"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_quadratic_objective: false, supports_nonconvex_quadratic: false }
    }

    fn limits(&self) -> SolverLimits {
        SolverLimits { time_limit_s: self.effective_time_limit(), ..self.limits }
    }

    fn solve_model(&self, model: &MipModel) -> Result<Solution, BackendError> {
        model.validate().map_err(|e| err(e.to_string()))?;
        if model.has_quadratic_objective() {
            return Ok(Solution::without_point(Status::Unsupported));
        }
        let start = Instant::now();
        let mut costs = vec![0.0; model.num_vars()];
        for (v, a) in merged(&model.objective.linear) {
            costs[v] = a;
        }
        let mut pb = RowProblem::default();
        let cols: Vec<_> = model
            .variables
            .iter()
            .zip(&costs)
            .map(|(var, &cost)| match var.kind {
                VarKind::Binary => pb.add_integer_column(cost, var.lower..=var.upper),
                VarKind::Continuous => pb.add_column(cost, var.lower..=var.upper),
            })
            .collect();
        for c in &model.constraints {
            let row: Vec<_> = merged(&c.terms).into_iter().filter(|(_, a)| *a != 0.0).map(|(v, a)| (cols[v], a)).collect();
            match c.sense {
                Sense::Le => pb.add_row(..=c.rhs, row),
                Sense::Ge => pb.add_row(c.rhs.., row),
                Sense::Eq => pb.add_row(c.rhs..=c.rhs, row),
            }
        }
        let sense = match model.objective.sense {
            ObjectiveSense::Minimize => highs::Sense::Minimise,
            ObjectiveSense::Maximize => highs::Sense::Maximise,
        };
        let mut hm = pb.optimise(sense);
        if !self.verbose {
            hm.make_quiet();
        }
        if let Some(t) = self.effective_time_limit() {
            hm.set_option("time_limit", t);
        }
        hm.set_option("mip_rel_gap", self.limits.gap_tol);
        hm.set_option("mip_feasibility_tolerance", 1e-8);
        if let Some(seed) = self.limits.seed {
            hm.set_option("random_seed", (seed % i32::MAX as u64) as i32);
        }
        if let Some(n) = self.limits.threads {
            hm.set_option("threads", n as i32);
        }
        let solved = hm.try_solve().map_err(|s| err(format!("solve failed: {s:?}")))?;
        let seconds = start.elapsed().as_secs_f64();
        let status = solved.status();
        let has_point = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
        let status = match status {
            HighsModelStatus::Optimal => Status::Optimal,
            HighsModelStatus::Infeasible => Status::Infeasible,
            HighsModelStatus::UnboundedOrInfeasible => Status::Infeasible,
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit
            | HighsModelStatus::ReachedInterrupt
            | HighsModelStatus::ReachedMemoryLimit
            | HighsModelStatus::ObjectiveBound
            | HighsModelStatus::ObjectiveTarget => {
                if has_point {
                    Status::Feasible
                } else {
                    Status::TimeLimit
                }
            }
            other => return Err(err(format!("unexpected model status {other:?}"))),
        };
        if !matches!(status, Status::Optimal | Status::Feasible) {
            let mut s = Solution::without_point(status);
            s.solve_seconds = seconds;
            return Ok(s);
        }
        let values = solved.get_solution().columns().to_vec();
        let objective_value = model.objective_value(&values);
        let constant = model.objective.constant;
        let (best_bound, gap) = if model.num_binaries() == 0 {
            (objective_value, 0.0)
        } else {
            let bound = solved.double_info_value(c"mip_dual_bound").map(|b| b + constant).unwrap_or(f64::NAN);
            let gap = if status == Status::Optimal { solved.mip_gap().max(0.0) } else { solved.mip_gap() };
            (bound, gap)
        };
        Ok(Solution { status, values, objective_value, best_bound, gap, solve_seconds: seconds })
    }
}

/// Backend names accepted by `--backend`.
pub const BACKENDS: &[&str] = &["highs", "exhaustive"];

#[cfg(test)]
mod tests {
    use super::*;
    use qsynth_core::mip::{Objective, ObjectiveSense};

    fn knapsack() -> MipModel {
        let mut m = MipModel::new();
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        let c = m.add_binary("c");
        m.add_constraint(vec![(a, 3.0), (b, 4.0), (c, 5.0)], Sense::Le, 8.0, "cap");
        m.set_objective(Objective {
            sense: ObjectiveSense::Maximize,
            linear: vec![(a, 4.0), (b, 5.0), (c, 7.0)],
            quadratic: vec![],
            constant: 1.0,
        });
        m
    }

    #[test]
    fn solves_small_knapsack() {
        let sol = HighsBackend::default().solve_model(&knapsack()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert_eq!(sol.objective_value, 12.0);
        assert!((sol.best_bound - 12.0).abs() < 1e-6);
        assert_eq!(sol.values.iter().map(|v| v.round() as i32).collect::<Vec<_>>(), vec![1, 0, 1]);
    }

    #[test]
    fn duplicate_terms_are_summed() {
        let mut m = MipModel::new();
        let x = m.add_continuous("x", 0.0, 10.0);
        m.add_constraint(vec![(x, 1.0), (x, 1.0)], Sense::Le, 4.0, "dup");
        m.set_objective(Objective { sense: ObjectiveSense::Maximize, linear: vec![(x, 1.0)], quadratic: vec![], constant: 0.0 });
        let sol = HighsBackend::default().solve_model(&m).unwrap();
        assert!((sol.values[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reports_infeasible() {
        let mut m = knapsack();
        let a = qsynth_core::mip::VarId(0);
        m.add_constraint(vec![(a, 1.0)], Sense::Ge, 2.0, "bad");
        let sol = HighsBackend::default().solve_model(&m).unwrap();
        assert_eq!(sol.status, Status::Infeasible);
        assert!(!sol.has_point());
    }

    #[test]
    fn quadratic_objective_is_unsupported() {
        let mut m = knapsack();
        let a = qsynth_core::mip::VarId(0);
        m.objective.quadratic.push((a, a, 1.0));
        let sol = qsynth_core::mip::solve(&m, &HighsBackend::default()).unwrap();
        assert_eq!(sol.status, Status::Unsupported);
    }
}
