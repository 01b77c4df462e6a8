//! Solver backends behind a common interface.

use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem, Sense as HSense};

use crate::error::{Error, Result};
use crate::milp::{MilpProblem, Sense, VarKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative MIP gap at which the backend may stop.
    pub mip_rel_gap: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            mip_rel_gap: 1e-4,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Stopped on the time limit; a point is attached if one was found.
    TimeLimit,
}

/// What a backend returns for one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendSolution {
    pub status: BackendStatus,
    /// Primal point, empty when none is available.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Proven lower bound on the optimum (the objective for LPs).
    pub dual_bound: f64,
    /// Row multipliers, LP solves only.
    pub row_duals: Option<Vec<f64>>,
    /// Reduced costs, LP solves only.
    pub reduced_costs: Option<Vec<f64>>,
}

impl BackendSolution {
    pub fn has_point(&self) -> bool {
        !self.x.is_empty()
    }

    /// Relative distance between objective and dual bound.
    pub fn gap(&self) -> f64 {
        if self.objective == self.dual_bound {
            return 0.0;
        }
        (self.objective - self.dual_bound).abs() / self.objective.abs().max(1e-9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub milp: bool,
    pub lp_duals: bool,
    /// One backend value may serve several threads at once.
    pub shared_handle: bool,
}

/// A minimising LP/MILP engine.
pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn capabilities(&self) -> Capabilities;
    fn solve(&self, problem: &MilpProblem, opts: &SolveOptions) -> Result<BackendSolution>;
}

/// HiGHS through its C API. Each call opens a fresh model, so one value
/// can be shared freely.
#[derive(Debug, Clone, Copy, Default)]
pub struct HighsBackend;

impl HighsBackend {
    fn run(&self, problem: &MilpProblem, opts: &SolveOptions, presolve: bool) -> Result<highs::SolvedModel> {
        let mut pb = RowProblem::default();
        let cols: Vec<highs::Col> = problem
            .vars
            .iter()
            .zip(&problem.objective)
            .map(|(v, &c)| pb.add_column_with_integrality(c, v.lower..=v.upper, v.kind.is_integral()))
            .collect();
        for con in &problem.constraints {
            let terms: Vec<(highs::Col, f64)> = con.terms.iter().map(|(v, c)| (cols[v.0], *c)).collect();
            match con.sense {
                Sense::Le => pb.add_row(..=con.rhs, terms),
                Sense::Ge => pb.add_row(con.rhs.., terms),
                Sense::Eq => pb.add_row(con.rhs..=con.rhs, terms),
            }
        }
        let mut model = pb
            .try_optimise(HSense::Minimise)
            .map_err(|s| Error::Solver(format!("HiGHS rejected the model: {s:?}")))?;
        model.make_quiet();
        let set = |m: &mut highs::Model, k: &str, v: f64| {
            m.try_set_option(k, v)
                .map_err(|_| Error::Solver(format!("HiGHS option {k}")))
        };
        set(&mut model, "mip_rel_gap", opts.mip_rel_gap)?;
        if let Some(t) = opts.time_limit {
            set(&mut model, "time_limit", t)?;
        }
        model
            .try_set_option("threads", 1)
            .map_err(|_| Error::Solver("HiGHS option threads".into()))?;
        if !presolve {
            model
                .try_set_option("presolve", "off")
                .map_err(|_| Error::Solver("HiGHS option presolve".into()))?;
        }
        model
            .try_solve()
            .map_err(|s| Error::Solver(format!("HiGHS run failed: {s:?}")))
    }
}

impl SolverBackend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            milp: true,
            lp_duals: true,
            shared_handle: true,
        }
    }

    fn solve(&self, problem: &MilpProblem, opts: &SolveOptions) -> Result<BackendSolution> {
        let is_mip = problem.vars.iter().any(|v| v.kind != VarKind::Continuous);
        let mut solved = self.run(problem, opts, true)?;
        if solved.status() == HighsModelStatus::UnboundedOrInfeasible {
            // presolve cannot tell the two apart; the simplex run can
            solved = self.run(problem, opts, false)?;
        }
        let status = match solved.status() {
            HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => BackendStatus::Optimal,
            HighsModelStatus::Infeasible => BackendStatus::Infeasible,
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => BackendStatus::Unbounded,
            HighsModelStatus::ReachedTimeLimit => BackendStatus::TimeLimit,
            other => return Err(Error::Solver(format!("HiGHS finished with status {other:?}"))),
        };
        let has_point = match status {
            BackendStatus::Optimal => true,
            BackendStatus::TimeLimit => solved.primal_solution_status() == HighsSolutionStatus::Feasible,
            _ => false,
        };
        let objective = solved.objective_value() + problem.objective_constant;
        let mut out = BackendSolution {
            status,
            x: Vec::new(),
            objective: if has_point { objective } else { f64::NAN },
            dual_bound: f64::NEG_INFINITY,
            row_duals: None,
            reduced_costs: None,
        };
        if has_point {
            let sol = solved.get_solution();
            out.x = sol.columns().to_vec();
            if is_mip {
                out.dual_bound = solved
                    .double_info_value(c"mip_dual_bound")
                    .map(|b| b + problem.objective_constant)
                    .unwrap_or(f64::NEG_INFINITY);
                if status == BackendStatus::Optimal {
                    out.dual_bound = out.dual_bound.min(objective);
                }
            } else {
                out.dual_bound = objective;
                out.row_duals = Some(sol.dual_rows().to_vec());
                out.reduced_costs = Some(sol.dual_columns().to_vec());
            }
        }
        Ok(out)
    }
}
