//! Solution paths for the planning problem.
//!
//! [`solve_monolithic`] hands the full MILP to a backend. [`benders_solve`]
//! splits it into an investment master and one operation LP per scenario,
//! with the storage charge/discharge flags relaxed in the LPs and the
//! outcome certified by [`relaxation_audit`]. [`brute_force_oracle`]
//! enumerates every integer assignment of tiny instances on an independent
//! LP engine.
//!
//! Solves run sequentially on the calling thread.

mod backend;
mod benders;
mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_milp, evaluate_costs, CostBreakdown, EhInstance, OperationSchedule, PlanDecision};
use crate::risk::RiskConfig;

pub use backend::{BackendSolution, BackendStatus, Capabilities, HighsBackend, SolveOptions, SolverBackend};
pub use benders::{
    benders_solve, solve_two_stage, BendersCut, BendersIteration, BendersLog, BendersOptions, CutKind, ScenarioLp,
    TwoStage, TwoStageOutcome, UpperBound,
};
pub use oracle::{brute_force_oracle, OracleResult, ORACLE_BUDGET};

/// Product of charge and discharge above which a step counts as simultaneous.
pub const AUDIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    OptimalWithinGap,
    Infeasible,
    IterationLimit,
    TimeLimit,
}

impl SolveStatus {
    pub fn has_plan(self) -> bool {
        !matches!(self, SolveStatus::Infeasible)
    }
}

/// Result of one planning solve. Costs are always recomputed from the
/// returned point by [`evaluate_costs`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSolution {
    pub status: SolveStatus,
    pub plan: Option<PlanDecision>,
    pub schedule: Option<OperationSchedule>,
    pub costs: Option<CostBreakdown>,
    /// Relative gap proven by the solver.
    pub gap: Option<f64>,
    /// Objective reported by the solver, for cross-checks.
    pub solver_objective: Option<f64>,
    /// Optimal CVaR threshold of the model, when one is available.
    pub zeta: Option<f64>,
    pub hint: Option<String>,
}

impl PlanSolution {
    pub fn infeasible(hint: impl Into<String>) -> Self {
        Self {
            status: SolveStatus::Infeasible,
            plan: None,
            schedule: None,
            costs: None,
            gap: None,
            solver_objective: None,
            zeta: None,
            hint: Some(hint.into()),
        }
    }

    pub fn objective(&self) -> Option<f64> {
        self.costs.as_ref().map(|c| c.objective)
    }
}

/// Solves the full MILP in one backend call.
pub fn solve_monolithic(
    instance: &EhInstance,
    risk: RiskConfig,
    opts: &SolveOptions,
    backend: &dyn SolverBackend,
) -> Result<PlanSolution> {
    let milp = match build_milp(instance, risk) {
        Ok(m) => m,
        Err(Error::InfeasibleByConstruction(msg)) => return Ok(PlanSolution::infeasible(msg)),
        Err(e) => return Err(e),
    };
    let sol = backend.solve(&milp.problem, opts)?;
    let status = match sol.status {
        BackendStatus::Optimal => SolveStatus::OptimalWithinGap,
        BackendStatus::TimeLimit => SolveStatus::TimeLimit,
        BackendStatus::Infeasible => {
            return Ok(PlanSolution::infeasible(
                "the backend proved the planning model infeasible",
            ))
        }
        BackendStatus::Unbounded => return Err(Error::Formulation("planning model reported unbounded".into())),
    };
    if !sol.has_point() {
        let mut out = PlanSolution::infeasible("time limit reached before a feasible plan was found");
        out.status = SolveStatus::TimeLimit;
        return Ok(out);
    }
    let (plan, schedule) = milp.extract(instance, &sol.x);
    let costs = evaluate_costs(instance, &plan, &schedule, risk)?;
    Ok(PlanSolution {
        status,
        plan: Some(plan),
        schedule: Some(schedule),
        costs: Some(costs),
        gap: Some(sol.gap()),
        solver_objective: Some(sol.objective),
        zeta: Some(sol.x[milp.zeta().0]),
        hint: None,
    })
}

/// One step at which a storage option charges and discharges together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditFlag {
    pub scenario: usize,
    pub option: usize,
    pub step: usize,
    pub charge: f64,
    pub discharge: f64,
}

/// Steps where `charge · discharge > AUDIT_TOL`. An empty report means the
/// schedule respects charge/discharge exclusivity.
pub fn relaxation_audit(instance: &EhInstance, schedule: &OperationSchedule) -> Vec<AuditFlag> {
    let mut flags = Vec::new();
    for (s, sc) in schedule.scenarios.iter().enumerate() {
        for n in 0..instance.ess_options.len().min(sc.charge.len()) {
            for (t, (&ch, &dis)) in sc.charge[n].iter().zip(&sc.discharge[n]).enumerate() {
                if ch * dis > AUDIT_TOL {
                    flags.push(AuditFlag {
                        scenario: s,
                        option: n,
                        step: t,
                        charge: ch,
                        discharge: dis,
                    });
                }
            }
        }
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{small_instance, zero_load_instance};
    use crate::model::{default_catalog, validate_schedule, CasePreset, DeviceKind};

    fn cheapest_pair_ic(inst: &EhInstance) -> f64 {
        let min_ic = |kind| {
            (0..inst.devices.len())
                .filter(|&d| inst.devices[d].kind == kind)
                .map(|d| inst.device_k(d).unwrap() * inst.devices[d].investment())
                .fold(f64::INFINITY, f64::min)
        };
        min_ic(DeviceKind::Cchp) + min_ic(DeviceKind::Tx)
    }

    #[test]
    fn zero_load_buys_cheapest_pair_only() {
        let inst = zero_load_instance(&default_catalog().for_case(CasePreset::Case4), 1, 4);
        let sol = solve_monolithic(&inst, RiskConfig::neutral(), &SolveOptions::default(), &HighsBackend).unwrap();
        assert_eq!(sol.status, SolveStatus::OptimalWithinGap);
        let costs = sol.costs.unwrap();
        let expected = cheapest_pair_ic(&inst);
        assert!((costs.objective - expected).abs() <= 1e-6 * expected);
        assert!(costs.tc.iter().chain(&costs.mc).chain(&costs.lc).all(|v| *v == 0.0));
        let plan = sol.plan.unwrap();
        assert_eq!(plan.u.iter().filter(|u| **u).count(), 2);
    }

    #[test]
    fn monolithic_solution_validates() {
        let inst = small_instance();
        let risk = RiskConfig::new(0.5, 0.5).unwrap();
        let sol = solve_monolithic(&inst, risk, &SolveOptions::default(), &HighsBackend).unwrap();
        let (plan, sched) = (sol.plan.unwrap(), sol.schedule.unwrap());
        assert!(validate_schedule(&inst, &plan, &sched).is_empty());
        let costs = sol.costs.unwrap();
        let rel = (costs.objective - sol.solver_objective.unwrap()).abs() / costs.objective;
        assert!(
            rel < 1e-6,
            "evaluated {} vs solver {}",
            costs.objective,
            sol.solver_objective.unwrap()
        );
    }

    #[test]
    fn zero_penetration_cap_forbids_renewables() {
        let mut inst = small_instance();
        inst.res_penetration_cap = 0.0;
        inst.scenarios
            .iter_mut()
            .for_each(|s| s.wind_speed.iter_mut().for_each(|v| *v = 12.0));
        let sol = solve_monolithic(&inst, RiskConfig::neutral(), &SolveOptions::default(), &HighsBackend).unwrap();
        assert!(sol.plan.unwrap().z_res.iter().all(|z| *z == 0));
    }

    #[test]
    fn missing_transformer_is_infeasible() {
        let mut inst = small_instance();
        inst.devices.retain(|d| d.kind != DeviceKind::Tx);
        let sol = solve_monolithic(&inst, RiskConfig::neutral(), &SolveOptions::default(), &HighsBackend).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(sol.hint.unwrap().contains("TX"));
    }

    #[test]
    fn audit_flags_simultaneous_flow() {
        let inst = small_instance();
        let mut sched = OperationSchedule::zeros(&inst);
        assert!(relaxation_audit(&inst, &sched).is_empty());
        sched.scenarios[0].charge[0][1] = 1.0;
        sched.scenarios[0].discharge[0][1] = 1.0;
        let flags = relaxation_audit(&inst, &sched);
        assert_eq!(flags.len(), 1);
        assert_eq!((flags[0].scenario, flags[0].step), (0, 1));
    }
}
