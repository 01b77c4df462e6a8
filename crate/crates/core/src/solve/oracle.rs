//! Exhaustive reference solver for tiny instances.
//!
//! Every plan satisfying the converter-minimum and penetration rows is
//! enumerated. For a fixed plan the scenarios decouple, and the objective
//! is nondecreasing in every scenario loss, so each scenario is minimised
//! on its own: over every assignment of charge-or-discharge mode to each
//! step of each installed storage option, an LP with the forbidden
//! direction bounded to zero is solved by `minilp`, an engine unrelated to
//! the production backend. When the unrestricted LP already avoids
//! simultaneous flow it is optimal and the enumeration is skipped.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};
use crate::milp::{MilpProblem, Sense, VarId};
use crate::model::{
    add_plan_copies, add_scenario_block, evaluate_costs, investment_cost, DeviceKind, EhInstance, OperationSchedule,
    PlanDecision, ScenarioHandles, ScenarioSchedule,
};
use crate::risk::RiskConfig;

/// Largest number of scenario LPs the oracle may need in the worst case.
pub const ORACLE_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    pub plan: PlanDecision,
    pub schedule: OperationSchedule,
    pub plans_enumerated: usize,
    pub lp_solves: usize,
}

/// Solves `problem` with minilp; `None` when infeasible.
fn solve_minilp(problem: &MilpProblem) -> Result<Option<(f64, Vec<f64>)>> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<minilp::Variable> = problem
        .vars
        .iter()
        .zip(&problem.objective)
        .map(|(v, &c)| lp.add_var(c, (v.lower, v.upper)))
        .collect();
    for con in &problem.constraints {
        let op = match con.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Ge => ComparisonOp::Ge,
            Sense::Eq => ComparisonOp::Eq,
        };
        let expr: Vec<(minilp::Variable, f64)> = con.terms.iter().map(|(v, c)| (vars[v.0], *c)).collect();
        lp.add_constraint(expr, op, con.rhs);
    }
    match lp.solve() {
        Ok(sol) => {
            let x = vars.iter().map(|v| *sol.var_value(*v)).collect();
            Ok(Some((sol.objective() + problem.objective_constant, x)))
        }
        Err(minilp::Error::Infeasible) => Ok(None),
        Err(minilp::Error::Unbounded) => Err(Error::Formulation("oracle scenario LP is unbounded".into())),
    }
}

fn plans(instance: &EhInstance) -> Vec<PlanDecision> {
    let nd = instance.devices.len();
    let mut out = Vec::new();
    let radix: Vec<u32> = instance
        .res_options
        .iter()
        .map(|r| r.max_modules)
        .chain(instance.ess_options.iter().map(|e| e.max_modules))
        .collect();
    let has = |mask: u64, kind: DeviceKind| (0..nd).any(|d| mask >> d & 1 == 1 && instance.devices[d].kind == kind);
    for mask in 0..(1u64 << nd) {
        if !has(mask, DeviceKind::Cchp) || !has(mask, DeviceKind::Tx) {
            continue;
        }
        let u: Vec<bool> = (0..nd).map(|d| mask >> d & 1 == 1).collect();
        let e_cap: f64 = (0..nd).filter(|&d| u[d]).map(|d| instance.devices[d].max_input_e).sum();
        let mut counts = vec![0u32; radix.len()];
        loop {
            let (z_res, z_ess) = counts.split_at(instance.res_options.len());
            let sigma = instance.res_penetration_cap;
            let res_cap: f64 = z_res
                .iter()
                .zip(&instance.res_options)
                .map(|(&z, r)| z as f64 * r.rated_power)
                .sum();
            if (1.0 - sigma) * res_cap - sigma * e_cap <= 1e-9 {
                out.push(PlanDecision {
                    u: u.clone(),
                    z_res: z_res.to_vec(),
                    z_ess: z_ess.to_vec(),
                });
            }
            // odometer increment
            let mut i = 0;
            while i < counts.len() && counts[i] == radix[i] {
                counts[i] = 0;
                i += 1;
            }
            if i == counts.len() {
                break;
            }
            counts[i] += 1;
        }
    }
    out
}

fn active_storage(plan: &PlanDecision) -> usize {
    plan.z_ess.iter().filter(|&&z| z > 0).count()
}

struct ScenarioLp {
    problem: MilpProblem,
    handles: ScenarioHandles,
}

fn scenario_lp(instance: &EhInstance, plan: &PlanDecision, s: usize) -> Result<ScenarioLp> {
    let mut problem = MilpProblem::new();
    let copies = add_plan_copies(&mut problem, instance, &plan.to_values());
    let handles = add_scenario_block(&mut problem, instance, s, &copies, false)?;
    problem.add_objective(&handles.daily_cost);
    Ok(ScenarioLp { problem, handles })
}

fn simultaneous(lp: &ScenarioLp, x: &[f64]) -> bool {
    lp.handles
        .charge
        .iter()
        .zip(&lp.handles.discharge)
        .any(|(ch, dis)| ch.iter().zip(dis).any(|(c, d)| x[c.0] > 1e-9 && x[d.0] > 1e-9))
}

/// Cheapest schedule of scenario `s` under `plan` with exclusive storage
/// modes; `None` when no mode assignment is feasible.
fn best_schedule(
    instance: &EhInstance,
    plan: &PlanDecision,
    s: usize,
    lp_solves: &mut usize,
) -> Result<Option<(f64, ScenarioSchedule)>> {
    let lp = scenario_lp(instance, plan, s)?;
    *lp_solves += 1;
    let Some((v, x)) = solve_minilp(&lp.problem)? else {
        return Ok(None);
    };
    if !simultaneous(&lp, &x) {
        return Ok(Some((v, lp.handles.extract(instance, &x))));
    }
    let steps = instance.steps();
    let active: Vec<usize> = (0..instance.ess_options.len()).filter(|&n| plan.z_ess[n] > 0).collect();
    let bits = steps * active.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for pattern in 0..(1u64 << bits) {
        let mut p = lp.problem.clone();
        for (k, &n) in active.iter().enumerate() {
            for t in 0..steps {
                let discharging = pattern >> (k * steps + t) & 1 == 1;
                let off: VarId = if discharging {
                    lp.handles.charge[n][t]
                } else {
                    lp.handles.discharge[n][t]
                };
                p.vars[off.0].upper = 0.0;
            }
        }
        *lp_solves += 1;
        if let Some((v, x)) = solve_minilp(&p)? {
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, x));
            }
        }
    }
    Ok(best.map(|(v, x)| (v, lp.handles.extract(instance, &x))))
}

/// Global optimum of a tiny instance by enumeration.
///
/// Returns [`Error::TooLarge`] when the worst-case number of scenario LPs
/// exceeds [`ORACLE_BUDGET`], and [`Error::InfeasibleByConstruction`] when
/// no plan admits a feasible schedule.
pub fn brute_force_oracle(instance: &EhInstance, risk: RiskConfig) -> Result<OracleResult> {
    risk.check()?;
    instance.validate()?;
    let plan_space = instance
        .res_options
        .iter()
        .map(|r| r.max_modules as u128 + 1)
        .chain(instance.ess_options.iter().map(|e| e.max_modules as u128 + 1))
        .fold(1u128 << instance.devices.len().min(100), |a, b| a.saturating_mul(b));
    if plan_space > ORACLE_BUDGET as u128 {
        return Err(Error::TooLarge {
            count: plan_space,
            budget: ORACLE_BUDGET as u128,
        });
    }
    let candidates = plans(instance);
    let s_len = instance.scenarios.len() as u64;
    let steps = instance.steps() as u32;
    let mut count: u64 = 0;
    for plan in &candidates {
        let bits = steps.saturating_mul(active_storage(plan) as u32);
        let per = if bits >= 40 { u64::MAX } else { 1 + (1u64 << bits) };
        count = count.saturating_add(per.saturating_mul(s_len));
    }
    if count > ORACLE_BUDGET {
        return Err(Error::TooLarge {
            count: count as u128,
            budget: ORACLE_BUDGET as u128,
        });
    }

    // every loss is nonnegative when no price is negative, so IC bounds the objective
    let nonneg = instance.gas_price >= 0.0
        && instance.shed_cost.iter().all(|c| *c >= 0.0)
        && instance.scenarios.iter().all(|s| s.price_e.iter().all(|p| *p >= 0.0));
    let mut order: Vec<(f64, &PlanDecision)> = candidates
        .iter()
        .map(|p| Ok((investment_cost(instance, p)?, p)))
        .collect::<Result<_>>()?;
    order.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut lp_solves = 0;
    let mut enumerated = 0;
    let mut best: Option<(f64, PlanDecision, OperationSchedule)> = None;
    'plans: for (ic, plan) in order {
        if nonneg {
            if let Some((b, _, _)) = &best {
                if ic >= *b {
                    break;
                }
            }
        }
        enumerated += 1;
        let mut scenarios = Vec::with_capacity(instance.scenarios.len());
        for s in 0..instance.scenarios.len() {
            match best_schedule(instance, plan, s, &mut lp_solves)? {
                Some((_, sched)) => scenarios.push(sched),
                None => continue 'plans,
            }
        }
        let schedule = OperationSchedule { scenarios };
        let objective = evaluate_costs(instance, plan, &schedule, risk)?.objective;
        if best.as_ref().is_none_or(|(b, _, _)| objective < *b) {
            best = Some((objective, plan.clone(), schedule));
        }
    }
    let (objective, plan, schedule) =
        best.ok_or_else(|| Error::InfeasibleByConstruction("no enumerated plan admits a feasible schedule".into()))?;
    Ok(OracleResult {
        objective,
        plan,
        schedule,
        plans_enumerated: enumerated,
        lp_solves,
    })
}
