//! Multi-cut Benders decomposition.
//!
//! The engine works on any [`TwoStage`] problem: a master MILP that holds
//! the first-stage columns and one recourse column per scenario, and one
//! LP per scenario whose first-stage values enter through fixed copy
//! columns. At a master point `x̂` the reduced costs `d` of the copies are
//! subgradients of the scenario value `Q_s`, giving the optimality cut
//!
//! ```text
//! θ_s >= Q_s(x̂) + d·(x - x̂)
//! ```
//!
//! An infeasible scenario LP is replaced by its phase-one LP (one
//! artificial column per row side), whose value `w` and slope `g` yield
//! the feasibility cut `w(x̂) + g·(x - x̂) <= 0`.
//!
//! A warm-up phase solves the LP relaxation of the master until it stops
//! producing cuts; the MILP master then takes over. The lower bound is the
//! running maximum of the master's proven bound, the upper bound the best
//! evaluated integer point.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp::{LinExpr, MilpProblem, Sense, VarId};
use crate::model::{
    add_plan_block, add_plan_copies, add_scenario_block, evaluate_costs, investment_cost, investment_expr, EhInstance,
    OperationSchedule, PlanDecision, ScenarioHandles,
};
use crate::risk::{cvar, emit_risk_terms, LossDistribution, RiskConfig};
use crate::solve::{
    relaxation_audit, solve_monolithic, BackendStatus, PlanSolution, SolveOptions, SolveStatus, SolverBackend,
};

/// Relative amount by which `Q_s` must exceed `θ_s` before a cut is added.
const CUT_TOL: f64 = 1e-9;

/// Cut slopes below this magnitude are folded into the constant.
const TINY_SLOPE: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioLp {
    /// Minimisation LP; copy columns carry placeholder bounds.
    pub lp: MilpProblem,
    /// Copy columns in link order.
    pub copies: Vec<VarId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStage {
    pub master: MilpProblem,
    /// First-stage master columns in link order.
    pub links: Vec<VarId>,
    /// Recourse column of each scenario.
    pub thetas: Vec<VarId>,
    pub subs: Vec<ScenarioLp>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BendersOptions {
    /// Relative gap `(UB - LB)/|UB|` at which to stop.
    pub gap: f64,
    pub max_iter: usize,
    /// Solve the LP relaxation of the master first.
    pub warm_start: bool,
    /// Lower bound of each recourse column.
    pub theta_lower: f64,
}

impl Default for BendersOptions {
    fn default() -> Self {
        Self {
            gap: 1e-4,
            max_iter: 200,
            warm_start: true,
            theta_lower: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutKind {
    Optimality,
    Feasibility,
}

/// `θ_s >= constant + Σ coef·x` (optimality) or `0 >= constant + Σ coef·x`
/// (feasibility), with `x` indexed in link order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BendersCut {
    pub kind: CutKind,
    pub scenario: usize,
    pub iteration: usize,
    pub constant: f64,
    pub coefs: Vec<f64>,
}

impl BendersCut {
    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.constant + self.coefs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BendersIteration {
    pub iteration: usize,
    pub lb: f64,
    pub ub: f64,
    pub gap: f64,
    pub cuts: usize,
    pub master_ms: f64,
    pub sub_ms: f64,
    pub relaxed_master: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BendersLog {
    pub iterations: Vec<BendersIteration>,
    pub cuts: Vec<BendersCut>,
    pub subproblem_solves: usize,
    /// The relaxation audit failed and the result came from a monolithic solve.
    pub fell_back: bool,
}

impl BendersLog {
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(writer);
        writeln!(w, "iteration,lb,ub,gap,cuts,master_ms,sub_ms")?;
        for it in &self.iterations {
            writeln!(
                w,
                "{},{},{},{},{},{:.3},{:.3}",
                it.iteration, it.lb, it.ub, it.gap, it.cuts, it.master_ms, it.sub_ms
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageOutcome {
    pub status: SolveStatus,
    /// Best integer first-stage point in link order.
    pub x: Option<Vec<f64>>,
    /// Scenario values at `x`.
    pub recourse: Vec<f64>,
    /// Scenario LP solutions at `x`.
    pub sub_points: Vec<Vec<f64>>,
    pub lb: f64,
    pub ub: f64,
    pub log: BendersLog,
}

struct SubResult {
    value: f64,
    slope: Vec<f64>,
    point: Vec<f64>,
    feasible: bool,
}

fn fix_copies(sub: &ScenarioLp, x: &[f64]) -> MilpProblem {
    let mut lp = sub.lp.clone();
    for (c, &v) in sub.copies.iter().zip(x) {
        lp.vars[c.0].lower = v;
        lp.vars[c.0].upper = v;
    }
    lp
}

/// Same rows plus nonnegative artificials; minimises total infeasibility.
fn phase_one(lp: &MilpProblem) -> MilpProblem {
    let mut p = lp.clone();
    p.objective.iter_mut().for_each(|c| *c = 0.0);
    p.objective_constant = 0.0;
    for r in 0..p.constraints.len() {
        let signs: &[f64] = match p.constraints[r].sense {
            Sense::Le => &[-1.0],
            Sense::Ge => &[1.0],
            Sense::Eq => &[1.0, -1.0],
        };
        for &sign in signs {
            let a = p.add_continuous(format!("art{r}"), 0.0, f64::INFINITY);
            p.constraints[r].terms.push((a, sign));
            p.objective[a.0] = 1.0;
        }
    }
    p
}

fn solve_sub(sub: &ScenarioLp, x: &[f64], backend: &dyn SolverBackend) -> Result<SubResult> {
    let lp = fix_copies(sub, x);
    let opts = SolveOptions::default();
    let sol = backend.solve(&lp, &opts)?;
    let slope_of = |rc: &Option<Vec<f64>>| -> Result<Vec<f64>> {
        let rc = rc
            .as_ref()
            .ok_or_else(|| Error::Solver("backend returned no reduced costs for an LP".into()))?;
        Ok(sub.copies.iter().map(|c| rc[c.0]).collect())
    };
    match sol.status {
        BackendStatus::Optimal => Ok(SubResult {
            value: sol.objective,
            slope: slope_of(&sol.reduced_costs)?,
            point: sol.x,
            feasible: true,
        }),
        BackendStatus::Infeasible => {
            let p1 = backend.solve(&phase_one(&lp), &opts)?;
            if p1.status != BackendStatus::Optimal {
                return Err(Error::Solver("phase-one LP did not solve to optimality".into()));
            }
            Ok(SubResult {
                value: p1.objective,
                slope: slope_of(&p1.reduced_costs)?,
                point: Vec::new(),
                feasible: false,
            })
        }
        BackendStatus::Unbounded => Err(Error::Formulation("scenario subproblem is unbounded".into())),
        BackendStatus::TimeLimit => Err(Error::Solver("scenario subproblem hit the time limit".into())),
    }
}

/// Zeroes negligible slopes, lowering `constant` by the most the dropped
/// term can contribute over the column's bounds so the cut stays valid.
fn tidy_slope(master: &MilpProblem, links: &[VarId], slope: &mut [f64], constant: &mut f64) {
    for (d, v) in slope.iter_mut().zip(links) {
        if *d != 0.0 && d.abs() < TINY_SLOPE {
            let var = &master.vars[v.0];
            *constant -= d.abs() * var.lower.abs().max(var.upper.abs());
            *d = 0.0;
        }
    }
}

fn is_integral_point(master: &MilpProblem, links: &[VarId], x: &[f64]) -> bool {
    links
        .iter()
        .zip(x)
        .all(|(v, val)| !master.vars[v.0].kind.is_integral() || (val - val.round()).abs() <= 1e-6)
}

/// Prices a first-stage point given its scenario values.
pub type UpperBound<'a> = dyn Fn(&[f64], &[f64]) -> Result<f64> + 'a;

/// First-stage point, scenario values and scenario LP points.
type Incumbent = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>);

/// Runs the decomposition. `upper(x, q)` prices an integer first-stage
/// point `x` with scenario values `q` under the true objective.
pub fn solve_two_stage(
    problem: &TwoStage,
    upper: &UpperBound,
    opts: &BendersOptions,
    backend: &dyn SolverBackend,
) -> Result<TwoStageOutcome> {
    if opts.max_iter == 0 {
        return Err(Error::Domain("max_iter must be at least 1".into()));
    }
    if problem.thetas.len() != problem.subs.len() {
        return Err(Error::Domain("one recourse column per subproblem required".into()));
    }
    let master_opts = SolveOptions {
        mip_rel_gap: (opts.gap * 0.01).min(1e-6),
        time_limit: None,
    };
    let mut master = problem.master.clone();
    for &th in &problem.thetas {
        master.vars[th.0].lower = opts.theta_lower;
    }
    let mut relaxed = opts.warm_start;
    let warm_cap = (opts.max_iter / 4).max(1);
    let mut log = BendersLog::default();
    let (mut lb, mut ub) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut best: Option<Incumbent> = None;
    let mut status = SolveStatus::IterationLimit;

    for iteration in 1..=opts.max_iter {
        let t0 = Instant::now();
        let m = if relaxed {
            master.lp_relaxation()
        } else {
            master.clone()
        };
        let msol = backend.solve(&m, &master_opts)?;
        let master_ms = t0.elapsed().as_secs_f64() * 1e3;
        match msol.status {
            BackendStatus::Optimal => {}
            BackendStatus::Infeasible => {
                return Ok(TwoStageOutcome {
                    status: SolveStatus::Infeasible,
                    x: None,
                    recourse: Vec::new(),
                    sub_points: Vec::new(),
                    lb,
                    ub,
                    log,
                })
            }
            BackendStatus::Unbounded => return Err(Error::Formulation("Benders master is unbounded".into())),
            BackendStatus::TimeLimit => return Err(Error::Solver("Benders master hit the time limit".into())),
        }
        lb = lb.max(msol.dual_bound);
        let mut x: Vec<f64> = problem.links.iter().map(|v| msol.x[v.0]).collect();
        let integral = is_integral_point(&master, &problem.links, &x);
        if integral {
            for (v, val) in problem.links.iter().zip(x.iter_mut()) {
                if master.vars[v.0].kind.is_integral() {
                    *val = val.round();
                }
            }
        }

        let t1 = Instant::now();
        let mut q = Vec::with_capacity(problem.subs.len());
        let mut points = Vec::with_capacity(problem.subs.len());
        let mut all_feasible = true;
        let mut added = 0;
        for (s, sub) in problem.subs.iter().enumerate() {
            let mut res = solve_sub(sub, &x, backend)?;
            log.subproblem_solves += 1;
            let mut constant = res.value - res.slope.iter().zip(&x).map(|(d, v)| d * v).sum::<f64>();
            tidy_slope(&master, &problem.links, &mut res.slope, &mut constant);
            let theta_hat = msol.x[problem.thetas[s].0];
            let mut row = LinExpr::new();
            for (j, &d) in res.slope.iter().enumerate().filter(|(_, d)| **d != 0.0) {
                row.add_term(problem.links[j], -d);
            }
            if res.feasible {
                if res.value > theta_hat + CUT_TOL * res.value.abs().max(1.0) {
                    row.add_term(problem.thetas[s], 1.0);
                    master.add_constraint(format!("benders.opt.{s}"), row, Sense::Ge, constant);
                    log.cuts.push(BendersCut {
                        kind: CutKind::Optimality,
                        scenario: s,
                        iteration,
                        constant,
                        coefs: res.slope.clone(),
                    });
                    added += 1;
                }
                q.push(res.value);
                points.push(res.point);
            } else {
                all_feasible = false;
                master.add_constraint(format!("benders.feas.{s}"), row, Sense::Ge, constant);
                log.cuts.push(BendersCut {
                    kind: CutKind::Feasibility,
                    scenario: s,
                    iteration,
                    constant,
                    coefs: res.slope,
                });
                added += 1;
            }
        }
        let sub_ms = t1.elapsed().as_secs_f64() * 1e3;

        if all_feasible && integral {
            let value = upper(&x, &q)?;
            if value < ub {
                ub = value;
                best = Some((x.clone(), q.clone(), points));
            }
        }
        let gap = if ub.is_finite() {
            ((ub - lb) / ub.abs().max(1e-9)).max(0.0)
        } else {
            f64::INFINITY
        };
        log.iterations.push(BendersIteration {
            iteration,
            lb,
            ub,
            gap,
            cuts: added,
            master_ms,
            sub_ms,
            relaxed_master: relaxed,
        });
        log::debug!("benders it {iteration}: lb {lb:.6e} ub {ub:.6e} gap {gap:.3e} cuts {added}");

        if gap <= opts.gap {
            status = SolveStatus::OptimalWithinGap;
            break;
        }
        if relaxed {
            if added == 0 || iteration >= warm_cap {
                relaxed = false;
            }
        } else if added == 0 {
            // the master already prices every scenario exactly at x̂
            break;
        }
    }

    let (x, recourse, sub_points) = match best {
        Some((x, q, p)) => (Some(x), q, p),
        None => (None, Vec::new(), Vec::new()),
    };
    Ok(TwoStageOutcome {
        status,
        x,
        recourse,
        sub_points,
        lb,
        ub,
        log,
    })
}

struct EhDecomposition {
    two_stage: TwoStage,
    handles: Vec<ScenarioHandles>,
}

fn decompose(instance: &EhInstance, risk: RiskConfig) -> Result<EhDecomposition> {
    let mut master = MilpProblem::new();
    let plan = add_plan_block(&mut master, instance);
    master.add_objective(&investment_expr(instance, &plan)?);
    let thetas: Vec<VarId> = (0..instance.scenarios.len())
        .map(|s| master.add_continuous(format!("theta{s}"), 0.0, f64::INFINITY))
        .collect();
    let losses: Vec<LinExpr> = thetas.iter().map(|&t| LinExpr::from(t)).collect();
    emit_risk_terms(&mut master, &losses, &instance.probs(), risk)?;

    let zeros = PlanDecision::empty(instance).to_values();
    let mut subs = Vec::with_capacity(instance.scenarios.len());
    let mut handles = Vec::with_capacity(instance.scenarios.len());
    for s in 0..instance.scenarios.len() {
        let mut lp = MilpProblem::new();
        let copies = add_plan_copies(&mut lp, instance, &zeros);
        let h = add_scenario_block(&mut lp, instance, s, &copies, false)?;
        lp.add_objective(&h.daily_cost.scaled(instance.days_per_year));
        subs.push(ScenarioLp {
            lp,
            copies: copies.links(),
        });
        handles.push(h);
    }
    Ok(EhDecomposition {
        two_stage: TwoStage {
            master,
            links: plan.links(),
            thetas,
            subs,
        },
        handles,
    })
}

/// Benders decomposition of the planning problem.
///
/// Storage flags are relaxed in the scenario LPs. If the recovered schedule
/// charges and discharges one option at the same step, the instance is
/// re-solved monolithically and [`BendersLog::fell_back`] is set.
pub fn benders_solve(
    instance: &EhInstance,
    risk: RiskConfig,
    opts: &BendersOptions,
    backend: &dyn SolverBackend,
) -> Result<(PlanSolution, BendersLog)> {
    risk.check()?;
    instance.validate_data()?;
    let dec = decompose(instance, risk)?;
    let probs = instance.probs();
    let upper = |x: &[f64], q: &[f64]| -> Result<f64> {
        let plan = PlanDecision::from_values(instance, x);
        let ic = investment_cost(instance, &plan)?;
        let dist = LossDistribution::new(q.to_vec(), probs.clone())?;
        Ok(ic + (1.0 - risk.beta) * dist.mean() + risk.beta * cvar(&dist, risk.alpha)?)
    };
    let out = solve_two_stage(&dec.two_stage, &upper, opts, backend)?;
    let mut log = out.log;
    let Some(x) = out.x else {
        let hint = if out.status == SolveStatus::Infeasible {
            "investment master is infeasible (no admissible CCHP/TX selection)"
        } else {
            "no integer plan found within the iteration limit"
        };
        let mut sol = PlanSolution::infeasible(hint);
        sol.status = out.status;
        return Ok((sol, log));
    };
    let plan = PlanDecision::from_values(instance, &x);
    let schedule = OperationSchedule {
        scenarios: dec
            .handles
            .iter()
            .zip(&out.sub_points)
            .map(|(h, p)| h.extract(instance, p))
            .collect(),
    };
    let flags = relaxation_audit(instance, &schedule);
    if !flags.is_empty() {
        log::warn!(
            "relaxation audit flagged {} simultaneous charge/discharge steps; re-solving monolithically",
            flags.len()
        );
        log.fell_back = true;
        let mono = SolveOptions {
            mip_rel_gap: opts.gap,
            time_limit: None,
        };
        let mut sol = solve_monolithic(instance, risk, &mono, backend)?;
        sol.hint = Some(format!(
            "relaxation audit flagged {} steps; monolithic fallback",
            flags.len()
        ));
        return Ok((sol, log));
    }
    let costs = evaluate_costs(instance, &plan, &schedule, risk)?;
    // the empirical VaR of the final losses minimises the CVaR objective, like the master ζ
    let zeta = Some(costs.var_alpha);
    let gap = if out.ub.is_finite() {
        (out.ub - out.lb).max(0.0) / out.ub.abs().max(1e-9)
    } else {
        f64::INFINITY
    };
    Ok((
        PlanSolution {
            status: out.status,
            plan: Some(plan),
            schedule: Some(schedule),
            costs: Some(costs),
            gap: Some(gap),
            solver_objective: Some(out.ub),
            zeta,
            hint: None,
        },
        log,
    ))
}
