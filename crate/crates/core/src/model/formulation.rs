//! Translation of an [`EhInstance`] into a [`MilpProblem`].
//!
//! The same row generators serve three callers: the monolithic model
//! (plan variables are integral columns), Benders subproblems (plan values
//! enter as fixed copy columns whose reduced costs give cut slopes) and
//! the brute-force oracle.
//!
//! # Census
//!
//! With `D` device options, `I` nonzero device inputs (a device contributes
//! one for each of `max_input_e > 0` and `max_input_g > 0`), `R` renewable
//! options, `N` storage options, `S` scenarios and `T` steps, the monolithic
//! model has
//!
//! ```text
//! variables   = D + R + N + S·(T·(I + R + 4N + 3) + N·(T+1)) + 1 + S
//! integral    = D + R + N + 2·S·T·N
//! constraints = 3 + S·(T·(I + R + 7N + 3) + N) + S
//! ```
//!
//! Per step a scenario carries device inputs, renewable dispatch, charge,
//! discharge, two state flags per storage option and three shedding
//! columns; state of charge lives on the `T+1` step boundaries. The fixed
//! rows are the two converter minimums and the penetration cap. Per step
//! there is one availability row per input and per renewable option, seven
//! storage rows per option (flag exclusivity, two big-M and two sizing
//! limits, energy limit, energy transition) and three balances; each
//! scenario closes its storage cycle once per option and adds one CVaR
//! excess row. Shedding limits are column bounds.

use crate::error::{Error, Result};
use crate::milp::{LinExpr, MilpProblem, Sense, VarId, VarKind};
use crate::model::{Carrier, DeviceKind, EhInstance, OperationSchedule, PlanDecision, ScenarioSchedule};
use crate::risk::{emit_risk_terms, RiskConfig, RiskTerms};

/// Threshold above which a relaxed charge or discharge counts as active.
const ACTIVE_FLOW: f64 = 1e-7;

#[derive(Debug, Clone)]
pub(crate) struct PlanHandles {
    pub u: Vec<VarId>,
    pub z_res: Vec<VarId>,
    pub z_ess: Vec<VarId>,
}

impl PlanHandles {
    /// Handles in link order (u, RES counts, ESS counts).
    pub fn links(&self) -> Vec<VarId> {
        self.u.iter().chain(&self.z_res).chain(&self.z_ess).copied().collect()
    }
}

/// Integral plan columns plus the converter-minimum and penetration rows.
pub(crate) fn add_plan_block(p: &mut MilpProblem, inst: &EhInstance) -> PlanHandles {
    let u: Vec<VarId> = inst
        .devices
        .iter()
        .map(|d| p.add_var(format!("u_{}_{}", d.kind, d.capacity_id), 0.0, 1.0, VarKind::Binary))
        .collect();
    let z_res: Vec<VarId> = inst
        .res_options
        .iter()
        .map(|r| p.add_var(format!("z_{}", r.id), 0.0, r.max_modules as f64, VarKind::Integer))
        .collect();
    let z_ess: Vec<VarId> = inst
        .ess_options
        .iter()
        .map(|e| p.add_var(format!("z_{}", e.id), 0.0, e.max_modules as f64, VarKind::Integer))
        .collect();

    for (kind, label) in [(DeviceKind::Cchp, "13a"), (DeviceKind::Tx, "13b")] {
        let mut row = LinExpr::new();
        for (d, dev) in inst.devices.iter().enumerate() {
            if dev.kind == kind {
                row.add_term(u[d], 1.0);
            }
        }
        p.add_constraint(label, row, Sense::Ge, 1.0);
    }

    // (1-σ) Σ z·rated - σ Σ u·P̄e <= 0
    let sigma = inst.res_penetration_cap;
    let mut row = LinExpr::new();
    for (m, r) in inst.res_options.iter().enumerate() {
        row.add_term(z_res[m], (1.0 - sigma) * r.rated_power);
    }
    for (d, dev) in inst.devices.iter().enumerate() {
        row.add_term(u[d], -sigma * dev.max_input_e);
    }
    p.add_constraint("29", row, Sense::Le, 0.0);

    PlanHandles { u, z_res, z_ess }
}

/// Continuous plan copies fixed at `values` (link order).
pub(crate) fn add_plan_copies(p: &mut MilpProblem, inst: &EhInstance, values: &[f64]) -> PlanHandles {
    let nd = inst.devices.len();
    let nr = inst.res_options.len();
    let mut col = |name: String, v: f64| p.add_continuous(name, v, v);
    let u = (0..nd).map(|d| col(format!("u{d}"), values[d])).collect();
    let z_res = (0..nr).map(|m| col(format!("zr{m}"), values[nd + m])).collect();
    let z_ess = (0..inst.ess_options.len())
        .map(|n| col(format!("ze{n}"), values[nd + nr + n]))
        .collect();
    PlanHandles { u, z_res, z_ess }
}

/// Annualised investment cost as a function of the plan columns.
pub(crate) fn investment_expr(inst: &EhInstance, plan: &PlanHandles) -> Result<LinExpr> {
    let mut ic = LinExpr::new();
    for (d, dev) in inst.devices.iter().enumerate() {
        ic.add_term(plan.u[d], inst.device_k(d)? * dev.investment());
    }
    for (m, r) in inst.res_options.iter().enumerate() {
        ic.add_term(plan.z_res[m], inst.res_k(m)? * r.invest_cost);
    }
    for (n, e) in inst.ess_options.iter().enumerate() {
        ic.add_term(plan.z_ess[n], inst.ess_k(n)? * e.invest_cost);
    }
    Ok(ic)
}

#[derive(Debug, Clone)]
pub(crate) struct ScenarioHandles {
    pub device_e: Vec<Option<Vec<VarId>>>,
    pub device_g: Vec<Option<Vec<VarId>>>,
    pub res: Vec<Vec<VarId>>,
    pub charge: Vec<Vec<VarId>>,
    pub discharge: Vec<Vec<VarId>>,
    pub soc: Vec<Vec<VarId>>,
    pub v_ch: Option<Vec<Vec<VarId>>>,
    pub v_dis: Option<Vec<Vec<VarId>>>,
    pub shed: Vec<Vec<VarId>>,
    /// Daily trading + maintenance + shedding cost.
    pub daily_cost: LinExpr,
}

impl ScenarioHandles {
    pub fn extract(&self, inst: &EhInstance, x: &[f64]) -> ScenarioSchedule {
        let clean = |v: f64| if v.abs() < 1e-9 { 0.0 } else { v };
        let read = |ids: &[VarId]| ids.iter().map(|v| clean(x[v.0])).collect::<Vec<f64>>();
        let t_len = inst.steps();
        let mut out = ScenarioSchedule::zeros(inst);
        for d in 0..inst.devices.len() {
            if let Some(ids) = &self.device_e[d] {
                out.device_e[d] = read(ids);
            }
            if let Some(ids) = &self.device_g[d] {
                out.device_g[d] = read(ids);
            }
        }
        out.res = self.res.iter().map(|ids| read(ids)).collect();
        out.charge = self.charge.iter().map(|ids| read(ids)).collect();
        out.discharge = self.discharge.iter().map(|ids| read(ids)).collect();
        out.soc = self.soc.iter().map(|ids| read(ids)).collect();
        out.shed = self.shed.iter().map(|ids| read(ids)).collect();
        for n in 0..inst.ess_options.len() {
            for t in 0..t_len {
                match (&self.v_ch, &self.v_dis) {
                    (Some(vc), Some(vd)) => {
                        out.v_ch[n][t] = x[vc[n][t].0] > 0.5;
                        out.v_dis[n][t] = x[vd[n][t].0] > 0.5;
                    }
                    _ => {
                        out.v_ch[n][t] = out.charge[n][t] > ACTIVE_FLOW;
                        out.v_dis[n][t] = out.discharge[n][t] > ACTIVE_FLOW;
                    }
                }
            }
        }
        out.refresh_outputs(inst);
        out
    }
}

/// Operation rows and columns of scenario `s`.
///
/// With `with_flags == false` the charge/discharge state flags and their
/// big-M rows are omitted; the sizing rows then bound the flows alone.
pub(crate) fn add_scenario_block(
    p: &mut MilpProblem,
    inst: &EhInstance,
    s: usize,
    plan: &PlanHandles,
    with_flags: bool,
) -> Result<ScenarioHandles> {
    let sc = &inst.scenarios[s];
    let t_len = sc.steps();
    let dt = inst.dt_hours;
    let mut daily_cost = LinExpr::new();

    let mut device_in = |p: &mut MilpProblem, input: usize| -> Vec<Option<Vec<VarId>>> {
        inst.devices
            .iter()
            .enumerate()
            .map(|(d, dev)| {
                let cap = dev.max_input(input);
                if cap <= 0.0 {
                    return None;
                }
                let tag = if input == 0 { "e" } else { "g" };
                let label = if input == 0 { "26" } else { "27" };
                let ids: Vec<VarId> = (0..t_len)
                    .map(|t| {
                        let v = p.add_continuous(format!("p{tag}_s{s}_d{d}_t{t}"), 0.0, cap);
                        p.add_constraint(label, v * 1.0 + plan.u[d] * -cap, Sense::Le, 0.0);
                        let price = if input == 0 { sc.price_e[t] } else { inst.gas_price };
                        daily_cost.add_term(v, (price + dev.maintenance_rate) * dt);
                        v
                    })
                    .collect();
                Some(ids)
            })
            .collect()
    };
    let device_e = device_in(p, 0);
    let device_g = device_in(p, 1);

    let mut res = Vec::with_capacity(inst.res_options.len());
    for (m, r) in inst.res_options.iter().enumerate() {
        let label = match r.kind() {
            crate::model::ResKind::Wt => "15",
            crate::model::ResKind::Pv => "17",
        };
        let mut ids = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let avail = r.available(sc, t)?;
            let v = p.add_continuous(format!("pres_s{s}_m{m}_t{t}"), 0.0, avail * r.max_modules as f64);
            p.add_constraint(label, v * 1.0 + plan.z_res[m] * -avail, Sense::Le, 0.0);
            daily_cost.add_term(v, r.maintenance_rate * dt);
            ids.push(v);
        }
        res.push(ids);
    }

    let nn = inst.ess_options.len();
    let mut charge = Vec::with_capacity(nn);
    let mut discharge = Vec::with_capacity(nn);
    let mut soc = Vec::with_capacity(nn);
    let mut v_ch_all = Vec::with_capacity(nn);
    let mut v_dis_all = Vec::with_capacity(nn);
    for (n, e) in inst.ess_options.iter().enumerate() {
        let m_ch = e.big_m_charge();
        let m_dis = e.big_m_discharge();
        let e_max = e.max_modules as f64 * e.energy_per_module;
        let ch: Vec<VarId> = (0..t_len)
            .map(|t| p.add_continuous(format!("pch_s{s}_n{n}_t{t}"), 0.0, m_ch))
            .collect();
        let dis: Vec<VarId> = (0..t_len)
            .map(|t| p.add_continuous(format!("pdis_s{s}_n{n}_t{t}"), 0.0, m_dis))
            .collect();
        let en: Vec<VarId> = (0..=t_len)
            .map(|t| p.add_continuous(format!("soc_s{s}_n{n}_t{t}"), 0.0, e_max))
            .collect();
        let mut vc = Vec::new();
        let mut vd = Vec::new();
        for t in 0..t_len {
            if with_flags {
                let a = p.add_var(format!("vch_s{s}_n{n}_t{t}"), 0.0, 1.0, VarKind::Binary);
                let b = p.add_var(format!("vdis_s{s}_n{n}_t{t}"), 0.0, 1.0, VarKind::Binary);
                p.add_constraint("19", a * 1.0 + b * 1.0, Sense::Le, 1.0);
                p.add_constraint("20a", ch[t] * 1.0 + a * -m_ch, Sense::Le, 0.0);
                p.add_constraint("21a", dis[t] * 1.0 + b * -m_dis, Sense::Le, 0.0);
                vc.push(a);
                vd.push(b);
            }
            p.add_constraint("20b", ch[t] * 1.0 + plan.z_ess[n] * -e.max_charge_power, Sense::Le, 0.0);
            p.add_constraint(
                "21b",
                dis[t] * 1.0 + plan.z_ess[n] * -e.max_discharge_power,
                Sense::Le,
                0.0,
            );
            p.add_constraint(
                "22",
                en[t + 1] * 1.0 + plan.z_ess[n] * -e.energy_per_module,
                Sense::Le,
                0.0,
            );
            let transition = en[t + 1] * 1.0 + en[t] * -1.0 + ch[t] * (-e.eta_ch * dt) + dis[t] * (dt / e.eta_dis);
            p.add_constraint("23", transition, Sense::Eq, 0.0);
            daily_cost.add_term(ch[t], e.maintenance_rate * dt);
            daily_cost.add_term(dis[t], e.maintenance_rate * dt);
        }
        p.add_constraint("24", en[0] * 1.0 + en[t_len] * -1.0, Sense::Eq, 0.0);
        charge.push(ch);
        discharge.push(dis);
        soc.push(en);
        v_ch_all.push(vc);
        v_dis_all.push(vd);
    }

    let shed: Vec<Vec<VarId>> = Carrier::ALL
        .iter()
        .map(|&r| {
            let load = sc.load(r);
            (0..t_len)
                .map(|t| {
                    let v = p.add_continuous(format!("shed{}_s{s}_t{t}", r.short(), s = s), 0.0, load[t]);
                    daily_cost.add_term(v, inst.shed_cost[r.index()] * dt);
                    v
                })
                .collect()
        })
        .collect();

    for carrier in Carrier::ALL {
        let r = carrier.index();
        for t in 0..t_len {
            let mut row = LinExpr::new();
            for (d, dev) in inst.devices.iter().enumerate() {
                if let Some(ids) = &device_e[d] {
                    row.add_term(ids[t], dev.coupling[r][0]);
                }
                if let Some(ids) = &device_g[d] {
                    row.add_term(ids[t], dev.coupling[r][1]);
                }
            }
            if carrier == Carrier::Electricity {
                for ids in &res {
                    row.add_term(ids[t], 1.0);
                }
            }
            for (n, e) in inst.ess_options.iter().enumerate() {
                if e.kind.carrier() == carrier {
                    row.add_term(discharge[n][t], 1.0);
                    row.add_term(charge[n][t], -1.0);
                }
            }
            row.add_term(shed[r][t], 1.0);
            let load = sc.load(carrier)[t];
            match carrier {
                Carrier::Electricity => p.add_constraint("30", row, Sense::Eq, load),
                Carrier::Heat => p.add_constraint("31", row, Sense::Ge, load),
                Carrier::Cooling => p.add_constraint("32", row, Sense::Ge, load),
            };
        }
    }

    Ok(ScenarioHandles {
        device_e,
        device_g,
        res,
        charge,
        discharge,
        soc,
        v_ch: with_flags.then_some(v_ch_all),
        v_dis: with_flags.then_some(v_dis_all),
        shed,
        daily_cost: daily_cost.compact(),
    })
}

/// The monolithic planning MILP with handles for reading solutions back.
#[derive(Debug, Clone)]
pub struct EhMilp {
    pub problem: MilpProblem,
    pub(crate) plan: PlanHandles,
    pub(crate) scenarios: Vec<ScenarioHandles>,
    pub risk: RiskTerms,
}

impl EhMilp {
    pub fn extract(&self, inst: &EhInstance, x: &[f64]) -> (PlanDecision, OperationSchedule) {
        let values: Vec<f64> = self.plan.links().iter().map(|v| x[v.0]).collect();
        let plan = PlanDecision::from_values(inst, &values);
        let schedule = OperationSchedule {
            scenarios: self.scenarios.iter().map(|h| h.extract(inst, x)).collect(),
        };
        (plan, schedule)
    }

    /// Column holding the CVaR threshold.
    pub fn zeta(&self) -> VarId {
        self.risk.zeta
    }
}

/// Builds the full two-stage model with the CVaR objective.
pub fn build_milp(inst: &EhInstance, risk: RiskConfig) -> Result<EhMilp> {
    inst.validate()?;
    risk.check()?;
    let mut p = MilpProblem::new();
    let plan = add_plan_block(&mut p, inst);
    let ic = investment_expr(inst, &plan)?;
    p.add_objective(&ic);
    let mut scenarios = Vec::with_capacity(inst.scenarios.len());
    for s in 0..inst.scenarios.len() {
        scenarios.push(add_scenario_block(&mut p, inst, s, &plan, true)?);
    }
    let losses: Vec<LinExpr> = scenarios
        .iter()
        .map(|h| h.daily_cost.scaled(inst.days_per_year))
        .collect();
    let risk_terms = emit_risk_terms(&mut p, &losses, &inst.probs(), risk)?;
    p.check()
        .map_err(|e| Error::Validation(format!("built model is inconsistent: {e}")))?;
    Ok(EhMilp {
        problem: p,
        plan,
        scenarios,
        risk: risk_terms,
    })
}

/// Closed-form size of [`build_milp`]'s output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Census {
    pub vars: usize,
    pub integral: usize,
    pub constraints: usize,
}

pub fn census(inst: &EhInstance) -> Census {
    let d = inst.devices.len();
    let inputs: usize = inst
        .devices
        .iter()
        .map(|dev| usize::from(dev.max_input_e > 0.0) + usize::from(dev.max_input_g > 0.0))
        .sum();
    let r = inst.res_options.len();
    let n = inst.ess_options.len();
    let s = inst.scenarios.len();
    let t = inst.steps();
    Census {
        vars: d + r + n + s * (t * (inputs + r + 4 * n + 3) + n * (t + 1)) + 1 + s,
        integral: d + r + n + 2 * s * t * n,
        constraints: 3 + s * (t * (inputs + r + 7 * n + 3) + n) + s,
    }
}
