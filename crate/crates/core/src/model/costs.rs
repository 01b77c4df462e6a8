//! Solver-independent cost evaluation of a plan and its operation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EhInstance, OperationSchedule, PlanDecision};
use crate::risk::{cvar, empirical_var, LossDistribution, RiskConfig};

/// Powers below this are treated as rounding noise rather than errors.
const NEGATIVE_TOL: f64 = 1e-7;

/// Cost components of one evaluated plan.
///
/// `tc`, `mc` and `lc` are per-scenario daily costs. The expected values,
/// VaR, CVaR and the objective are annual figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub ic: f64,
    pub tc: Vec<f64>,
    pub mc: Vec<f64>,
    pub lc: Vec<f64>,
    pub tc_expected: f64,
    pub mc_expected: f64,
    pub lc_expected: f64,
    pub oc_expected: f64,
    pub var_alpha: f64,
    pub cvar_alpha: f64,
    pub objective: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl CostBreakdown {
    /// Annual loss of each scenario.
    pub fn losses(&self, days_per_year: f64) -> Vec<f64> {
        (0..self.tc.len())
            .map(|s| days_per_year * (self.tc[s] + self.mc[s] + self.lc[s]))
            .collect()
    }
}

/// Annualised investment cost of a plan.
pub fn investment_cost(instance: &EhInstance, plan: &PlanDecision) -> Result<f64> {
    check_plan_shape(instance, plan)?;
    let mut ic = 0.0;
    for (d, dev) in instance.devices.iter().enumerate() {
        if plan.u[d] {
            ic += instance.device_k(d)? * dev.investment();
        }
    }
    for (m, r) in instance.res_options.iter().enumerate() {
        ic += instance.res_k(m)? * r.invest_cost * plan.z_res[m] as f64;
    }
    for (n, e) in instance.ess_options.iter().enumerate() {
        ic += instance.ess_k(n)? * e.invest_cost * plan.z_ess[n] as f64;
    }
    Ok(ic)
}

fn check_plan_shape(instance: &EhInstance, plan: &PlanDecision) -> Result<()> {
    if plan.u.len() != instance.devices.len()
        || plan.z_res.len() != instance.res_options.len()
        || plan.z_ess.len() != instance.ess_options.len()
    {
        return Err(Error::Validation(
            "plan does not match the instance option lists".into(),
        ));
    }
    Ok(())
}

fn check_schedule_shape(instance: &EhInstance, schedule: &OperationSchedule) -> Result<()> {
    if schedule.scenarios.len() != instance.scenarios.len() {
        return Err(Error::Validation(format!(
            "schedule has {} scenarios, instance {}",
            schedule.scenarios.len(),
            instance.scenarios.len()
        )));
    }
    let t = instance.steps();
    for (s, sc) in schedule.scenarios.iter().enumerate() {
        let rows = |v: &Vec<Vec<f64>>, n: usize, len: usize| v.len() == n && v.iter().all(|r| r.len() == len);
        let nn = instance.ess_options.len();
        let ok = rows(&sc.device_e, instance.devices.len(), t)
            && rows(&sc.device_g, instance.devices.len(), t)
            && rows(&sc.res, instance.res_options.len(), t)
            && rows(&sc.charge, nn, t)
            && rows(&sc.discharge, nn, t)
            && rows(&sc.soc, nn, t + 1)
            && rows(&sc.shed, 3, t)
            && sc.v_ch.len() == nn
            && sc.v_dis.len() == nn
            && sc.v_ch.iter().chain(&sc.v_dis).all(|r| r.len() == t);
        if !ok {
            return Err(Error::Validation(format!(
                "scenario {s}: schedule dimensions do not match"
            )));
        }
    }
    Ok(())
}

/// Scores a plan and its operation under the CVaR-weighted objective.
pub fn evaluate_costs(
    instance: &EhInstance,
    plan: &PlanDecision,
    schedule: &OperationSchedule,
    risk: RiskConfig,
) -> Result<CostBreakdown> {
    risk.check()?;
    check_schedule_shape(instance, schedule)?;
    let ic = investment_cost(instance, plan)?;
    let dt = instance.dt_hours;
    let ns = instance.scenarios.len();
    let (mut tc, mut mc, mut lc) = (vec![0.0; ns], vec![0.0; ns], vec![0.0; ns]);
    for (s, (op, sc)) in schedule.scenarios.iter().zip(&instance.scenarios).enumerate() {
        let all = op
            .device_e
            .iter()
            .chain(&op.device_g)
            .chain(&op.res)
            .chain(&op.charge)
            .chain(&op.discharge)
            .chain(&op.soc)
            .chain(&op.shed);
        if all.flatten().any(|v| *v < -NEGATIVE_TOL || !v.is_finite()) {
            return Err(Error::Validation(format!("scenario {s}: negative or non-finite power")));
        }
        for t in 0..sc.steps() {
            for (d, dev) in instance.devices.iter().enumerate() {
                let (pe, pg) = (op.device_e[d][t], op.device_g[d][t]);
                tc[s] += dt * (sc.price_e[t] * pe + instance.gas_price * pg);
                mc[s] += dt * dev.maintenance_rate * (pe + pg);
            }
            for (m, r) in instance.res_options.iter().enumerate() {
                mc[s] += dt * r.maintenance_rate * op.res[m][t];
            }
            for (n, e) in instance.ess_options.iter().enumerate() {
                mc[s] += dt * e.maintenance_rate * (op.charge[n][t] + op.discharge[n][t]);
            }
            for r in 0..3 {
                lc[s] += dt * instance.shed_cost[r] * op.shed[r][t];
            }
        }
    }
    let probs = instance.probs();
    let days = instance.days_per_year;
    let expect = |v: &[f64]| days * v.iter().zip(&probs).map(|(x, p)| x * p).sum::<f64>();
    let (tc_expected, mc_expected, lc_expected) = (expect(&tc), expect(&mc), expect(&lc));
    let losses: Vec<f64> = (0..ns).map(|s| days * (tc[s] + mc[s] + lc[s])).collect();
    let dist = LossDistribution::new(losses, probs.clone())?;
    let oc_expected = dist.mean();
    let var_alpha = empirical_var(&dist, risk.alpha)?;
    let cvar_alpha = cvar(&dist, risk.alpha)?;
    Ok(CostBreakdown {
        ic,
        tc,
        mc,
        lc,
        tc_expected,
        mc_expected,
        lc_expected,
        oc_expected,
        var_alpha,
        cvar_alpha,
        objective: ic + (1.0 - risk.beta) * oc_expected + risk.beta * cvar_alpha,
        alpha: risk.alpha,
        beta: risk.beta,
    })
}
