//! Constraint-by-constraint check of a plan and schedule.
//!
//! Every violation carries the label of the constraint family it breaks,
//! using the same labels as the rows emitted by the MILP builder.

use serde::Serialize;

use crate::model::{DeviceKind, EhInstance, OperationSchedule, PlanDecision, ResKind};

/// Absolute tolerance in MW or MWh.
pub const SCHEDULE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub label: &'static str,
    pub scenario: Option<usize>,
    pub step: Option<usize>,
    /// Amount by which the constraint is exceeded.
    pub residual: f64,
}

struct Report(Vec<Violation>);

impl Report {
    fn le(&mut self, label: &'static str, s: Option<usize>, t: Option<usize>, lhs: f64, rhs: f64) {
        let excess = lhs - rhs;
        if !(excess <= SCHEDULE_TOL) {
            self.0.push(Violation {
                label,
                scenario: s,
                step: t,
                residual: excess,
            });
        }
    }

    fn eq(&mut self, label: &'static str, s: Option<usize>, t: Option<usize>, lhs: f64, rhs: f64) {
        let gap = (lhs - rhs).abs();
        if !(gap <= SCHEDULE_TOL) {
            self.0.push(Violation {
                label,
                scenario: s,
                step: t,
                residual: gap,
            });
        }
    }

    /// `0 <= x <= ub` reported once under one label.
    fn within(&mut self, label: &'static str, s: usize, t: usize, x: f64, ub: f64) {
        let excess = (x - ub).max(-x);
        if !(excess <= SCHEDULE_TOL) {
            self.0.push(Violation {
                label,
                scenario: Some(s),
                step: Some(t),
                residual: excess,
            });
        }
    }
}

fn shape_ok(instance: &EhInstance, plan: &PlanDecision, schedule: &OperationSchedule) -> bool {
    let t = instance.steps();
    let nd = instance.devices.len();
    let nr = instance.res_options.len();
    let nn = instance.ess_options.len();
    let grid = |v: &Vec<Vec<f64>>, n: usize, len: usize| v.len() == n && v.iter().all(|r| r.len() == len);
    plan.u.len() == nd
        && plan.z_res.len() == nr
        && plan.z_ess.len() == nn
        && schedule.scenarios.len() == instance.scenarios.len()
        && schedule.scenarios.iter().all(|sc| {
            grid(&sc.device_e, nd, t)
                && grid(&sc.device_g, nd, t)
                && grid(&sc.eh_output, 3, t)
                && grid(&sc.res, nr, t)
                && grid(&sc.charge, nn, t)
                && grid(&sc.discharge, nn, t)
                && grid(&sc.soc, nn, t + 1)
                && grid(&sc.shed, 3, t)
                && sc.v_ch.len() == nn
                && sc.v_dis.len() == nn
                && sc.v_ch.iter().chain(&sc.v_dis).all(|r| r.len() == t)
        })
}

/// Lists every constraint the pair violates beyond [`SCHEDULE_TOL`].
///
/// A dimension mismatch yields a single violation labelled `shape`.
pub fn validate_schedule(instance: &EhInstance, plan: &PlanDecision, schedule: &OperationSchedule) -> Vec<Violation> {
    if !shape_ok(instance, plan, schedule) {
        return vec![Violation {
            label: "shape",
            scenario: None,
            step: None,
            residual: f64::INFINITY,
        }];
    }
    let mut rep = Report(Vec::new());
    let dt = instance.dt_hours;

    for (kind, label) in [(DeviceKind::Cchp, "13a"), (DeviceKind::Tx, "13b")] {
        let n = instance
            .devices
            .iter()
            .zip(&plan.u)
            .filter(|(d, u)| d.kind == kind && **u)
            .count();
        rep.le(label, None, None, 1.0, n as f64);
    }
    for (m, r) in instance.res_options.iter().enumerate() {
        rep.le("14", None, None, plan.z_res[m] as f64, r.max_modules as f64);
    }
    for (n, e) in instance.ess_options.iter().enumerate() {
        rep.le("14", None, None, plan.z_ess[n] as f64, e.max_modules as f64);
    }
    let res_cap: f64 = instance
        .res_options
        .iter()
        .zip(&plan.z_res)
        .map(|(r, z)| r.rated_power * *z as f64)
        .sum();
    let conv_cap: f64 = instance
        .devices
        .iter()
        .zip(&plan.u)
        .filter(|(_, u)| **u)
        .map(|(d, _)| d.max_input_e)
        .sum();
    rep.le(
        "29",
        None,
        None,
        res_cap,
        instance.res_penetration_cap * (conv_cap + res_cap),
    );

    for (s, (op, sc)) in schedule.scenarios.iter().zip(&instance.scenarios).enumerate() {
        let steps = sc.steps();
        for t in 0..steps {
            let (ss, tt) = (Some(s), Some(t));
            for (d, dev) in instance.devices.iter().enumerate() {
                let on = if plan.u[d] { 1.0 } else { 0.0 };
                rep.within("26", s, t, op.device_e[d][t], on * dev.max_input_e);
                rep.within("27", s, t, op.device_g[d][t], on * dev.max_input_g);
            }
            for r in 0..3 {
                let out: f64 = instance
                    .devices
                    .iter()
                    .enumerate()
                    .map(|(d, dev)| dev.coupling[r][0] * op.device_e[d][t] + dev.coupling[r][1] * op.device_g[d][t])
                    .sum();
                rep.eq("25", ss, tt, op.eh_output[r][t], out);
            }
            for (m, r) in instance.res_options.iter().enumerate() {
                let label = match r.kind() {
                    ResKind::Wt => "15",
                    ResKind::Pv => "17",
                };
                let avail = r.available(sc, t).unwrap_or(0.0);
                rep.within(label, s, t, op.res[m][t], plan.z_res[m] as f64 * avail);
            }
            for (n, e) in instance.ess_options.iter().enumerate() {
                let (vc, vd) = (op.v_ch[n][t], op.v_dis[n][t]);
                if vc && vd {
                    rep.0.push(Violation {
                        label: "19",
                        scenario: ss,
                        step: tt,
                        residual: 1.0,
                    });
                }
                let z = plan.z_ess[n] as f64;
                let (ch, dis) = (op.charge[n][t], op.discharge[n][t]);
                rep.within("20a", s, t, ch, if vc { e.big_m_charge() } else { 0.0 });
                rep.le("20b", ss, tt, ch, z * e.max_charge_power);
                rep.within("21a", s, t, dis, if vd { e.big_m_discharge() } else { 0.0 });
                rep.le("21b", ss, tt, dis, z * e.max_discharge_power);
                let next = op.soc[n][t] + (ch * e.eta_ch - dis / e.eta_dis) * dt;
                rep.eq("23", ss, tt, op.soc[n][t + 1], next);
            }
            for (r, carrier) in crate::model::Carrier::ALL.iter().enumerate() {
                let load = sc.load(*carrier)[t];
                rep.within("28", s, t, op.shed[r][t], load);
                let mut supply = op.eh_output[r][t] + op.shed[r][t];
                if r == 0 {
                    supply += op.res.iter().map(|p| p[t]).sum::<f64>();
                }
                for (n, e) in instance.ess_options.iter().enumerate() {
                    if e.kind.carrier().index() == r {
                        supply += op.discharge[n][t] - op.charge[n][t];
                    }
                }
                match r {
                    0 => rep.eq("30", ss, tt, supply, load),
                    1 => rep.le("31", ss, tt, load, supply),
                    _ => rep.le("32", ss, tt, load, supply),
                }
            }
        }
        for (n, e) in instance.ess_options.iter().enumerate() {
            for t in 0..=steps {
                rep.within("22", s, t, op.soc[n][t], plan.z_ess[n] as f64 * e.energy_per_module);
            }
            rep.eq("24", Some(s), None, op.soc[n][0], op.soc[n][steps]);
        }
    }
    rep.0
}
