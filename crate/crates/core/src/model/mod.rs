//! Energy hub domain types and the planning MILP built from them.
//!
//! An [`EhInstance`] holds the candidate converters, renewable and storage
//! modules, the tariff and penalty parameters and a set of daily
//! [`Scenario`]s. [`build_milp`] turns it into a [`MilpProblem`];
//! [`evaluate_costs`] and [`validate_schedule`] score and check a plan
//! independently of any solver.
//!
//! Money is carried in RMB. Per-scenario cost components are daily;
//! expected operation cost, VaR and CVaR are annualised by
//! [`EhInstance::days_per_year`] so that they are commensurate with the
//! annualised investment cost.

mod catalog;
mod costs;
mod formulation;
mod physics;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use catalog::{default_catalog, CasePreset, Catalog, MarketParams};
pub use costs::{evaluate_costs, investment_cost, CostBreakdown};
pub(crate) use formulation::{add_plan_block, add_plan_copies, add_scenario_block, investment_expr, ScenarioHandles};
pub use formulation::{build_milp, census, Census, EhMilp};
pub use physics::{annualization_coefficient, pv_power_max, wind_power_max};
pub use validate::{validate_schedule, Violation, SCHEDULE_TOL};

/// Energy carriers at the hub outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Carrier {
    Electricity,
    Heat,
    Cooling,
}

impl Carrier {
    pub const ALL: [Carrier; 3] = [Carrier::Electricity, Carrier::Heat, Carrier::Cooling];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn short(self) -> &'static str {
        match self {
            Carrier::Electricity => "e",
            Carrier::Heat => "h",
            Carrier::Cooling => "c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DeviceKind {
    #[serde(rename = "CCHP")]
    Cchp,
    #[serde(rename = "GB")]
    Gb,
    #[serde(rename = "AC")]
    Ac,
    #[serde(rename = "TX")]
    Tx,
}

impl DeviceKind {
    pub const ALL: [DeviceKind; 4] = [DeviceKind::Cchp, DeviceKind::Gb, DeviceKind::Ac, DeviceKind::Tx];
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeviceKind::Cchp => "CCHP",
            DeviceKind::Gb => "GB",
            DeviceKind::Ac => "AC",
            DeviceKind::Tx => "TX",
        })
    }
}

/// One candidate converter at one capacity.
///
/// `coupling[r][k]` maps input carrier `k` (0 = electricity, 1 = gas) to
/// output carrier `r` (electricity, heat, cooling).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceOption {
    pub kind: DeviceKind,
    pub capacity_id: String,
    pub capacity_mw: f64,
    /// RMB per MW of `capacity_mw`.
    pub invest_cost_per_mw: f64,
    /// RMB per MWh of input throughput.
    pub maintenance_rate: f64,
    pub lifetime_years: f64,
    pub max_input_e: f64,
    pub max_input_g: f64,
    pub coupling: [[f64; 2]; 3],
}

impl DeviceOption {
    pub fn investment(&self) -> f64 {
        self.invest_cost_per_mw * self.capacity_mw
    }

    pub fn max_input(&self, input: usize) -> f64 {
        if input == 0 {
            self.max_input_e
        } else {
            self.max_input_g
        }
    }

    pub fn validate(&self) -> Result<()> {
        let id = format!("{} {}", self.kind, self.capacity_id);
        for row in &self.coupling {
            for &c in row {
                if !(0.0..=2.0).contains(&c) {
                    return Err(Error::Validation(format!("{id}: coupling entry {c} outside [0, 2]")));
                }
            }
        }
        if self.invest_cost_per_mw < 0.0 || self.maintenance_rate < 0.0 {
            return Err(Error::Validation(format!("{id}: negative cost")));
        }
        if !(self.lifetime_years >= 1.0) {
            return Err(Error::Validation(format!("{id}: lifetime below one year")));
        }
        if !(self.max_input_e >= 0.0 && self.max_input_g >= 0.0 && self.capacity_mw >= 0.0) {
            return Err(Error::Validation(format!("{id}: negative capacity")));
        }
        let unused = match self.kind {
            DeviceKind::Gb => Some(0),
            DeviceKind::Ac => Some(1),
            _ => None,
        };
        if let Some(k) = unused {
            if self.max_input(k) != 0.0 || self.coupling.iter().any(|row| row[k] != 0.0) {
                return Err(Error::Validation(format!(
                    "{id}: single-carrier device uses its unused input column"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResKind {
    #[serde(rename = "WT")]
    Wt,
    #[serde(rename = "PV")]
    Pv,
}

impl fmt::Display for ResKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResKind::Wt => "WT",
            ResKind::Pv => "PV",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindParams {
    pub cut_in: f64,
    pub rated_speed: f64,
    pub cut_out: f64,
    /// m²
    pub swept_area: f64,
    pub conversion_eff: f64,
    /// kg/m³
    pub air_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvParams {
    /// m² per module
    pub panel_area: f64,
    pub panel_eff: f64,
    pub mppt_eff: f64,
    pub tilt_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ResTech {
    #[serde(rename = "WT")]
    Wind(WindParams),
    #[serde(rename = "PV")]
    Pv(PvParams),
}

/// A renewable module sized in integer counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResModuleSpec {
    pub id: String,
    pub tech: ResTech,
    /// RMB per module.
    pub invest_cost: f64,
    /// RMB per MWh generated.
    pub maintenance_rate: f64,
    /// MW per module, used by the penetration cap.
    pub rated_power: f64,
    pub lifetime_years: f64,
    pub max_modules: u32,
}

impl ResModuleSpec {
    /// Wind module with its rated power taken from the power curve; costs zero.
    pub fn wind(id: impl Into<String>, params: WindParams) -> Self {
        let rated =
            0.5 * params.air_density * params.rated_speed.powi(3) * params.swept_area * params.conversion_eff * 1e-6;
        Self {
            id: id.into(),
            tech: ResTech::Wind(params),
            invest_cost: 0.0,
            maintenance_rate: 0.0,
            rated_power: rated,
            lifetime_years: 20.0,
            max_modules: 100,
        }
    }

    /// PV module rated at 1000 W/m²; costs zero.
    pub fn pv(id: impl Into<String>, params: PvParams) -> Self {
        let rated =
            1000.0 * params.tilt_deg.to_radians().cos() * params.panel_area * params.mppt_eff * params.panel_eff * 1e-6;
        Self {
            id: id.into(),
            tech: ResTech::Pv(params),
            invest_cost: 0.0,
            maintenance_rate: 0.0,
            rated_power: rated.max(0.0),
            lifetime_years: 20.0,
            max_modules: 100,
        }
    }

    pub fn kind(&self) -> ResKind {
        match self.tech {
            ResTech::Wind(_) => ResKind::Wt,
            ResTech::Pv(_) => ResKind::Pv,
        }
    }

    /// Available output per module in one step of a scenario, MW.
    pub fn available(&self, scenario: &Scenario, t: usize) -> Result<f64> {
        match self.tech {
            ResTech::Wind(_) => wind_power_max(self, scenario.wind_speed[t]),
            ResTech::Pv(_) => pv_power_max(self, scenario.irradiance[t]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let id = &self.id;
        if self.invest_cost < 0.0 || self.maintenance_rate < 0.0 || self.rated_power < 0.0 {
            return Err(Error::Validation(format!("{id}: negative cost or rating")));
        }
        if !(self.lifetime_years >= 1.0) {
            return Err(Error::Validation(format!("{id}: lifetime below one year")));
        }
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        match &self.tech {
            ResTech::Wind(w) => {
                if !(0.0 < w.cut_in && w.cut_in < w.rated_speed && w.rated_speed < w.cut_out) {
                    return Err(Error::Validation(format!("{id}: need 0 < cut-in < rated < cut-out")));
                }
                if !unit(w.conversion_eff) || !(w.swept_area > 0.0) || !(w.air_density > 0.0) {
                    return Err(Error::Validation(format!("{id}: invalid turbine parameters")));
                }
            }
            ResTech::Pv(p) => {
                if !unit(p.panel_eff) || !unit(p.mppt_eff) || !(p.panel_area > 0.0) {
                    return Err(Error::Validation(format!("{id}: invalid panel parameters")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EssKind {
    #[serde(rename = "BESS")]
    Bess,
    #[serde(rename = "HESS")]
    Hess,
    #[serde(rename = "CESS")]
    Cess,
}

impl EssKind {
    pub fn carrier(self) -> Carrier {
        match self {
            EssKind::Bess => Carrier::Electricity,
            EssKind::Hess => Carrier::Heat,
            EssKind::Cess => Carrier::Cooling,
        }
    }
}

impl fmt::Display for EssKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EssKind::Bess => "BESS",
            EssKind::Hess => "HESS",
            EssKind::Cess => "CESS",
        })
    }
}

/// A storage module sized in integer counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssModuleSpec {
    pub kind: EssKind,
    pub id: String,
    /// MWh per module.
    pub energy_per_module: f64,
    /// MW per module.
    pub max_charge_power: f64,
    pub max_discharge_power: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    /// RMB per module.
    pub invest_cost: f64,
    /// RMB per MWh of charge plus discharge.
    pub maintenance_rate: f64,
    pub lifetime_years: f64,
    pub max_modules: u32,
}

impl EssModuleSpec {
    /// Module with charge and discharge limits at half the energy per hour.
    pub fn new(kind: EssKind, id: impl Into<String>, energy_per_module: f64, eta_ch: f64, eta_dis: f64) -> Self {
        Self {
            kind,
            id: id.into(),
            energy_per_module,
            max_charge_power: 0.5 * energy_per_module,
            max_discharge_power: 0.5 * energy_per_module,
            eta_ch,
            eta_dis,
            invest_cost: 0.0,
            maintenance_rate: 0.0,
            lifetime_years: 10.0,
            max_modules: 100,
        }
    }

    /// Tightest valid big-M for the charge flag.
    pub fn big_m_charge(&self) -> f64 {
        self.max_modules as f64 * self.max_charge_power
    }

    pub fn big_m_discharge(&self) -> f64 {
        self.max_modules as f64 * self.max_discharge_power
    }

    pub fn validate(&self) -> Result<()> {
        let id = &self.id;
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(self.eta_ch) || !unit(self.eta_dis) {
            return Err(Error::Validation(format!("{id}: efficiencies must lie in (0, 1]")));
        }
        if !(self.energy_per_module > 0.0 && self.max_charge_power >= 0.0 && self.max_discharge_power >= 0.0) {
            return Err(Error::Validation(format!("{id}: invalid module ratings")));
        }
        if self.invest_cost < 0.0 || self.maintenance_rate < 0.0 || !(self.lifetime_years >= 1.0) {
            return Err(Error::Validation(format!("{id}: invalid cost or lifetime")));
        }
        Ok(())
    }
}

/// One typical day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub prob: f64,
    pub load_e: Vec<f64>,
    pub load_h: Vec<f64>,
    pub load_c: Vec<f64>,
    pub wind_speed: Vec<f64>,
    pub irradiance: Vec<f64>,
    /// RMB/MWh
    pub price_e: Vec<f64>,
}

impl Scenario {
    pub fn steps(&self) -> usize {
        self.load_e.len()
    }

    pub fn load(&self, carrier: Carrier) -> &[f64] {
        match carrier {
            Carrier::Electricity => &self.load_e,
            Carrier::Heat => &self.load_h,
            Carrier::Cooling => &self.load_c,
        }
    }

    /// Same value at every step for every channel; handy in tests.
    pub fn flat(prob: f64, steps: usize, loads: [f64; 3], wind: f64, irradiance: f64, price: f64) -> Self {
        Self {
            prob,
            load_e: vec![loads[0]; steps],
            load_h: vec![loads[1]; steps],
            load_c: vec![loads[2]; steps],
            wind_speed: vec![wind; steps],
            irradiance: vec![irradiance; steps],
            price_e: vec![price; steps],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.steps();
        if n == 0 {
            return Err(Error::Validation("scenario without steps".into()));
        }
        let series = [
            &self.load_h,
            &self.load_c,
            &self.wind_speed,
            &self.irradiance,
            &self.price_e,
        ];
        if series.iter().any(|s| s.len() != n) {
            return Err(Error::Validation("scenario series differ in length".into()));
        }
        if !(self.prob > 0.0 && self.prob <= 1.0) {
            return Err(Error::Validation(format!(
                "scenario probability {} outside (0, 1]",
                self.prob
            )));
        }
        let bad = |s: &[f64]| s.iter().any(|x| !(*x >= 0.0) || !x.is_finite());
        if bad(&self.load_e) || bad(&self.load_h) || bad(&self.load_c) || bad(&self.irradiance) || bad(&self.wind_speed)
        {
            return Err(Error::Validation(
                "negative or non-finite load, wind or irradiance".into(),
            ));
        }
        if self.price_e.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("non-finite price".into()));
        }
        Ok(())
    }
}

/// The complete planning problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EhInstance {
    pub devices: Vec<DeviceOption>,
    pub res_options: Vec<ResModuleSpec>,
    pub ess_options: Vec<EssModuleSpec>,
    pub scenarios: Vec<Scenario>,
    /// RMB per MWh of gas input.
    pub gas_price: f64,
    /// Shedding penalties (e, h, c), RMB per MWh.
    pub shed_cost: [f64; 3],
    pub res_penetration_cap: f64,
    pub discount_rate: f64,
    pub dt_hours: f64,
    /// Days of operation each unit of scenario probability stands for.
    pub days_per_year: f64,
}

impl EhInstance {
    pub fn steps(&self) -> usize {
        self.scenarios.first().map(Scenario::steps).unwrap_or(0)
    }

    pub fn probs(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.prob).collect()
    }

    /// Checks every invariant except the presence of CCHP and TX candidates.
    pub fn validate_data(&self) -> Result<()> {
        for d in &self.devices {
            d.validate()?;
        }
        for r in &self.res_options {
            r.validate()?;
        }
        for e in &self.ess_options {
            e.validate()?;
        }
        if self.scenarios.is_empty() {
            return Err(Error::Validation("instance has no scenarios".into()));
        }
        let steps = self.steps();
        for s in &self.scenarios {
            s.validate()?;
            if s.steps() != steps {
                return Err(Error::Validation("scenarios differ in step count".into()));
            }
        }
        let total: f64 = self.scenarios.iter().map(|s| s.prob).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("scenario probabilities sum to {total}")));
        }
        if !(0.0..=1.0).contains(&self.res_penetration_cap) {
            return Err(Error::Validation("penetration cap outside [0, 1]".into()));
        }
        if !(self.discount_rate > 0.0 && self.discount_rate < 1.0) {
            return Err(Error::Validation("discount rate outside (0, 1)".into()));
        }
        if !(self.dt_hours > 0.0) || !(self.days_per_year > 0.0) {
            return Err(Error::Validation("time step and days per year must be positive".into()));
        }
        if self.gas_price < 0.0 || self.shed_cost.iter().any(|c| *c < 0.0) {
            return Err(Error::Validation("negative gas price or shedding cost".into()));
        }
        Ok(())
    }

    /// Full invariant check used before building a monolithic model.
    pub fn validate(&self) -> Result<()> {
        self.validate_data()?;
        for kind in [DeviceKind::Cchp, DeviceKind::Tx] {
            if !self.devices.iter().any(|d| d.kind == kind) {
                return Err(Error::InfeasibleByConstruction(format!("no {kind} candidate")));
            }
        }
        Ok(())
    }

    pub fn device_k(&self, d: usize) -> Result<f64> {
        annualization_coefficient(self.discount_rate, self.devices[d].lifetime_years)
    }

    pub fn res_k(&self, m: usize) -> Result<f64> {
        annualization_coefficient(self.discount_rate, self.res_options[m].lifetime_years)
    }

    pub fn ess_k(&self, n: usize) -> Result<f64> {
        annualization_coefficient(self.discount_rate, self.ess_options[n].lifetime_years)
    }
}

/// First-stage decision, aligned with the instance option lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDecision {
    pub u: Vec<bool>,
    pub z_res: Vec<u32>,
    pub z_ess: Vec<u32>,
}

impl PlanDecision {
    pub fn empty(instance: &EhInstance) -> Self {
        Self {
            u: vec![false; instance.devices.len()],
            z_res: vec![0; instance.res_options.len()],
            z_ess: vec![0; instance.ess_options.len()],
        }
    }

    /// Values in link order: u, then RES counts, then ESS counts.
    pub fn to_values(&self) -> Vec<f64> {
        self.u
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .chain(self.z_res.iter().map(|&z| z as f64))
            .chain(self.z_ess.iter().map(|&z| z as f64))
            .collect()
    }

    pub fn from_values(instance: &EhInstance, values: &[f64]) -> Self {
        let nd = instance.devices.len();
        let nr = instance.res_options.len();
        Self {
            u: values[..nd].iter().map(|v| *v > 0.5).collect(),
            z_res: values[nd..nd + nr].iter().map(|v| v.round().max(0.0) as u32).collect(),
            z_ess: values[nd + nr..].iter().map(|v| v.round().max(0.0) as u32).collect(),
        }
    }
}

/// Operation of one scenario. Outer index is the option (or carrier),
/// inner index the time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSchedule {
    pub device_e: Vec<Vec<f64>>,
    pub device_g: Vec<Vec<f64>>,
    /// Hub output per carrier (e, h, c) through the coupling matrices.
    pub eh_output: Vec<Vec<f64>>,
    pub res: Vec<Vec<f64>>,
    pub charge: Vec<Vec<f64>>,
    pub discharge: Vec<Vec<f64>>,
    /// State of charge at step boundaries `0..=T`.
    pub soc: Vec<Vec<f64>>,
    pub v_ch: Vec<Vec<bool>>,
    pub v_dis: Vec<Vec<bool>>,
    /// Shed load per carrier (e, h, c).
    pub shed: Vec<Vec<f64>>,
}

impl ScenarioSchedule {
    pub fn zeros(instance: &EhInstance) -> Self {
        let t = instance.steps();
        let nd = instance.devices.len();
        let nr = instance.res_options.len();
        let nn = instance.ess_options.len();
        Self {
            device_e: vec![vec![0.0; t]; nd],
            device_g: vec![vec![0.0; t]; nd],
            eh_output: vec![vec![0.0; t]; 3],
            res: vec![vec![0.0; t]; nr],
            charge: vec![vec![0.0; t]; nn],
            discharge: vec![vec![0.0; t]; nn],
            soc: vec![vec![0.0; t + 1]; nn],
            v_ch: vec![vec![false; t]; nn],
            v_dis: vec![vec![false; t]; nn],
            shed: vec![vec![0.0; t]; 3],
        }
    }

    /// Recomputes hub outputs from device inputs.
    pub fn refresh_outputs(&mut self, instance: &EhInstance) {
        for r in 0..3 {
            for t in 0..self.eh_output[r].len() {
                self.eh_output[r][t] = instance
                    .devices
                    .iter()
                    .enumerate()
                    .map(|(d, dev)| dev.coupling[r][0] * self.device_e[d][t] + dev.coupling[r][1] * self.device_g[d][t])
                    .sum();
            }
        }
    }

    /// Grid electricity bought at each step, MW.
    pub fn grid_purchase(&self, t: usize) -> f64 {
        self.device_e.iter().map(|p| p[t]).sum()
    }
}

/// Second-stage outcome for every scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationSchedule {
    pub scenarios: Vec<ScenarioSchedule>,
}

impl OperationSchedule {
    pub fn zeros(instance: &EhInstance) -> Self {
        Self {
            scenarios: (0..instance.scenarios.len())
                .map(|_| ScenarioSchedule::zeros(instance))
                .collect(),
        }
    }
}
