//! CSV and JSON artifacts. Money columns are in 10⁴ RMB with two decimals.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Carrier, CostBreakdown, EhInstance, OperationSchedule, PlanDecision, ResTech};
use crate::risk::RiskConfig;
use crate::scenarios::{DeviationReport, ScenarioSet};

use super::config::RunConfig;

/// RMB to the reporting unit, two decimals.
pub fn money(rmb: f64) -> String {
    format!("{:.2}", rmb / 1e4)
}

/// Collects the names of files written under one directory.
#[derive(Debug)]
pub struct OutputDir {
    pub root: PathBuf,
    pub files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn sub(&self, name: &str) -> Result<OutputDir> {
        OutputDir::create(&self.root.join(name))
    }

    /// Opens `name` for writing and records it.
    pub fn file(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.root.join(name))?))
    }

    pub fn adopt(&mut self, prefix: &str, child: OutputDir) {
        self.files
            .extend(child.files.into_iter().map(|f| format!("{prefix}/{f}")));
    }
}

pub const COST_HEADER: &str = "ic,tc,mc,lc,oc,var,cvar,objective";

pub fn cost_fields(c: &CostBreakdown) -> String {
    [
        c.ic,
        c.tc_expected,
        c.mc_expected,
        c.lc_expected,
        c.oc_expected,
        c.var_alpha,
        c.cvar_alpha,
        c.objective,
    ]
    .iter()
    .map(|v| money(*v))
    .collect::<Vec<_>>()
    .join(",")
}

pub fn write_costs(out: &mut OutputDir, label: &str, c: &CostBreakdown) -> Result<()> {
    let mut w = out.file("costs.csv")?;
    writeln!(w, "label,alpha,beta,{COST_HEADER}")?;
    writeln!(w, "{label},{},{},{}", c.alpha, c.beta, cost_fields(c))?;
    w.flush()?;
    Ok(())
}

/// One row per option: chosen units and the installed size they amount to.
/// PV is sized by panel area, storage by energy, everything else by power.
pub fn write_plan(out: &mut OutputDir, inst: &EhInstance, plan: &PlanDecision) -> Result<()> {
    let mut w = out.file("plan.csv")?;
    writeln!(w, "kind,option,units,size,size_unit")?;
    for (d, dev) in inst.devices.iter().enumerate() {
        let u = u8::from(plan.u[d]);
        writeln!(
            w,
            "{},{},{u},{},MW",
            dev.kind,
            dev.capacity_id,
            f64::from(u) * dev.capacity_mw
        )?;
    }
    for (m, r) in inst.res_options.iter().enumerate() {
        let z = plan.z_res[m];
        let (size, unit) = match &r.tech {
            ResTech::Pv(p) => (f64::from(z) * p.panel_area, "m2"),
            ResTech::Wind(_) => (f64::from(z) * r.rated_power, "MW"),
        };
        writeln!(w, "{},{},{z},{size},{unit}", r.kind(), r.id)?;
    }
    for (n, e) in inst.ess_options.iter().enumerate() {
        let z = plan.z_ess[n];
        writeln!(w, "{},{},{z},{},MWh", e.kind, e.id, f64::from(z) * e.energy_per_module)?;
    }
    w.flush()?;
    Ok(())
}

/// Probability-weighted hourly shedding per carrier, MW.
pub fn expected_shedding(inst: &EhInstance, sched: &OperationSchedule) -> Vec<[f64; 3]> {
    let mut out = vec![[0.0; 3]; inst.steps()];
    for (sc, s) in sched.scenarios.iter().zip(&inst.scenarios) {
        for (t, row) in out.iter_mut().enumerate() {
            for r in Carrier::ALL {
                row[r.index()] += s.prob * sc.shed[r.index()][t];
            }
        }
    }
    out
}

/// Probability-weighted hourly grid purchase and gas use, MW.
pub fn expected_trading(inst: &EhInstance, sched: &OperationSchedule) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0; 2]; inst.steps()];
    for (sc, s) in sched.scenarios.iter().zip(&inst.scenarios) {
        for (t, row) in out.iter_mut().enumerate() {
            row[0] += s.prob * sc.grid_purchase(t);
            row[1] += s.prob * sc.device_g.iter().map(|g| g[t]).sum::<f64>();
        }
    }
    out
}

pub fn write_shedding(out: &mut OutputDir, inst: &EhInstance, sched: &OperationSchedule) -> Result<()> {
    let mut w = out.file("shedding.csv")?;
    writeln!(w, "hour,shed_e_mw,shed_h_mw,shed_c_mw")?;
    for (t, r) in expected_shedding(inst, sched).iter().enumerate() {
        writeln!(w, "{t},{:.4},{:.4},{:.4}", r[0], r[1], r[2])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trading(out: &mut OutputDir, inst: &EhInstance, sched: &OperationSchedule) -> Result<()> {
    let mut w = out.file("trading.csv")?;
    writeln!(w, "hour,grid_mw,gas_mw")?;
    for (t, r) in expected_trading(inst, sched).iter().enumerate() {
        writeln!(w, "{t},{:.4},{:.4}", r[0], r[1])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scenarios(out: &mut OutputDir, name: &str, set: &ScenarioSet) -> Result<()> {
    let mut w = out.file(name)?;
    writeln!(
        w,
        "scenario,origin,prob,hour,load_e_mw,load_h_mw,load_c_mw,wind_mps,irradiance_wpm2,price_e_rmb_per_mwh"
    )?;
    for (i, (s, o)) in set.scenarios.iter().zip(&set.origin).enumerate() {
        for t in 0..s.steps() {
            writeln!(
                w,
                "{i},{o},{},{t},{},{},{},{},{},{}",
                s.prob, s.load_e[t], s.load_h[t], s.load_c[t], s.wind_speed[t], s.irradiance[t], s.price_e[t]
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub const DEVIATION_HEADER: &str = "ic,tc,mc,lc,cvar,total";

pub fn deviation_fields(d: &DeviationReport) -> String {
    d.entries()
        .iter()
        .map(|(_, v)| DeviationReport::format(*v))
        .collect::<Vec<_>>()
        .join(",")
}

/// Everything needed to audit a solve without re-running it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub instance: EhInstance,
    pub risk: RiskConfig,
    pub plan: PlanDecision,
    pub schedule: OperationSchedule,
}

impl SolutionFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| crate::error::Error::data(Some(e.line()), e.to_string()))
    }
}

pub fn write_json<T: Serialize>(out: &mut OutputDir, name: &str, value: &T) -> Result<()> {
    let mut w = out.file(name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Run description sufficient to regenerate every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub backend: String,
    pub config: RunConfig,
    pub synth_seed: Option<u64>,
    pub reduction_seed: u64,
    pub files: Vec<String>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            backend: "highs".into(),
            config: config.clone(),
            synth_seed: config.year_path.is_none().then_some(config.synth_seed),
            reduction_seed: config.reduction_seed,
            files: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| crate::error::Error::Config(format!("manifest: {e}")))
    }

    /// Writes `manifest.json` listing every file recorded in `out`.
    pub fn write(mut self, out: &mut OutputDir) -> Result<()> {
        self.files = out.files.clone();
        self.files.push("manifest.json".into());
        write_json(out, "manifest.json", &self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn money_unit_and_rounding() {
        assert_eq!(money(123_456.0), "12.35");
        assert_eq!(money(0.0), "0.00");
        assert_eq!(money(-5_000.0), "-0.50");
    }
}
