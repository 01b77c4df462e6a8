//! Pipelines behind the CLI verbs.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_milp, evaluate_costs, validate_schedule, CasePreset, CostBreakdown, EhInstance, Violation};
use crate::risk::RiskConfig;
use crate::scenarios::{
    backward_reduce, deviation_report, kmeans_reduce, slice_days, FeatureOptions, ReductionTrace, ScenarioSet,
    YearSeries,
};
use crate::solve::{
    benders_solve, brute_force_oracle, relaxation_audit, solve_monolithic, AuditFlag, BendersLog, HighsBackend,
    PlanSolution, SolveStatus,
};

use super::config::{ReductionMethod, RunConfig, SolveMethod};
use super::report::{
    cost_fields, deviation_fields, expected_shedding, expected_trading, write_costs, write_json, write_plan,
    write_scenarios, write_shedding, write_trading, Manifest, OutputDir, SolutionFile, COST_HEADER, DEVIATION_HEADER,
};
use super::synth::synth_year_with;

/// Reads and validates a year CSV.
pub fn ingest_year(path: &Path, steps_per_day: usize) -> Result<YearSeries> {
    YearSeries::read_csv(path, steps_per_day)
}

/// The configured year: the file if one is given, otherwise synthetic.
pub fn load_year(cfg: &RunConfig) -> Result<YearSeries> {
    match &cfg.year_path {
        Some(p) => ingest_year(p, cfg.steps_per_day),
        None => {
            let year = synth_year_with(cfg.synth_seed, &cfg.synth_profile()?);
            year.validate(cfg.steps_per_day)?;
            Ok(year)
        }
    }
}

/// Reduces `full` to `target` scenarios; targets at or above the set size
/// return the set unchanged.
pub fn reduce_set(
    full: &ScenarioSet,
    method: ReductionMethod,
    target: usize,
    seed: u64,
    opts: FeatureOptions,
) -> Result<(ScenarioSet, Option<ReductionTrace>)> {
    if method == ReductionMethod::None || target >= full.len() {
        return Ok((full.clone(), None));
    }
    match method {
        ReductionMethod::Backward => {
            let (set, trace) = backward_reduce(full, target, opts)?;
            Ok((set, Some(trace)))
        }
        ReductionMethod::Kmeans => Ok((kmeans_reduce(full, target, seed, opts)?, None)),
        ReductionMethod::None => unreachable!(),
    }
}

pub fn build_instance(cfg: &RunConfig, case: CasePreset, set: &ScenarioSet) -> Result<EhInstance> {
    let inst = cfg.catalog(case)?.instance(set.scenarios.clone(), &cfg.market()?);
    inst.validate_data()?;
    Ok(inst)
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: PlanSolution,
    pub benders_log: Option<BendersLog>,
    pub seconds: f64,
}

pub fn solve_instance(inst: &EhInstance, risk: RiskConfig, cfg: &RunConfig) -> Result<SolveOutcome> {
    let t0 = Instant::now();
    let backend = HighsBackend;
    let (solution, benders_log) = match cfg.solve_method {
        SolveMethod::Monolithic => (solve_monolithic(inst, risk, &cfg.solve_options(), &backend)?, None),
        SolveMethod::Benders => {
            let (s, log) = benders_solve(inst, risk, &cfg.benders_options(), &backend)?;
            (s, Some(log))
        }
        SolveMethod::Oracle => match brute_force_oracle(inst, risk) {
            Ok(o) => {
                let costs = evaluate_costs(inst, &o.plan, &o.schedule, risk)?;
                let zeta = Some(costs.var_alpha);
                let sol = PlanSolution {
                    status: SolveStatus::OptimalWithinGap,
                    plan: Some(o.plan),
                    schedule: Some(o.schedule),
                    costs: Some(costs),
                    gap: Some(0.0),
                    solver_objective: Some(o.objective),
                    zeta,
                    hint: None,
                };
                (sol, None)
            }
            Err(Error::InfeasibleByConstruction(m)) => (PlanSolution::infeasible(m), None),
            Err(e) => return Err(e),
        },
    };
    Ok(SolveOutcome {
        solution,
        benders_log,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Year, its daily scenarios and the reduced set used for solving.
pub struct Prepared {
    pub full: ScenarioSet,
    pub reduced: ScenarioSet,
    pub trace: Option<ReductionTrace>,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let year = load_year(cfg)?;
    let full = slice_days(&year, cfg.steps_per_day)?;
    let (reduced, trace) = reduce_set(
        &full,
        cfg.reduction_method,
        cfg.reduction_target,
        cfg.reduction_seed,
        cfg.feature_options(),
    )?;
    Ok(Prepared { full, reduced, trace })
}

/// Writes the artifacts of one solve into `out`. Returns the costs when a
/// plan was found.
fn emit_solution(
    out: &mut OutputDir,
    label: &str,
    inst: &EhInstance,
    risk: RiskConfig,
    outcome: &SolveOutcome,
) -> Result<Option<CostBreakdown>> {
    if let Some(log) = &outcome.benders_log {
        log.write_csv(out.file("benders_log.csv")?)?;
    }
    let sol = &outcome.solution;
    let (Some(plan), Some(schedule), Some(costs)) = (&sol.plan, &sol.schedule, &sol.costs) else {
        let mut w = out.file("status.txt")?;
        writeln!(w, "{:?}: {}", sol.status, sol.hint.as_deref().unwrap_or(""))?;
        return Ok(None);
    };
    write_costs(out, label, costs)?;
    write_plan(out, inst, plan)?;
    write_shedding(out, inst, schedule)?;
    write_trading(out, inst, schedule)?;
    write_json(
        out,
        "solution.json",
        &SolutionFile {
            instance: inst.clone(),
            risk,
            plan: plan.clone(),
            schedule: schedule.clone(),
        },
    )?;
    Ok(Some(costs.clone()))
}

/// Outcome of a verb, mapped to an exit status by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    Ok,
    /// No feasible plan; carries the hint.
    Infeasible(String),
    /// Audit found violations or simultaneous storage flow.
    AuditFailed(usize),
}

/// Writes the monolithic model of the configured case in LP text format.
pub fn dump_lp(cfg: &RunConfig, path: &Path) -> Result<()> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let inst = build_instance(cfg, cfg.case, &prep.reduced)?;
    let milp = build_milp(&inst, cfg.risk()?)?;
    std::fs::write(path, milp.problem.to_lp_format())?;
    Ok(())
}

/// Single solve of the configured case.
pub fn run_plan(cfg: &RunConfig) -> Result<(RunStatus, Option<CostBreakdown>)> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let inst = build_instance(cfg, cfg.case, &prep.reduced)?;
    let risk = cfg.risk()?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    write_scenarios(&mut out, "scenarios.csv", &prep.reduced)?;
    if let Some(trace) = &prep.trace {
        trace.write_csv(out.file("reduction_trace.csv")?)?;
    }
    let outcome = solve_instance(&inst, risk, cfg)?;
    log::info!(
        "solved {} in {:.1} s, zeta* = {:?}",
        cfg.case.name(),
        outcome.seconds,
        outcome.solution.zeta
    );
    let costs = emit_solution(&mut out, cfg.case.name(), &inst, risk, &outcome)?;
    let mut manifest = Manifest::new("plan", cfg);
    if let Some(h) = &outcome.solution.hint {
        manifest.notes.push(h.clone());
    }
    manifest.write(&mut out)?;
    let status = match costs {
        Some(_) => RunStatus::Ok,
        None => RunStatus::Infeasible(outcome.solution.hint.clone().unwrap_or_default()),
    };
    Ok((status, costs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// α × β grid.
    Risk,
    /// The four coupling cases.
    Cases,
    /// Scenario-count ladder against the full year.
    Ladder,
}

/// One sweep cell; `costs` is `None` when the cell failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub label: String,
    pub alpha: f64,
    pub beta: f64,
    pub costs: Option<CostBreakdown>,
    pub error: Option<String>,
    pub seconds: f64,
}

fn run_cell(out: &mut OutputDir, label: &str, inst: &EhInstance, risk: RiskConfig, cfg: &RunConfig) -> CellResult {
    let t0 = Instant::now();
    let res = (|| -> Result<(Option<CostBreakdown>, Option<String>)> {
        let mut dir = out.sub(&format!("cells/{label}"))?;
        let outcome = solve_instance(inst, risk, cfg)?;
        let costs = emit_solution(&mut dir, label, inst, risk, &outcome)?;
        out.adopt(&format!("cells/{label}"), dir);
        let hint = outcome.solution.hint.clone();
        Ok((costs, if outcome.solution.costs.is_none() { hint } else { None }))
    })();
    let (costs, error) = match res {
        Ok(r) => r,
        Err(e) => (None, Some(e.to_string())),
    };
    if let Some(e) = &error {
        log::warn!("cell {label} failed: {e}");
    }
    CellResult {
        label: label.into(),
        alpha: risk.alpha,
        beta: risk.beta,
        costs,
        error,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

fn write_cell_table(out: &mut OutputDir, name: &str, cells: &[CellResult]) -> Result<()> {
    let mut w = out.file(name)?;
    writeln!(w, "label,alpha,beta,status,{COST_HEADER}")?;
    for c in cells {
        match &c.costs {
            Some(k) => writeln!(w, "{},{},{},ok,{}", c.label, c.alpha, c.beta, cost_fields(k))?,
            None => writeln!(
                w,
                "{},{},{},\"failed: {}\"{}",
                c.label,
                c.alpha,
                c.beta,
                c.error.as_deref().unwrap_or("").replace('"', "'"),
                ",".repeat(8)
            )?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Sweep results: cells in run order plus, for the ladder, the deviation rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
    pub ladder: Vec<LadderRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub method: ReductionMethod,
    pub target: usize,
    /// `|reduced - full| / full` of the total objective.
    pub abs_total_deviation: Option<f64>,
}

pub fn run_sweep(cfg: &RunConfig, kind: SweepKind) -> Result<SweepResult> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let mut cells = Vec::new();
    let mut ladder = Vec::new();
    match kind {
        SweepKind::Risk => {
            let inst = build_instance(cfg, cfg.case, &prep.reduced)?;
            for &alpha in &cfg.alphas {
                for &beta in &cfg.betas {
                    let risk = RiskConfig::new(alpha, beta)?;
                    cells.push(run_cell(
                        &mut out,
                        &format!("alpha{alpha}_beta{beta}"),
                        &inst,
                        risk,
                        cfg,
                    ));
                }
            }
            write_cell_table(&mut out, "sweep_costs.csv", &cells)?;
            let mut w = out.file("investment_grid.csv")?;
            let betas: Vec<String> = cfg.betas.iter().map(|b| format!("beta{b}")).collect();
            writeln!(w, "alpha,{}", betas.join(","))?;
            for (i, alpha) in cfg.alphas.iter().enumerate() {
                let row: Vec<String> = cells[i * cfg.betas.len()..(i + 1) * cfg.betas.len()]
                    .iter()
                    .map(|c| {
                        c.costs
                            .as_ref()
                            .map_or_else(String::new, |k| super::report::money(k.ic))
                    })
                    .collect();
                writeln!(w, "{alpha},{}", row.join(","))?;
            }
            w.flush()?;
            let mut w = out.file("shedding_by_beta.csv")?;
            writeln!(w, "alpha,beta,hour,shed_e_mw,shed_h_mw,shed_c_mw")?;
            for c in &cells {
                let dir = cfg.output_dir.join("cells").join(&c.label).join("solution.json");
                if c.costs.is_none() || !dir.is_file() {
                    continue;
                }
                let sol = SolutionFile::load(&dir)?;
                for (t, r) in expected_shedding(&sol.instance, &sol.schedule).iter().enumerate() {
                    writeln!(w, "{},{},{t},{:.4},{:.4},{:.4}", c.alpha, c.beta, r[0], r[1], r[2])?;
                }
            }
            w.flush()?;
        }
        SweepKind::Cases => {
            let risk = cfg.risk()?;
            let mut trading = Vec::new();
            for case in CasePreset::STUDY {
                let inst = build_instance(cfg, case, &prep.reduced)?;
                let cell = run_cell(&mut out, case.name(), &inst, risk, cfg);
                let path = cfg.output_dir.join("cells").join(case.name()).join("solution.json");
                if cell.costs.is_some() && path.is_file() {
                    let sol = SolutionFile::load(&path)?;
                    trading.push((case, expected_trading(&sol.instance, &sol.schedule)));
                }
                cells.push(cell);
            }
            write_cell_table(&mut out, "case_costs.csv", &cells)?;
            let mut w = out.file("trading_by_case.csv")?;
            writeln!(w, "case,hour,grid_mw,gas_mw")?;
            for (case, rows) in &trading {
                for (t, r) in rows.iter().enumerate() {
                    writeln!(w, "{},{t},{:.4},{:.4}", case.name(), r[0], r[1])?;
                }
            }
            w.flush()?;
        }
        SweepKind::Ladder => {
            let risk = cfg.risk()?;
            let full_inst = build_instance(cfg, cfg.case, &prep.full)?;
            let full = run_cell(&mut out, "full", &full_inst, risk, cfg);
            let full_costs = full.costs.clone();
            cells.push(full);
            let mut w = out.file("deviation_table.csv")?;
            writeln!(w, "method,target,{DEVIATION_HEADER}")?;
            for method in [ReductionMethod::Backward, ReductionMethod::Kmeans] {
                for &target in &cfg.ladder_targets {
                    let name = format!(
                        "{}{target}",
                        if method == ReductionMethod::Backward {
                            "backward"
                        } else {
                            "kmeans"
                        }
                    );
                    let (set, _) = reduce_set(&prep.full, method, target, cfg.reduction_seed, cfg.feature_options())?;
                    let inst = build_instance(cfg, cfg.case, &set)?;
                    let cell = run_cell(&mut out, &name, &inst, risk, cfg);
                    let dev = match (&full_costs, &cell.costs) {
                        (Some(f), Some(r)) => Some(deviation_report(f, r)),
                        _ => None,
                    };
                    match &dev {
                        Some(d) => writeln!(w, "{name},{target},{}", deviation_fields(d))?,
                        None => writeln!(w, "{name},{target},n/a,n/a,n/a,n/a,n/a,n/a")?,
                    }
                    ladder.push(LadderRow {
                        method,
                        target,
                        abs_total_deviation: dev.and_then(|d| d.total).map(f64::abs),
                    });
                    cells.push(cell);
                }
            }
            w.flush()?;
            write_cell_table(&mut out, "ladder_costs.csv", &cells)?;
        }
    }
    let mut manifest = Manifest::new(&format!("sweep {kind:?}").to_lowercase(), cfg);
    manifest.notes.extend(
        cells
            .iter()
            .filter_map(|c| c.error.as_ref().map(|e| format!("{}: {e}", c.label))),
    );
    manifest.write(&mut out)?;
    Ok(SweepResult { cells, ladder })
}

/// Reduction only: writes the reduced set and, for the backward method, its trace.
pub fn run_reduce(cfg: &RunConfig) -> Result<ScenarioSet> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    write_scenarios(&mut out, "reduced_scenarios.csv", &prep.reduced)?;
    if let Some(trace) = &prep.trace {
        trace.write_csv(out.file("reduction_trace.csv")?)?;
    }
    Manifest::new("reduce", cfg).write(&mut out)?;
    Ok(prep.reduced)
}

/// Writes the configured synthetic year to `path`.
pub fn run_synth(cfg: &RunConfig, path: &Path) -> Result<YearSeries> {
    let year = synth_year_with(cfg.synth_seed, &cfg.synth_profile()?);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    year.write_csv(std::fs::File::create(path)?)?;
    Ok(year)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub violations: Vec<Violation>,
    pub storage_flags: Vec<AuditFlag>,
    pub costs: Option<CostBreakdown>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.storage_flags.is_empty()
    }
}

/// Validates a stored solution and writes `audit.csv` to `out_dir`.
pub fn run_audit(solution: &Path, out_dir: &Path) -> Result<AuditReport> {
    let sol = SolutionFile::load(solution)?;
    sol.instance.validate_data()?;
    let violations = validate_schedule(&sol.instance, &sol.plan, &sol.schedule);
    let storage_flags = relaxation_audit(&sol.instance, &sol.schedule);
    let costs = evaluate_costs(&sol.instance, &sol.plan, &sol.schedule, sol.risk).ok();
    let mut out = OutputDir::create(out_dir)?;
    let mut w = out.file("audit.csv")?;
    writeln!(w, "check,label,scenario,step,residual")?;
    for v in &violations {
        let opt = |x: Option<usize>| x.map_or_else(String::new, |v| v.to_string());
        writeln!(
            w,
            "constraint,{},{},{},{:e}",
            v.label,
            opt(v.scenario),
            opt(v.step),
            v.residual
        )?;
    }
    for f in &storage_flags {
        writeln!(
            w,
            "simultaneous,ess{},{},{},{:e}",
            f.option,
            f.scenario,
            f.step,
            f.charge * f.discharge
        )?;
    }
    w.flush()?;
    Ok(AuditReport {
        violations,
        storage_flags,
        costs,
    })
}
