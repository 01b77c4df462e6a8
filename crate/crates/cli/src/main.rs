use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ehplan::app::{
    self, exit_code, status_code, Manifest, ReductionMethod, RunConfig, RunStatus, SolveMethod, SweepKind,
};
use ehplan::model::CasePreset;
use ehplan::Error;

/// Risk-aware energy hub investment planning.
#[derive(Parser)]
#[command(name = "ehplan", version)]
struct Cli {
    /// TOML config file, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Single planning solve.
    Plan {
        /// Also write the monolithic model in LP text format.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Risk grid, coupling cases or scenario-count ladder.
    Sweep {
        #[arg(long, value_enum, default_value = "risk")]
        kind: Kind,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Scenario reduction only.
    Reduce(Overrides),
    /// Write a synthetic year CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Validate a solution.json written by plan or sweep.
    Audit {
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, default_value = "audit")]
        output_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Risk,
    Cases,
    Ladder,
}

/// Flags named after config keys; they override file values.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    year_path: Option<PathBuf>,
    #[arg(long)]
    catalog_path: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    synth_seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_reduction)]
    reduction_method: Option<ReductionMethod>,
    #[arg(long)]
    reduction_target: Option<usize>,
    #[arg(long)]
    reduction_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    ladder_targets: Option<Vec<usize>>,
    #[arg(long, value_parser = parse_solve)]
    solve_method: Option<SolveMethod>,
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_parser = parse_case)]
    case: Option<CasePreset>,
    #[arg(long)]
    max_modules: Option<u32>,
    /// Any other config key, as key=value with a TOML value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn parse_reduction(s: &str) -> Result<ReductionMethod, String> {
    toml_enum(s)
}

fn parse_solve(s: &str) -> Result<SolveMethod, String> {
    toml_enum(s)
}

fn parse_case(s: &str) -> Result<CasePreset, String> {
    CasePreset::parse(s).map_err(|e| e.to_string())
}

fn toml_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    #[derive(serde::Deserialize)]
    struct W<T> {
        v: T,
    }
    toml::from_str::<W<T>>(&format!("v = \"{s}\""))
        .map(|w| w.v)
        .map_err(|e| e.to_string())
}

impl Overrides {
    fn apply(self, mut cfg: RunConfig) -> Result<RunConfig, Error> {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        set!(
            output_dir,
            synth_seed,
            alpha,
            beta,
            alphas,
            betas,
            reduction_method,
            reduction_target,
            reduction_seed
        );
        set!(ladder_targets, solve_method, gap, max_iter, case);
        if self.year_path.is_some() {
            cfg.year_path = self.year_path;
        }
        if self.catalog_path.is_some() {
            cfg.catalog_path = self.catalog_path;
        }
        if self.time_limit.is_some() {
            cfg.time_limit = self.time_limit;
        }
        if self.max_modules.is_some() {
            cfg.max_modules = self.max_modules;
        }
        if self.set.is_empty() {
            return Ok(cfg);
        }
        let mut table: toml::Table = toml::from_str(&cfg.to_toml_string()).map_err(|e| Error::Config(e.to_string()))?;
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            let value = toml::from_str::<toml::Table>(&format!("v = {v}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(v.to_string()));
            table.insert(k.trim().to_string(), value);
        }
        RunConfig::from_toml_str(&toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?)
    }
}

fn base_config(path: Option<&Path>) -> Result<RunConfig, Error> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) if p.extension().is_some_and(|e| e == "json") => Ok(Manifest::load(p)?.config),
        Some(p) => RunConfig::load(p),
    }
}

fn run(cli: Cli) -> anyhow::Result<RunStatus> {
    let base = base_config(cli.config.as_deref())?;
    match cli.verb {
        Verb::Plan { dump_lp, overrides } => {
            let cfg = overrides.apply(base)?;
            if let Some(path) = dump_lp {
                app::dump_lp(&cfg, &path)?;
            }
            let (status, costs) = app::run_plan(&cfg)?;
            if let Some(c) = costs {
                println!("{}", app::COST_HEADER);
                println!("{}", ehplan_costs(&c));
            }
            if let RunStatus::Infeasible(h) = &status {
                eprintln!("infeasible: {h}");
            }
            println!("outputs in {}", cfg.output_dir.display());
            Ok(status)
        }
        Verb::Sweep { kind, overrides } => {
            let cfg = overrides.apply(base)?;
            let kind = match kind {
                Kind::Risk => SweepKind::Risk,
                Kind::Cases => SweepKind::Cases,
                Kind::Ladder => SweepKind::Ladder,
            };
            let res = app::run_sweep(&cfg, kind)?;
            for c in &res.cells {
                match (&c.costs, &c.error) {
                    (Some(k), _) => println!("{:<20} {}", c.label, ehplan_costs(k)),
                    (None, e) => println!("{:<20} failed: {}", c.label, e.as_deref().unwrap_or("")),
                }
            }
            println!("outputs in {}", cfg.output_dir.display());
            Ok(RunStatus::Ok)
        }
        Verb::Reduce(o) => {
            let cfg = o.apply(base)?;
            let set = app::run_reduce(&cfg)?;
            println!("{} scenarios written to {}", set.len(), cfg.output_dir.display());
            Ok(RunStatus::Ok)
        }
        Verb::Synth { out, overrides } => {
            let cfg = overrides.apply(base)?;
            let year = app::run_synth(&cfg, &out).with_context(|| format!("writing {}", out.display()))?;
            println!("{} hourly records written to {}", year.len(), out.display());
            Ok(RunStatus::Ok)
        }
        Verb::Audit { solution, output_dir } => {
            let report = app::run_audit(&solution, &output_dir)?;
            for v in &report.violations {
                println!(
                    "violation {} scenario {:?} step {:?} residual {:e}",
                    v.label, v.scenario, v.step, v.residual
                );
            }
            for f in &report.storage_flags {
                println!(
                    "simultaneous charge/discharge: ess {} scenario {} step {}",
                    f.option, f.scenario, f.step
                );
            }
            let n = report.violations.len() + report.storage_flags.len();
            if n == 0 {
                println!("clean");
                Ok(RunStatus::Ok)
            } else {
                Ok(RunStatus::AuditFailed(n))
            }
        }
    }
}

fn ehplan_costs(c: &ehplan::model::CostBreakdown) -> String {
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
    .map(|v| app::money(*v))
    .collect::<Vec<_>>()
    .join(",")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(status) => ExitCode::from(status_code(&status) as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Error>().map_or(app::EXIT_DATA, exit_code);
            ExitCode::from(code as u8)
        }
    }
}
