//! End-to-end runs of the CLI pipelines on short years.

use std::path::Path;

use ehplan::app::{
    exit_code, ingest_year, run_audit, run_plan, run_reduce, run_sweep, synth_year_with, Manifest, ReductionMethod,
    RunConfig, RunStatus, SolveMethod, SweepKind, SynthProfile, EXIT_DATA,
};
use ehplan::instances::zero_load_instance;
use ehplan::model::{default_catalog, CasePreset};
use ehplan::risk::RiskConfig;
use ehplan::solve::{solve_monolithic, HighsBackend, SolveOptions};
use ehplan::Error;

fn short_year(dir: &Path, days: usize) -> std::path::PathBuf {
    let profile = SynthProfile {
        days,
        ..SynthProfile::industrial_park_default()
    };
    let path = dir.join("year.csv");
    synth_year_with(3, &profile)
        .write_csv(std::fs::File::create(&path).unwrap())
        .unwrap();
    path
}

fn short_config(dir: &Path) -> RunConfig {
    RunConfig {
        year_path: Some(short_year(dir, 6)),
        output_dir: dir.join("out"),
        reduction_target: 3,
        solve_method: SolveMethod::Monolithic,
        max_modules: Some(10),
        ..RunConfig::default()
    }
}

#[test]
fn zero_load_case1_pays_only_investment() {
    let cat = default_catalog().for_case(CasePreset::Case1);
    let inst = zero_load_instance(&cat, 2, 4);
    let sol = solve_monolithic(
        &inst,
        RiskConfig::new(0.9, 0.0).unwrap(),
        &SolveOptions::default(),
        &HighsBackend,
    )
    .unwrap();
    let c = sol.costs.unwrap();
    assert!(c.ic > 0.0);
    assert_eq!((c.tc_expected, c.mc_expected, c.lc_expected), (0.0, 0.0, 0.0));
    assert!((c.objective - c.ic).abs() <= 1e-6 * c.ic);
}

#[test]
fn ingest_rejects_malformed_years() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    };
    let header = "hour,load_e_mw,load_h_mw,load_c_mw,wind_mps,irradiance_wpm2,price_e_rmb_per_mwh\n";
    let cases = [
        write("bad_header.csv", "hour,load\n0,1\n"),
        write("negative.csv", &format!("{header}0,1,-1,0,3,0,350\n")),
        write("gap.csv", &format!("{header}0,1,1,0,3,0,350\n2,1,1,0,3,0,350\n")),
        write(
            "partial_day.csv",
            &format!("{header}0,1,1,0,3,0,350\n1,1,1,0,3,0,350\n"),
        ),
        write("text.csv", &format!("{header}0,1,x,0,3,0,350\n")),
    ];
    for p in &cases {
        let err = ingest_year(p, 24).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_DATA, "{}: {err}", p.display());
    }
    let err = ingest_year(&dir.path().join("missing.csv"), 24).unwrap_err();
    assert!(matches!(err, Error::Io(_) | Error::Data { .. }), "{err}");
}

#[test]
fn plan_writes_artifacts_that_audit_clean_and_regenerate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let (status, costs) = run_plan(&cfg).unwrap();
    assert_eq!(status, RunStatus::Ok);
    assert!(costs.unwrap().objective > 0.0);
    let out = dir.path().join("out");
    let manifest = Manifest::load(&out.join("manifest.json")).unwrap();
    for f in &manifest.files {
        assert!(out.join(f).is_file(), "{f} listed but missing");
    }

    let audit = run_audit(&out.join("solution.json"), &dir.path().join("audit")).unwrap();
    assert!(audit.is_clean(), "{:?}", audit.violations);
    assert!(dir.path().join("audit/audit.csv").is_file());

    let again = RunConfig {
        output_dir: dir.path().join("again"),
        ..manifest.config.clone()
    };
    run_plan(&again).unwrap();
    for f in [
        "costs.csv",
        "plan.csv",
        "scenarios.csv",
        "reduction_trace.csv",
        "shedding.csv",
        "trading.csv",
    ] {
        let a = std::fs::read(out.join(f)).unwrap();
        let b = std::fs::read(dir.path().join("again").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs on regeneration");
    }
}

#[test]
fn benders_and_monolithic_plans_agree_on_a_short_year() {
    let dir = tempfile::tempdir().unwrap();
    let mono = short_config(dir.path());
    let benders = RunConfig {
        solve_method: SolveMethod::Benders,
        output_dir: dir.path().join("b"),
        ..mono.clone()
    };
    let a = run_plan(&mono).unwrap().1.unwrap().objective;
    let b = run_plan(&benders).unwrap().1.unwrap().objective;
    assert!((a - b).abs() <= 2e-4 * a, "{a} vs {b}");
    assert!(dir.path().join("b/benders_log.csv").is_file());
}

#[test]
fn reduce_keeps_probability_mass() {
    let dir = tempfile::tempdir().unwrap();
    for method in [ReductionMethod::Backward, ReductionMethod::Kmeans] {
        let cfg = RunConfig {
            reduction_method: method,
            ..short_config(dir.path())
        };
        let set = run_reduce(&cfg).unwrap();
        assert_eq!(set.len(), 3);
        assert!((set.total_prob() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn case_sweep_orders_objectives() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let res = run_sweep(&cfg, SweepKind::Cases).unwrap();
    let obj: Vec<f64> = res.cells.iter().map(|c| c.costs.as_ref().unwrap().objective).collect();
    assert_eq!(obj.len(), 4);
    let le = |a: f64, b: f64| a <= b + 1e-4 * b;
    assert!(
        le(obj[3], obj[2]) && le(obj[2], obj[0]) && le(obj[3], obj[1]) && le(obj[1], obj[0]),
        "{obj:?}"
    );
    assert!(dir.path().join("out/case_costs.csv").is_file());
}

#[test]
fn zero_module_cap_leaves_converters_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        max_modules: Some(0),
        ..short_config(dir.path())
    };
    let (status, _) = run_plan(&cfg).unwrap();
    assert_eq!(status, RunStatus::Ok);
    let plan = std::fs::read_to_string(dir.path().join("out/plan.csv")).unwrap();
    for line in plan
        .lines()
        .skip(1)
        .filter(|l| !l.ends_with(",MW") || l.starts_with("WT"))
    {
        assert!(line.split(',').nth(2) == Some("0"), "{line}");
    }
}
