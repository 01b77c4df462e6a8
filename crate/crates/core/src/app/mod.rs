//! Configuration, data preparation, experiment pipelines and report files.
//!
//! Every pipeline writes into the configured output directory and finishes
//! with a `manifest.json` that echoes the full configuration, so a run can
//! be repeated from its manifest alone.

mod config;
mod report;
mod run;
mod synth;

use crate::error::Error;

pub use config::{ReductionMethod, RunConfig, SolveMethod};
pub use report::{
    expected_shedding, expected_trading, money, Manifest, OutputDir, SolutionFile, COST_HEADER, DEVIATION_HEADER,
};
pub use run::{
    build_instance, dump_lp, ingest_year, load_year, prepare, reduce_set, run_audit, run_plan, run_reduce, run_sweep,
    run_synth, solve_instance, AuditReport, CellResult, LadderRow, Prepared, RunStatus, SolveOutcome, SweepKind,
    SweepResult,
};
pub use synth::{is_valley_hour, solar_elevation_sin, synth_year, synth_year_with, SynthProfile, DEFAULT_PROFILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_SOLVER: i32 = 5;

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::TooLarge { .. } => EXIT_CONFIG,
        Error::Data { .. } | Error::Validation(_) | Error::KindMismatch { .. } | Error::Io(_) => EXIT_DATA,
        Error::InfeasibleByConstruction(_) => EXIT_INFEASIBLE,
        Error::Solver(_) | Error::Formulation(_) => EXIT_SOLVER,
    }
}

/// Process exit status for a completed verb.
pub fn status_code(status: &RunStatus) -> i32 {
    match status {
        RunStatus::Ok => EXIT_OK,
        RunStatus::Infeasible(_) | RunStatus::AuditFailed(_) => EXIT_INFEASIBLE,
    }
}
