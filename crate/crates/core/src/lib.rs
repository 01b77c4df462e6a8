//! Risk-aware energy hub planning.
//!
//! The crate builds and solves a two-stage stochastic MILP that chooses
//! converter capacities and renewable and storage module counts, then
//! operates them over a set of typical days. The objective weighs expected
//! operation cost against its Conditional Value-at-Risk.
//!
//! - [`model`]: domain types, the MILP builder, cost evaluation and the
//!   schedule validator.
//! - [`risk`]: VaR, CVaR and their linear embedding.
//! - [`scenarios`]: year ingestion, daily slicing and scenario reduction.
//! - [`solve`]: monolithic and Benders solution paths plus an enumeration
//!   oracle for tiny instances.
//! - [`app`]: configuration, synthetic data, experiment runs and reports.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod error;
pub mod instances;
pub mod milp;
pub mod model;
pub mod risk;
pub mod scenarios;
pub mod solve;

pub use error::{Error, Result};
