//! Planning toolkit for wildfire-driven power line de-energization.
//!
//! The library turns daily wildfire-potential rasters and transmission
//! network geometry into per-line risk values under six aggregation
//! metrics, then plans line de-energizations two ways: percentile
//! thresholding and a mixed-integer Optimal Power Shutoff program. A DC
//! dispatch model evaluates the load shed each plan causes, and the
//! analysis layer compares plans across metrics and methods.
//!
//! Modules mirror the pipeline stages:
//!
//! - [`net`] — network and demand data model
//! - [`raster`] — daily risk rasters and line/pixel intersection
//! - [`metrics`] — the six per-line risk metrics (MA, ME, CU, HRMA, HRME, HRCU)
//! - [`threshold`] — percentile-based de-energization plans
//! - [`solver`] — internal LP simplex and branch-and-bound MILP
//! - [`dispatch`] — minimum-load-shed DC dispatch with fixed line statuses
//! - [`ops`] — the Optimal Power Shutoff MILP planner
//! - [`oracle`] — brute-force reference implementations for verification
//! - [`analysis`] — plan comparison, rolling averages, reports
//! - [`fixtures`] — deterministic synthetic test systems
//! - [`study`] — file-based pipeline orchestration used by the CLI

pub mod analysis;
pub mod config;
pub mod dispatch;
pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod net;
pub mod ops;
pub mod oracle;
pub mod raster;
pub mod solver;
pub mod study;
pub mod threshold;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
