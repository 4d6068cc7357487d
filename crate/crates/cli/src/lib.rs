//! Configuration-driven experiment runner for the weighted Calderón–Hardy
//! laboratory: parses flat-text configs, dispatches the experiments, and
//! emits deterministic JSON/CSV reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind};
pub use report::{Check, Report};
pub use runner::{emit, run, Format, RunError};
