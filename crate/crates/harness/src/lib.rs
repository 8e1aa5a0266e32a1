//! Experiment harness for the GP posterior-contraction lower bounds:
//! configuration, parallel Monte Carlo, the property suite and report
//! encodings. The `gplb` binary is a thin CLI over this crate.

pub mod config;
mod error;
pub mod experiment;
pub mod report;
pub mod verify;

pub use config::{ExperimentConfig, Format, Mode};
pub use error::{HarnessError, Result};
pub use gplb_core::transfer::{anderson_transfer, concentration_bound, contraction_floor, transfer_threshold};
pub use report::{RiskReport, RiskRow};
