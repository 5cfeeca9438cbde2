//! Batch front-end for SNPD experiments: sweep configuration, result files
//! and fixture generation. The `snpd` binary is a thin wrapper.

pub mod config;
pub mod fixtures;
pub mod output;

pub use config::{RunConfig, SweepAxis, SweepPoint};
pub use output::{render_csv, render_json, render_report, run_points, write_outputs, PointResult};
