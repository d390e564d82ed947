//! Benchmark, file formats and command-line front end for `lcid-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod metrics;
pub mod plot;
pub mod scenario;

pub use bench::{
    aggregate, run_benchmark, BenchOutput, Method, MetricsRecord, RunStatus, SummaryRow,
};
pub use config::RunConfig;
pub use error::{LcidError, Result};
pub use scenario::Scenario;
