//! Benchmark orchestration for the HAR solver family: run-spec expansion,
//! matrix execution with CSV/JSON artifacts, scaled geometric means, and
//! performance profiles. The `har` binary is a thin wrapper over
//! [`cli::cli_main`].

pub mod cli;
pub mod matrix;
pub mod runspec;
pub mod stats;
