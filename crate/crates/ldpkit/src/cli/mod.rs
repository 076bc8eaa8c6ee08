//! Configuration-driven experiment runner behind the `ldpkit` binary.

pub mod config;
pub mod output;
pub mod run;
pub mod verify;

pub use config::{parse_config, ExperimentConfig};
pub use run::{execute, run, RunStatus};
pub use verify::{run_checks, CheckRow, VerifySettings};
