//! Experiment harness around the `decrspi` solver: configuration, seeded
//! multi-run solving, policy evaluation, scaling studies and the exact-oracle
//! verification suite.

pub mod config;
pub mod oracle;
pub mod scaling;
pub mod solve;

pub use config::{Backend, ConfigArgs, RunConfig};
pub use oracle::run_oracle;
pub use scaling::run_scaling;
pub use solve::{run_evaluate, run_solve};
