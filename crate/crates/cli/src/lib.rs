//! Configuration, sweeps and reports for the `eirp-sim` runner.

pub mod bench;
pub mod config;
pub mod report;
pub mod sweep;

pub use config::{Config, ConfigError, SweepPoint};
pub use sweep::{run_sweep, SweepOutcome};
