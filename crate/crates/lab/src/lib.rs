//! Experiment driver for `pinlab-core`: sweep configuration, power-law fits,
//! sweep execution and the command line.

pub mod cli;
pub mod config;
pub mod expr;
pub mod fit;
pub mod sweep;

pub use config::{Experiment, SweepConfig};
pub use fit::{fit_rate, RateFit};
pub use sweep::{run_sweep, SweepOptions, SweepTable};
