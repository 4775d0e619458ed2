//! End-to-end reconstruction pipeline, error metrics, sweeps and output.

pub mod config;
pub mod metrics;
pub mod output;
pub mod run;
pub mod sweep;
pub mod verify;

pub use config::SweepSpec;
pub use metrics::{error_halfnorm, rerror};
pub use run::{reconstruct, ReconstructionReport, RunConfig};
pub use sweep::{loglog_fit, run_sweep, SlopeFit, SweepRow};
