//! Config-driven experiment orchestration for the tracking simulator:
//! TOML configs, run/sweep drivers, CSV artifacts, and the run manifest.
//!
//! A note on tuned step sizes: the named policies cap at the certified
//! alpha_max, and that certificate (`||Q(a)|| <= 1 - a lambda_min(H)`) is
//! conservative. With heterogeneous per-agent Gram matrices it can admit
//! only a degenerate step size even though `||Q|| < 1` holds over a wide
//! range; for such systems pin `algorithm.alpha` explicitly, since the run
//! gates on the directly verified contraction, not on the certificate.

pub mod config;
pub mod experiment;
pub mod oracle;
pub mod sweep;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, RunOutcome};
pub use oracle::oracle_check;
pub use sweep::{sweep, SweepAxis};
