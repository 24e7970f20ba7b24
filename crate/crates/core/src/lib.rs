//! Distributed online tracking of a moving target over a network of agents.
//!
//! A group of agents receives noisy partial observations
//! `y_{i,t} = H_i theta_t + w_{i,t}` of a target `theta_t` that follows no
//! particular dynamics. Each agent tracks the target with a
//! consensus+innovation update (a weighted average of its neighbors' previous
//! estimates plus a local gradient correction from its own previous
//! observation) and the network is judged by its dynamic regret: the
//! time-averaged gap between the realized network loss and the loss of the
//! exact minimizer sequence.
//!
//! The crate provides:
//!
//! * [`topology`]: interaction graphs and validated symmetric stochastic
//!   mixing matrices with their spectra;
//! * [`sensing`]: per-agent observation models, global identifiability, and
//!   exact expected losses;
//! * [`trajectory`]: target trajectory generators and the path-length
//!   `C_T = sum_t ||theta_t - theta_{t-1}||^2`;
//! * [`engine`]: the tracking update, per-replica traces, and a
//!   deterministic parallel Monte Carlo driver;
//! * [`analysis`]: the stacked error recursion `e_t = Q e_{t-1} + u_t`, step
//!   size certification, exact regret accounting, and the path-length regret
//!   bound;
//! * [`linalg`]: the dense symmetric (cyclic Jacobi) eigensolver backing all
//!   spectral quantities.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod rng;
pub mod sensing;
pub mod topology;
pub mod trajectory;

pub use error::{Error, Result};
