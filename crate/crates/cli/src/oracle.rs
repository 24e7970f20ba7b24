//! Recursion replay check: a simulated replica must be reproduced by the
//! stacked error recursion fed with the same retained noise draws.

use anyhow::Result;
use serde::Serialize;

use citrack_core::analysis::{build_error_system, error_input, recurse_error};
use citrack_core::engine::{run_replica, ReplicaPlan};
use citrack_core::linalg::norm;
use citrack_core::rng;

use crate::config::ExperimentConfig;
use crate::experiment::prepare;

#[derive(Debug, Clone, Serialize)]
pub struct OracleOutcome {
    pub replica_seed: u64,
    pub rounds: usize,
    pub max_relative_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Runs replica 0 with retained noise and replays it through
/// `e_t = Q e_{t-1} + u_t`, reporting the worst relative deviation.
pub fn oracle_check(cfg: &ExperimentConfig, tolerance: f64) -> Result<OracleOutcome> {
    let prepared = prepare(cfg)?;
    replay_deviation(&prepared, cfg, tolerance)
}

/// The replay itself, reusable from a prepared experiment.
pub fn replay_deviation(
    prepared: &crate::experiment::Prepared,
    cfg: &ExperimentConfig,
    tolerance: f64,
) -> Result<OracleOutcome> {
    let plan = ReplicaPlan {
        mixing: &prepared.mixing,
        system: &prepared.system,
        trajectory: &prepared.trajectory,
        alpha: prepared.alpha,
        init: &cfg.init,
    };
    let replica_seed = rng::replica_seed(cfg.seed, 0);
    let trace = run_replica(&plan, 0, replica_seed, true)?;
    let noise = trace.noise.as_ref().expect("noise retained");
    let es = build_error_system(&prepared.mixing, &prepared.system, prepared.alpha)?;

    // Deviation is measured against the running scale of the error process
    // (the largest ||e_s|| seen so far): once a noiseless trajectory has
    // contracted below eps * ||theta||, the stored errors are pure
    // cancellation noise from computing (estimate - theta) and a per-round
    // quotient would compare rounding against rounding.
    let mut worst = 0.0f64;
    let mut scale = norm(&trace.errors[0]);
    let mut replayed = trace.errors[0].clone();
    for t in 2..=trace.rounds() {
        let u = error_input(
            prepared.trajectory.at(t - 1),
            prepared.trajectory.at(t),
            &noise[t - 2],
            &prepared.system,
            prepared.alpha,
        )?;
        replayed = recurse_error(&es, &replayed, &u)?;
        scale = scale.max(norm(&replayed));
        let simulated = &trace.errors[t - 1];
        let diff: Vec<f64> = simulated
            .iter()
            .zip(&replayed)
            .map(|(a, b)| a - b)
            .collect();
        let dev = if scale == 0.0 {
            if norm(&diff) == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            norm(&diff) / scale
        };
        worst = worst.max(dev);
    }

    Ok(OracleOutcome {
        replica_seed,
        rounds: trace.rounds(),
        max_relative_deviation: worst,
        tolerance,
        pass: worst <= tolerance,
    })
}
