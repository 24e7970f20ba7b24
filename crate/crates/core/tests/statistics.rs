//! Monte Carlo statistics against the closed-form bounds: the regret chain
//! `mean Reg_T <= moment_bound estimate <= path-length bound`, and monotonicity of
//! the settled deviation level in the step size.

mod common;

use citrack_core::analysis::{
    alpha_max, build_error_system, path_length_bound, stability_diagnostics,
};
use citrack_core::engine::{run_monte_carlo, InitialEstimates, MonteCarloOptions, ReplicaPlan};
use citrack_core::trajectory::{generate_trajectory, path_length, TrajectorySpec};

#[test]
fn regret_chain_dominance_on_random_configs() {
    for seed in 0..4u64 {
        let mut r = citrack_core::rng::stream(500 + seed);
        let n = 2 + (seed as usize % 3);
        let d = 1 + (seed as usize % 2);
        let mixing = common::random_mixing(n, seed, &mut r);
        let system = common::shared_gram_system(n, d, 0.5, &mut r);
        let horizon = 200;
        let traj_spec = if seed % 2 == 0 {
            TrajectorySpec::Static {
                theta: vec![0.0; d],
            }
        } else {
            TrajectorySpec::RandomWalk {
                start: vec![0.0; d],
                step_std: 0.05,
            }
        };
        let trajectory = generate_trajectory(&traj_spec, d, horizon, seed).unwrap();
        let c_t = path_length(&trajectory).value;

        let amax = alpha_max(&mixing, &system).unwrap().alpha_max;
        let alpha = 0.8 * amax;
        let es = build_error_system(&mixing, &system, alpha).unwrap();
        assert!(es.is_stable());

        let plan = ReplicaPlan {
            mixing: &mixing,
            system: &system,
            trajectory: &trajectory,
            alpha,
            init: &InitialEstimates::Zero,
        };
        let report = run_monte_carlo(
            &plan,
            &MonteCarloOptions {
                replicas: 200,
                master_seed: 77 + seed,
                exclude_diverged: false,
            },
        )
        .unwrap();
        assert!(report.diverged.is_empty());

        let bound = path_length_bound(alpha, es.q_norm(), &system, c_t, horizon).unwrap();

        // realized <= intermediate holds per replica, hence for the means
        assert!(
            report.regret_mean <= report.moment_bound_mean * (1.0 + 1e-12) + 1e-15,
            "seed {seed}: regret {} above moment_bound {}",
            report.regret_mean,
            report.moment_bound_mean
        );
        // intermediate <= closed form up to sampling error
        assert!(
            report.moment_bound_mean <= bound.total + 3.0 * report.moment_bound_stderr,
            "seed {seed}: moment_bound {} above bound {}",
            report.moment_bound_mean,
            bound.total
        );
        assert!(
            report.regret_mean <= bound.total + 3.0 * report.regret_stderr,
            "seed {seed}: regret {} above bound {}",
            report.regret_mean,
            bound.total
        );
    }
}

#[test]
fn settled_deviation_shrinks_with_the_step_size() {
    let mut r = citrack_core::rng::stream(9e3 as u64);
    let mixing = common::random_mixing(4, 12, &mut r);
    let system = common::shared_gram_system(4, 2, 1.0, &mut r);
    let horizon = 1500;
    let trajectory = generate_trajectory(
        &TrajectorySpec::Static {
            theta: vec![0.4, -0.2],
        },
        2,
        horizon,
        0,
    )
    .unwrap();
    let amax = alpha_max(&mixing, &system).unwrap().alpha_max;

    let sigma_at = |alpha: f64| -> f64 {
        let es = build_error_system(&mixing, &system, alpha).unwrap();
        assert!(es.is_stable());
        let plan = ReplicaPlan {
            mixing: &mixing,
            system: &system,
            trajectory: &trajectory,
            alpha,
            init: &InitialEstimates::Zero,
        };
        let report = run_monte_carlo(
            &plan,
            &MonteCarloOptions {
                replicas: 64,
                master_seed: 4242,
                exclude_diverged: false,
            },
        )
        .unwrap();
        let diag = stability_diagnostics(&report.msd_mean, es.q_norm());
        // the tail is noise-driven; accept the windowed mean as the level
        diag.tail_relative_change.expect("series long enough");
        report.msd_mean[horizon - 150..].iter().sum::<f64>() / 150.0
    };

    let low = sigma_at(0.2 * amax);
    let high = sigma_at(0.8 * amax);
    assert!(
        low < high,
        "deviation level should grow with alpha: {low} vs {high}"
    );
    assert!(low > 0.0);
}
