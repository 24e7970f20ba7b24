//! Four fully-observing agents on a ring track a random walk; the Monte
//! Carlo regret is compared against the path-length bound.
//!
//! Run with: `cargo run --release -p citrack-core --example track_ring`

use citrack_core::{analysis, engine, linalg, sensing, topology, trajectory};

fn main() -> Result<(), citrack_core::Error> {
    let graph = topology::build_graph(&topology::TopologyKind::Ring, 4, 0)?;
    let mixing = topology::build_mixing_matrix(&graph, topology::WeightScheme::Metropolis)?;

    let models = (0..4)
        .map(|i| {
            sensing::ObservationModel::new(
                i,
                linalg::Mat::identity(2),
                sensing::NoiseLaw::gaussian(0.5),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let system = sensing::NetworkSensingSystem::assemble(models)?;

    let spec = trajectory::TrajectorySpec::RandomWalk {
        start: vec![0.0; 2],
        step_std: 0.1,
    };
    let traj = trajectory::generate_trajectory(&spec, 2, 500, 7)?;
    let c_t = trajectory::path_length(&traj).value;

    let alpha = analysis::alpha_max(&mixing, &system)?.alpha_max * 0.5;
    let es = analysis::build_error_system(&mixing, &system, alpha)?;

    let plan = engine::ReplicaPlan {
        mixing: &mixing,
        system: &system,
        trajectory: &traj,
        alpha,
        init: &engine::InitialEstimates::Zero,
    };
    let report = engine::run_monte_carlo(
        &plan,
        &engine::MonteCarloOptions {
            replicas: 100,
            master_seed: 7,
            exclude_diverged: false,
        },
    )?;
    let bound = analysis::path_length_bound(alpha, es.q_norm(), &system, c_t, 500)?;

    println!(
        "alpha            = {alpha:.4}  (||Q|| = {:.4})",
        es.q_norm()
    );
    println!("path length C_T  = {c_t:.4}");
    println!(
        "mean regret      = {:.6} +- {:.6}",
        report.regret_mean, report.regret_stderr
    );
    println!(
        "bound            = {:.6} (noise {:.6} + path {:.6})",
        bound.total, bound.noise_term, bound.path_term
    );
    assert!(report.regret_mean <= bound.total + 3.0 * report.regret_stderr);
    Ok(())
}
