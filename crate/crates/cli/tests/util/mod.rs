//! Instance and config-document generators for the acceptance suite.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Normal};

use citrack_cli::config::{
    AgentSensingDoc, AlgorithmDoc, ConfigDoc, DimensionsDoc, InitDoc, InitKindDoc, NoiseDoc,
    PolicyDoc, RunDoc, SchemeDoc, SensingDoc, SensingKindDoc, TopologyDoc, TopologyKindDoc,
    TrajectoryDoc, TrajectoryKindDoc,
};
use citrack_core::linalg::{dot, norm, Mat};
use citrack_core::sensing::{NetworkSensingSystem, NoiseFamily, NoiseLaw, ObservationModel};
use citrack_core::topology::{
    build_graph, build_mixing_matrix, MixingMatrix, TopologyKind, WeightScheme,
};

// ---------------------------------------------------------------------------
// randomized core instances

pub fn random_orthogonal(d: usize, rng: &mut impl Rng) -> Mat {
    let normal = Normal::new(0.0, 1.0).unwrap();
    'retry: loop {
        let mut cols: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| normal.sample(rng)).collect())
            .collect();
        for j in 0..d {
            for k in 0..j {
                let prev = cols[k].clone();
                for _ in 0..2 {
                    let proj = dot(&cols[j], &prev);
                    for (x, p) in cols[j].iter_mut().zip(&prev) {
                        *x -= proj * p;
                    }
                }
            }
            let len = norm(&cols[j]);
            if len < 1e-6 {
                continue 'retry;
            }
            for x in cols[j].iter_mut() {
                *x /= len;
            }
        }
        return Mat::from_fn(d, d, |i, j| cols[j][i]);
    }
}

pub fn conditioned_root(d: usize, rng: &mut impl Rng) -> Mat {
    let q1 = random_orthogonal(d, rng);
    let q2 = random_orthogonal(d, rng);
    let s: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
    Mat::from_fn(d, d, |i, j| {
        (0..d).map(|k| q1.get(i, k) * s[k] * q2.get(j, k)).sum()
    })
}

/// H_i = O_i R with a shared root R: every agent has the same Gram matrix,
/// the family on which the step-size certificate is provable.
pub fn shared_gram_system(
    n: usize,
    d: usize,
    sigma: f64,
    rng: &mut impl Rng,
) -> NetworkSensingSystem {
    let root = conditioned_root(d, rng);
    let models = (0..n)
        .map(|i| {
            let h = random_orthogonal(d, rng).matmul(&root);
            ObservationModel::new(i, h, NoiseLaw::gaussian(sigma)).unwrap()
        })
        .collect();
    NetworkSensingSystem::assemble(models).unwrap()
}

pub fn dense_system(
    n: usize,
    d: usize,
    rows_per_agent: usize,
    sigma: f64,
    rng: &mut impl Rng,
) -> NetworkSensingSystem {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let models = (0..n)
        .map(|i| {
            let h = Mat::from_fn(rows_per_agent, d, |_, _| normal.sample(rng));
            ObservationModel::new(i, h, NoiseLaw::gaussian(sigma)).unwrap()
        })
        .collect();
    NetworkSensingSystem::assemble_unchecked(models).unwrap()
}

pub fn random_mixing(n: usize, seed: u64, rng: &mut impl Rng) -> MixingMatrix {
    let kind = match rng.random_range(0..5) {
        0 => TopologyKind::Complete,
        1 => TopologyKind::Ring,
        2 => TopologyKind::Star,
        3 => TopologyKind::Path,
        _ => TopologyKind::ErdosRenyi { p: 0.6 },
    };
    let scheme = if rng.random_range(0..2) == 0 {
        WeightScheme::Metropolis
    } else {
        WeightScheme::LazyMaxDegree
    };
    let graph = build_graph(&kind, n, seed).unwrap();
    build_mixing_matrix(&graph, scheme).unwrap()
}

// ---------------------------------------------------------------------------
// config documents

fn base_doc(n: usize, d: usize, t: usize, seed: u64) -> ConfigDoc {
    ConfigDoc {
        dimensions: DimensionsDoc { n, d, t },
        topology: TopologyDoc {
            kind: Some(TopologyKindDoc::Ring),
            scheme: SchemeDoc::Metropolis,
            p: None,
            edges: None,
            matrix: None,
        },
        sensing: SensingDoc {
            kind: SensingKindDoc::Explicit,
            rows_per_agent: 1,
            scale: 1.0,
            agents: None,
            noise: NoiseDoc {
                family: NoiseFamily::Gaussian,
                sigma: 0.0,
            },
        },
        trajectory: TrajectoryDoc {
            kind: TrajectoryKindDoc::Static,
            theta: Some(vec![0.0; d]),
            start: None,
            velocity: None,
            center: None,
            amplitude: None,
            period: None,
            step_std: None,
            decay: None,
            values: None,
            switch_times: None,
            path: None,
        },
        algorithm: AlgorithmDoc {
            alpha: Some(0.1),
            policy: None,
        },
        run: RunDoc {
            replicas: 1,
            seed,
            retain_noise: false,
            allow_unstable: false,
            emit_traces: false,
            exclude_diverged: false,
            init: InitDoc {
                kind: InitKindDoc::Zero,
                estimates: None,
                std: None,
            },
        },
    }
}

/// Randomized config for the recursion-oracle criterion: mixed topologies,
/// random explicit sensing, varied trajectories and initializations; the step
/// size may exceed feasibility (the recursion identity is algebraic).
pub fn random_doc(
    rng: &mut impl Rng,
    index: u64,
    n: usize,
    d: usize,
    horizon: usize,
    sigma: f64,
) -> ConfigDoc {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut doc = base_doc(n, d, horizon, 7000 + index);

    doc.topology.kind = Some(match index % 5 {
        0 => TopologyKindDoc::Complete,
        1 => TopologyKindDoc::Ring,
        2 => TopologyKindDoc::Star,
        3 => TopologyKindDoc::Path,
        _ => TopologyKindDoc::ErdosRenyi,
    });
    if doc.topology.kind == Some(TopologyKindDoc::ErdosRenyi) {
        doc.topology.p = Some(0.6);
    }
    if index.is_multiple_of(2) {
        doc.topology.scheme = SchemeDoc::LazyMaxDegree;
    }

    doc.sensing.agents = Some(
        (0..n)
            .map(|_| {
                let rows = rng.random_range(1..=3);
                AgentSensingDoc {
                    h: (0..rows)
                        .map(|_| (0..d).map(|_| normal.sample(rng)).collect())
                        .collect(),
                    sigma: None,
                }
            })
            .collect(),
    );
    doc.sensing.noise.sigma = sigma;

    doc.trajectory = match index % 4 {
        0 => TrajectoryDoc {
            kind: TrajectoryKindDoc::Static,
            theta: Some((0..d).map(|_| rng.random_range(-2.0..2.0)).collect()),
            ..empty_trajectory()
        },
        1 => TrajectoryDoc {
            kind: TrajectoryKindDoc::RandomWalk,
            start: Some(vec![0.0; d]),
            step_std: Some(0.2),
            ..empty_trajectory()
        },
        2 => TrajectoryDoc {
            kind: TrajectoryKindDoc::Sinusoid,
            center: Some(vec![0.5; d]),
            amplitude: Some(vec![1.0; d]),
            period: Some(50.0),
            ..empty_trajectory()
        },
        _ => TrajectoryDoc {
            kind: TrajectoryKindDoc::LinearDrift,
            start: Some(vec![0.0; d]),
            velocity: Some((0..d).map(|_| rng.random_range(-0.05..0.05)).collect()),
            ..empty_trajectory()
        },
    };

    doc.algorithm.alpha = Some(rng.random_range(0.01..0.6));
    doc.run.allow_unstable = true;
    if index.is_multiple_of(3) {
        doc.run.init = InitDoc {
            kind: InitKindDoc::Gaussian,
            estimates: None,
            std: Some(1.0),
        };
    }
    doc
}

fn empty_trajectory() -> TrajectoryDoc {
    TrajectoryDoc {
        kind: TrajectoryKindDoc::Static,
        theta: None,
        start: None,
        velocity: None,
        center: None,
        amplitude: None,
        period: None,
        step_std: None,
        decay: None,
        values: None,
        switch_times: None,
        path: None,
    }
}

/// Ring of four agents, every agent observing the full state (shared identity
/// Gram, so the tuned policies get a meaningful alpha_max = 1/3), static
/// target with exact-start initialization.
pub fn rate_check_doc(policy: PolicyDoc, sigma: f64, replicas: usize) -> ConfigDoc {
    let theta = vec![0.7, -0.3];
    let mut doc = base_doc(4, 2, 100, 2718);
    doc.sensing.agents = Some(vec![
        AgentSensingDoc {
            h: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            sigma: None,
        };
        4
    ]);
    doc.sensing.noise.sigma = sigma;
    doc.trajectory.theta = Some(theta.clone());
    doc.algorithm = AlgorithmDoc {
        alpha: None,
        policy: Some(policy),
    };
    doc.run.replicas = replicas;
    doc.run.init = InitDoc {
        kind: InitKindDoc::Explicit,
        estimates: Some(vec![theta; 4]),
        std: None,
    };
    doc
}

/// Config for the determinism criterion: generated-sensing noise streams,
/// random-walk target, Gaussian initialization, trace emission on.
pub fn determinism_doc() -> ConfigDoc {
    let n = 6;
    let mut doc = base_doc(n, 2, 150, 31_415);
    doc.sensing.agents = Some(
        (0..n)
            .map(|i| AgentSensingDoc {
                h: if i % 2 == 0 {
                    vec![vec![1.0, 0.0]]
                } else {
                    vec![vec![0.0, 1.0]]
                },
                sigma: None,
            })
            .collect(),
    );
    doc.sensing.noise.sigma = 0.3;
    doc.trajectory = TrajectoryDoc {
        kind: TrajectoryKindDoc::RandomWalk,
        start: Some(vec![0.0, 0.0]),
        step_std: Some(0.2),
        ..empty_trajectory()
    };
    doc.algorithm.alpha = Some(0.1);
    doc.run.replicas = 6;
    doc.run.emit_traces = true;
    doc.run.init = InitDoc {
        kind: InitKindDoc::Gaussian,
        estimates: None,
        std: Some(1.0),
    };
    doc
}
