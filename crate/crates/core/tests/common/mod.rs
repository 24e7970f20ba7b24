//! Randomized instance generators shared by the integration tests.
#![allow(dead_code)] // each test binary uses its own subset

use rand::Rng;
use rand_distr::{Distribution, Normal};

use citrack_core::linalg::{dot, norm, Mat};
use citrack_core::sensing::{NetworkSensingSystem, NoiseLaw, ObservationModel};
use citrack_core::topology::{
    build_graph, build_mixing_matrix, MixingMatrix, TopologyKind, WeightScheme,
};

/// Random orthogonal matrix via (twice-reorthogonalized) Gram-Schmidt on a
/// Gaussian sample.
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

/// Well-conditioned square root factor R (singular values in [0.5, 1.5]);
/// G = R'R is the shared Gram matrix of the certified sensing family.
pub fn conditioned_root(d: usize, rng: &mut impl Rng) -> Mat {
    let q1 = random_orthogonal(d, rng);
    let q2 = random_orthogonal(d, rng);
    let s: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
    Mat::from_fn(d, d, |i, j| {
        (0..d).map(|k| q1.get(i, k) * s[k] * q2.get(j, k)).sum()
    })
}

/// Sensing family with one shared Gram matrix: H_i = O_i R with random
/// orthogonal O_i, so H_i'H_i = R'R for every agent. On this family the
/// step-size certificate ||Q(a)|| <= 1 - a lambda_min(H) holds with equality
/// over the whole feasible interval.
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

/// Heterogeneous dense-Gaussian sensing (identifiable with probability one;
/// assembled unchecked so degenerate draws cannot panic the generator).
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

/// Random connected topology plus weight scheme.
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
