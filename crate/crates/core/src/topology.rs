//! Agent-interaction graphs and their mixing matrices.
//!
//! The network is an undirected connected graph on `n` agents; inter-agent
//! averaging uses a symmetric, stochastic matrix P with positive diagonal
//! (irreducible and aperiodic as a Markov chain). Two standard weight schemes
//! produce such a P on any connected graph: Metropolis weights
//! `P_ij = 1/(1 + max(deg_i, deg_j))` and lazy max-degree weights
//! `P_ij = 1/(2 deg_max)`, with the diagonal absorbing the remainder.

use std::collections::BTreeSet;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::rng;

/// Dense-eigensolver guarantee for mixing matrices.
pub const MIXING_EIGEN_LIMIT: usize = 512;

/// Support threshold: entries at or below this magnitude are treated as
/// structural zeros when walking the support graph.
pub const SUPPORT_EPS: f64 = 1e-15;

const STOCHASTIC_TOL: f64 = 1e-12;
const ER_MAX_ATTEMPTS: usize = 100;

/// Undirected simple graph on agents `0..n` (no self-loops stored).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Normalizes edges to `(min, max)` order; rejects out-of-range endpoints
    /// and self-loops.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("agent count must be >= 1".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) out of range for n = {n}"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self { n, edges: set })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        reaches_all(self.n, |i| adj[i].clone())
    }
}

/// BFS from node 0 over a closure-provided adjacency.
fn reaches_all(n: usize, neighbors: impl Fn(usize) -> Vec<usize>) -> bool {
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for v in neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == n
}

/// Requested graph shape.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologyKind {
    Complete,
    Ring,
    Star,
    Path,
    ErdosRenyi { p: f64 },
    Explicit { edges: Vec<(usize, usize)> },
}

/// Builds a graph of the requested shape on `n` agents.
///
/// Erdos-Renyi sampling resamples until connected (at most 100 attempts);
/// explicit edge lists must already be connected.
pub fn build_graph(kind: &TopologyKind, n: usize, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidArgument("agent count must be >= 1".into()));
    }
    match kind {
        TopologyKind::Complete => {
            Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
        }
        TopologyKind::Ring => {
            if n <= 2 {
                // ring on 1 node has no edges; on 2 nodes it is a single edge
                Graph::new(n, (0..n.saturating_sub(1)).map(|i| (i, i + 1)))
            } else {
                Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
            }
        }
        TopologyKind::Star => Graph::new(n, (1..n).map(|i| (0, i))),
        TopologyKind::Path => Graph::new(n, (0..n.saturating_sub(1)).map(|i| (i, i + 1))),
        TopologyKind::ErdosRenyi { p } => {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidArgument(format!(
                    "erdos_renyi probability {p} outside [0, 1]"
                )));
            }
            let mut rng = rng::stream(rng::derive(seed, rng::TAG_GRAPH, 0));
            for _ in 0..ER_MAX_ATTEMPTS {
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.random::<f64>() < *p {
                            edges.push((i, j));
                        }
                    }
                }
                let g = Graph::new(n, edges)?;
                if g.is_connected() {
                    return Ok(g);
                }
            }
            Err(Error::GraphGeneration {
                attempts: ER_MAX_ATTEMPTS,
            })
        }
        TopologyKind::Explicit { edges } => {
            let g = Graph::new(n, edges.iter().copied())?;
            if !g.is_connected() {
                return Err(Error::Disconnected(format!(
                    "explicit edge list leaves the {n}-node graph disconnected"
                )));
            }
            Ok(g)
        }
    }
}

/// Off-diagonal weight rule for the mixing matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScheme {
    /// `P_ij = 1/(1 + max(deg_i, deg_j))` on edges.
    Metropolis,
    /// `P_ij = 1/(2 deg_max)` on edges.
    LazyMaxDegree,
}

/// Symmetric stochastic agent-interaction matrix with cached spectrum.
///
/// Invariants (enforced at construction): exact symmetry, row sums within
/// 1e-12 of one, nonnegative entries, strictly positive diagonal, connected
/// support, and all eigenvalues besides the leading 1 strictly inside (-1, 1).
/// For `n = 1` there is no second eigenvalue and `lambda_2` is reported as 1.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    n: usize,
    entries: Mat,
    lambda_2: f64,
    lambda_n: f64,
}

impl MixingMatrix {
    /// Validates an explicit matrix and caches its spectrum.
    pub fn from_entries(entries: Mat) -> Result<Self> {
        let report = validate_mixing(&entries);
        if !report.pass {
            return Err(Error::MixingInvariant(report.failures().join("; ")));
        }
        let n = entries.rows();
        if n > MIXING_EIGEN_LIMIT {
            return Err(Error::MatrixTooLarge {
                size: n,
                limit: MIXING_EIGEN_LIMIT,
            });
        }
        let eig = linalg::sym_eigenvalues(&entries)?;
        let lambda_2 = if n >= 2 { eig[1] } else { eig[0] };
        let lambda_n = eig[n - 1];
        Ok(Self {
            n,
            entries,
            lambda_2,
            lambda_n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &Mat {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(i, j)
    }

    /// `(lambda_2, lambda_n)`: second-largest and smallest eigenvalue.
    pub fn spectrum(&self) -> (f64, f64) {
        (self.lambda_2, self.lambda_n)
    }

    pub fn lambda_2(&self) -> f64 {
        self.lambda_2
    }

    pub fn lambda_n(&self) -> f64 {
        self.lambda_n
    }
}

/// Builds the mixing matrix for a connected graph under the given scheme.
pub fn build_mixing_matrix(g: &Graph, scheme: WeightScheme) -> Result<MixingMatrix> {
    if !g.is_connected() {
        return Err(Error::Disconnected(
            "mixing matrix requires a connected graph".into(),
        ));
    }
    let n = g.n();
    let deg = g.degrees();
    let deg_max = deg.iter().copied().max().unwrap_or(0);
    let mut p = Mat::zeros(n, n);
    for (a, b) in g.edges() {
        let w = match scheme {
            WeightScheme::Metropolis => 1.0 / (1.0 + deg[a].max(deg[b]) as f64),
            WeightScheme::LazyMaxDegree => 1.0 / (2.0 * deg_max as f64),
        };
        p.set(a, b, w);
        p.set(b, a, w);
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| p.get(i, j)).sum();
        p.set(i, i, 1.0 - off);
    }
    MixingMatrix::from_entries(p)
}

/// Property-by-property report for a candidate mixing matrix.
///
/// The spectral check runs only when the matrix is symmetric (the symmetric
/// eigensolver is meaningless otherwise) and is skipped above the dense size
/// limit.
#[derive(Debug, Clone, Serialize)]
pub struct MixingValidation {
    pub square: bool,
    pub symmetric: bool,
    pub max_asymmetry: f64,
    pub row_stochastic: bool,
    pub max_row_sum_error: f64,
    pub nonnegative: bool,
    pub min_entry: f64,
    pub positive_diagonal: bool,
    pub min_diagonal: f64,
    pub connected_support: bool,
    /// Positive diagonal entry on a connected support (sufficient condition).
    pub aperiodic: bool,
    pub spectrum_checked: bool,
    pub eigenvalue_range: bool,
    pub lambda_1: Option<f64>,
    pub lambda_2: Option<f64>,
    pub lambda_n: Option<f64>,
    pub pass: bool,
}

impl MixingValidation {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.square {
            out.push("matrix is not square".to_string());
        }
        if !self.symmetric {
            out.push(format!(
                "not symmetric (max |P - P'| = {:.3e})",
                self.max_asymmetry
            ));
        }
        if !self.row_stochastic {
            out.push(format!(
                "rows do not sum to 1 (max error {:.3e})",
                self.max_row_sum_error
            ));
        }
        if !self.nonnegative {
            out.push(format!("negative entry (min = {:.3e})", self.min_entry));
        }
        if !self.positive_diagonal {
            out.push(format!(
                "diagonal not strictly positive (min = {:.3e})",
                self.min_diagonal
            ));
        }
        if !self.connected_support {
            out.push("support graph is disconnected".to_string());
        }
        if !self.aperiodic {
            out.push("chain is not certified aperiodic".to_string());
        }
        if self.spectrum_checked && !self.eigenvalue_range {
            out.push("eigenvalues outside the required range".to_string());
        }
        out
    }
}

/// Checks every Assumption-2 property of a candidate matrix and reports
/// pass/fail per property. Accepts externally supplied matrices; never errors.
pub fn validate_mixing(p: &Mat) -> MixingValidation {
    let square = p.is_square();
    let n = p.rows();

    let mut max_asymmetry = 0.0;
    let mut max_row_sum_error = 0.0f64;
    let mut min_entry = f64::INFINITY;
    let mut min_diagonal = f64::INFINITY;
    let mut connected_support = false;

    if square {
        max_asymmetry = p.max_abs_asymmetry();
        for i in 0..n {
            let row = p.row(i);
            max_row_sum_error = max_row_sum_error.max((row.iter().sum::<f64>() - 1.0).abs());
            for &v in row {
                min_entry = min_entry.min(v);
            }
            min_diagonal = min_diagonal.min(p.get(i, i));
        }
        connected_support = reaches_all(n, |i| {
            (0..n)
                .filter(|&j| j != i && p.get(i, j).abs() > SUPPORT_EPS)
                .collect()
        });
    }

    let symmetric = square && max_asymmetry <= STOCHASTIC_TOL;
    let row_stochastic = square && max_row_sum_error <= STOCHASTIC_TOL;
    let nonnegative = square && min_entry >= -SUPPORT_EPS;
    let positive_diagonal = square && min_diagonal > 0.0;
    let aperiodic = connected_support && square && (0..n).any(|i| p.get(i, i) > SUPPORT_EPS);

    let mut spectrum_checked = false;
    let mut eigenvalue_range = false;
    let mut lambda_1 = None;
    let mut lambda_2 = None;
    let mut lambda_n = None;
    if symmetric && n <= MIXING_EIGEN_LIMIT {
        if let Ok(eig) = linalg::sym_eigenvalues(p) {
            spectrum_checked = true;
            lambda_1 = Some(eig[0]);
            lambda_n = Some(eig[n - 1]);
            if n >= 2 {
                lambda_2 = Some(eig[1]);
            }
            let head_ok = (eig[0] - 1.0).abs() <= 1e-10;
            let rest_ok = (1..n).all(|k| eig[k].abs() < 1.0 - 1e-12);
            eigenvalue_range = head_ok && rest_ok;
        }
    }

    let pass = square
        && symmetric
        && row_stochastic
        && nonnegative
        && positive_diagonal
        && connected_support
        && aperiodic
        && (!spectrum_checked || eigenvalue_range)
        && spectrum_checked == (n <= MIXING_EIGEN_LIMIT);

    MixingValidation {
        square,
        symmetric,
        max_asymmetry,
        row_stochastic,
        max_row_sum_error,
        nonnegative,
        min_entry,
        positive_diagonal,
        min_diagonal,
        connected_support,
        aperiodic,
        spectrum_checked,
        eigenvalue_range,
        lambda_1,
        lambda_2,
        lambda_n,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn edges(g: &Graph) -> Vec<(usize, usize)> {
        g.edges().collect()
    }

    #[test]
    fn ring_of_four() {
        let g = build_graph(&TopologyKind::Ring, 4, 0).unwrap();
        assert_eq!(edges(&g), vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
    }

    #[test]
    fn complete_of_three() {
        let g = build_graph(&TopologyKind::Complete, 3, 0).unwrap();
        assert_eq!(edges(&g), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn self_loops_and_out_of_range_edges_rejected() {
        assert!(matches!(
            Graph::new(3, [(1, 1)]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            Graph::new(3, [(0, 3)]),
            Err(Error::InvalidArgument(_))
        ));
        // duplicate and reversed edges normalize to one
        let g = Graph::new(3, [(1, 0), (0, 1), (1, 2)]).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn explicit_disconnected_rejected() {
        let kind = TopologyKind::Explicit {
            edges: vec![(0, 1)],
        };
        assert!(matches!(
            build_graph(&kind, 3, 0),
            Err(Error::Disconnected(_))
        ));
    }

    #[test]
    fn ring_of_two_has_single_edge() {
        let g = build_graph(&TopologyKind::Ring, 2, 0).unwrap();
        assert_eq!(edges(&g), vec![(0, 1)]);
    }

    #[test]
    fn erdos_renyi_connected_and_seeded() {
        let kind = TopologyKind::ErdosRenyi { p: 0.5 };
        let a = build_graph(&kind, 8, 11).unwrap();
        let b = build_graph(&kind, 8, 11).unwrap();
        assert!(a.is_connected());
        assert_eq!(edges(&a), edges(&b));
    }

    #[test]
    fn erdos_renyi_zero_probability_exhausts() {
        let kind = TopologyKind::ErdosRenyi { p: 0.0 };
        assert!(matches!(
            build_graph(&kind, 3, 5),
            Err(Error::GraphGeneration { .. })
        ));
    }

    #[test]
    fn metropolis_on_k2() {
        let g = build_graph(&TopologyKind::Complete, 2, 0).unwrap();
        let p = build_mixing_matrix(&g, WeightScheme::Metropolis).unwrap();
        assert_eq!(p.entries().row(0), &[0.5, 0.5]);
        assert_eq!(p.entries().row(1), &[0.5, 0.5]);
    }

    #[test]
    fn metropolis_on_ring4() {
        let g = build_graph(&TopologyKind::Ring, 4, 0).unwrap();
        let p = build_mixing_matrix(&g, WeightScheme::Metropolis).unwrap();
        let third = 1.0 / 3.0;
        for (a, b) in g.edges() {
            assert_abs_diff_eq!(p.get(a, b), third, epsilon = 1e-15);
        }
        for i in 0..4 {
            assert_abs_diff_eq!(p.get(i, i), third, epsilon = 1e-15);
        }
    }

    #[test]
    fn metropolis_on_star3() {
        let g = build_graph(&TopologyKind::Star, 3, 0).unwrap();
        let p = build_mixing_matrix(&g, WeightScheme::Metropolis).unwrap();
        let third = 1.0 / 3.0;
        assert_abs_diff_eq!(p.get(0, 1), third, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(0, 2), third, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(0, 0), third, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(1, 1), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(2, 2), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn lazy_max_degree_keeps_half_mass_on_diagonal() {
        let g = build_graph(&TopologyKind::Star, 4, 0).unwrap();
        let p = build_mixing_matrix(&g, WeightScheme::LazyMaxDegree).unwrap();
        // deg_max = 3, edge weight 1/6; center diagonal 1 - 3/6 = 1/2
        assert_abs_diff_eq!(p.get(0, 1), 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(1, 1), 5.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn validate_accepts_doubly_stochastic() {
        let m = Mat::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let rep = validate_mixing(&m);
        assert!(rep.pass, "failures: {:?}", rep.failures());
    }

    #[test]
    fn validate_flags_periodic_chain() {
        let m = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let rep = validate_mixing(&m);
        assert!(!rep.positive_diagonal);
        assert!(!rep.pass);
        // eigenvalues are {1, -1}: range check must fail too
        assert!(rep.spectrum_checked && !rep.eigenvalue_range);
    }

    #[test]
    fn validate_flags_asymmetry() {
        let m = Mat::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let rep = validate_mixing(&m);
        assert!(!rep.symmetric);
        assert!(!rep.pass);
        assert!(!rep.spectrum_checked);
    }

    #[test]
    fn validation_report_serializes() {
        let m = Mat::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let json = serde_json::to_string(&validate_mixing(&m)).unwrap();
        assert!(json.contains("\"pass\":true"));
    }

    #[test]
    fn spectrum_of_k2() {
        let g = build_graph(&TopologyKind::Complete, 2, 0).unwrap();
        let p = build_mixing_matrix(&g, WeightScheme::Metropolis).unwrap();
        let (l2, ln) = p.spectrum();
        assert_abs_diff_eq!(l2, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn spectrum_single_agent() {
        let p = MixingMatrix::from_entries(Mat::identity(1)).unwrap();
        assert_eq!(p.lambda_n(), 1.0);
        assert_eq!(p.lambda_2(), 1.0);
    }

    #[test]
    fn spectrum_of_ring4_metropolis() {
        // circulant eigenvalues 1/3 + (2/3) cos(2 pi k / 4) -> {1, 1/3, 1/3, -1/3}
        let g = build_graph(&TopologyKind::Ring, 4, 0).unwrap();
        let p = build_mixing_matrix(&g, WeightScheme::Metropolis).unwrap();
        let (l2, ln) = p.spectrum();
        assert_abs_diff_eq!(l2, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln, -1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn constructed_matrices_satisfy_invariants() {
        for kind in [
            TopologyKind::Complete,
            TopologyKind::Ring,
            TopologyKind::Star,
            TopologyKind::Path,
        ] {
            for scheme in [WeightScheme::Metropolis, WeightScheme::LazyMaxDegree] {
                for n in 1..=8 {
                    let g = build_graph(&kind, n, 0).unwrap();
                    let p = build_mixing_matrix(&g, scheme).unwrap();
                    assert_eq!(p.entries().max_abs_asymmetry(), 0.0);
                    for i in 0..n {
                        let sum: f64 = p.entries().row(i).iter().sum();
                        assert!((sum - 1.0).abs() <= 1e-12);
                        assert!(p.get(i, i) > 0.0);
                    }
                }
            }
        }
    }
}
