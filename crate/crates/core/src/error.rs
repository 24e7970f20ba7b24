//! Error type shared by all modules of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had the wrong size for the operation.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// Bad argument value (non-positive horizon, probability out of range, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The (explicit) graph does not connect all agents.
    #[error("graph is not connected: {0}")]
    Disconnected(String),

    /// Random graph generation exhausted its retry budget.
    #[error("failed to sample a connected graph after {attempts} attempts")]
    GraphGeneration { attempts: usize },

    /// A constructed or supplied mixing matrix violates a required property.
    #[error("mixing matrix invariant violated: {0}")]
    MixingInvariant(String),

    /// The cyclic Jacobi sweep did not reduce the off-diagonal mass in time.
    #[error("symmetric eigensolver did not converge after {sweeps} sweeps")]
    EigenNonConvergence { sweeps: usize },

    /// Dense eigendecomposition is only guaranteed up to a size limit.
    #[error("matrix of order {size} exceeds the dense eigensolver limit {limit}")]
    MatrixTooLarge { size: usize, limit: usize },

    /// The averaged Gram matrix H is (numerically) singular: the target is not
    /// globally identifiable by the network.
    #[error(
        "network is not globally identifiable: lambda_min(H) = {lambda_min:.3e} \
         (lambda_max = {lambda_max:.3e})"
    )]
    NotIdentifiable { lambda_min: f64, lambda_max: f64 },

    /// No step size satisfies the spectral-norm certificate above the floor.
    #[error(
        "no feasible step size above {floor:.1e}: lambda_min(H) = {lambda_min_h:.3e}, \
         lambda_n(P) = {lambda_n_p:.6}"
    )]
    AlphaInfeasible {
        floor: f64,
        lambda_min_h: f64,
        lambda_n_p: f64,
    },

    /// The path-length bound requires a contractive error system.
    #[error("regret bound inapplicable: ||Q|| = {q_norm:.6} >= 1")]
    BoundInapplicable { q_norm: f64 },

    /// Trajectory file could not be parsed into T rows of d values.
    #[error("trajectory file error: {0}")]
    TrajectoryFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
