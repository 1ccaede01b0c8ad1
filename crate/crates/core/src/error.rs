use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{file} line {line}: {message}")]
    Parse {
        file: &'static str,
        line: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("non-manifold edge ({0}, {1}) shared by {2} triangles")]
    NonManifold(usize, usize, usize),

    #[error("dual graph is disconnected: patch {unreachable} not reachable from patch {root}")]
    Disconnected { root: usize, unreachable: usize },

    #[error(
        "mesh is not simply connected: {interior_edges} interior edges, expected {expected} \
         (patches - 1 + interior vertices)"
    )]
    NotSimplyConnected {
        interior_edges: usize,
        expected: usize,
    },

    #[error("point ({0}, {1}) lies outside the mesh")]
    Location(f64, f64),

    #[error(
        "incompatible Neumann problem: total source minus boundary outflux is {residual:e} \
         (tolerance {tolerance:e})"
    )]
    Incompatible { residual: f64, tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive definite (curvature {curvature:e} at iteration {iteration})")]
    NotPositiveDefinite { iteration: usize, curvature: f64 },

    #[error("iterative solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
