use thiserror::Error;

/// Errors produced by graph construction, objective setup, simulation and analysis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("edge {from}->{to} references a node outside 0..{n}")]
    NodeOutOfRange { from: usize, to: usize, n: usize },
    #[error("explicit self-loop on node {0}; self-loops are implied")]
    ExplicitSelfLoop(usize),
    #[error("duplicate edge {from}->{to}")]
    DuplicateEdge { from: usize, to: usize },
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("malformed graph file at line {line}: {reason}")]
    GraphParse { line: usize, reason: String },
    #[error("{what} did not converge within {iters} iterations")]
    NoConvergence { what: &'static str, iters: usize },
    #[error("contraction norm construction exceeded numeric range (slack {slack})")]
    NormConstruction { slack: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("iterates diverged at iteration {iteration}")]
    Divergence { iteration: usize },
    #[error("empty step-size grid")]
    EmptyGrid,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
