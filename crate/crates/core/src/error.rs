use thiserror::Error;

use crate::graph::{ArcId, VertexId};

pub type Result<T, E = FlowError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid augmenting path: {0}")]
    InvalidPath(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("flow conservation violated at vertex {vertex} (in {inflow}, out {outflow})")]
    FlowInconsistency {
        vertex: VertexId,
        inflow: usize,
        outflow: usize,
    },

    #[error("arc {0:?} is not tracked")]
    UnknownArc(ArcId),

    #[error("undirected image of the graph is disconnected")]
    Disconnected,

    #[error("brute-force oracle limited to {max} vertices, got {n}")]
    OversizeBruteForce { n: usize, max: usize },

    #[error("dinkelbach iteration did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("max-flow/min-cut mismatch: flow {flow}, cut {cut}")]
    CutMismatch { flow: f64, cut: f64 },

    #[error("potential spread {spread} exceeds energy horizon M = {big_m}")]
    EnergyHorizon { spread: f64, big_m: f64 },

    #[error("invariant breach: {0}")]
    InvariantBreach(String),

    #[error("runtime guard exceeded after {work} work units (limit {limit})")]
    RuntimeGuard { work: u64, limit: u64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FlowError {
    /// True for errors that indicate a broken algorithmic invariant rather
    /// than bad input.
    pub fn is_invariant_breach(&self) -> bool {
        matches!(
            self,
            FlowError::InvariantBreach(_)
                | FlowError::EnergyHorizon { .. }
                | FlowError::NonConvergence { .. }
                | FlowError::CutMismatch { .. }
                | FlowError::FlowInconsistency { .. }
                | FlowError::RuntimeGuard { .. }
        )
    }
}
