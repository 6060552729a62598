//! Maximum flow on directed, uncapacitated graphs by augmenting paths found
//! in a random sample of a re-weighted residual graph.
//!
//! Vertex potentials induce arc weights `1 / (max(y(head) - y(tail), 0) + 1)`.
//! A min-ratio-cut toggle loop raises potentials on unbalanced cuts until
//! every cut carries at least a constant fraction of its boundary weight in
//! each direction. Sampling the weighted residual graph then keeps an
//! augmenting path with high probability.
//!
//! Module map:
//!
//! * [`graph`]: multigraph, residual flips, preprocessing, path search
//! * [`balance`]: potentials, approximate weights, gradient, energy
//! * [`ratio_cut`]: min-ratio-cut oracles, `ToggleCut`, the balance loop
//! * [`expander`]: conductance and static expander decomposition
//! * [`sparsifier`]: weight buckets and hierarchical edge sampling
//! * [`dinic`]: blocking flows, unit and real capacities
//! * [`maxflow`]: the balanced solver and the hybrid pipeline
//! * [`dimacs`], [`generate`], [`suite`]: instances and experiment runs
//! * [`audit`]: brute-force verification used by `balflow verify`

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x >= 0.0)` also rejects NaN

pub mod audit;
pub mod balance;
pub mod dimacs;
pub mod dinic;
pub mod error;
pub mod expander;
pub mod generate;
pub mod graph;
pub mod maxflow;
pub mod par;
pub mod ratio_cut;
pub mod sparsifier;
pub mod suite;

pub use error::{FlowError, Result};
pub use graph::{Arc, ArcId, ArcTag, CutSide, DirectedMultigraph, VertexId};
pub use maxflow::{hybrid_solve, solve, FlowResult, SolverConfig};
pub use par::ExecMode;
