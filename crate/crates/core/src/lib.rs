//! Hypergraph shift: mode seeking on probabilistic hypergraphs.
//!
//! A hypergraph is summarized by its hyperedge-adjacency matrix `M`. Modes
//! are local maximizers of the density `pᵀMp` over the simplex of
//! hyperedge distributions. [`shift::hypergraph_shift`] finds one by running
//! replicator dynamics on the current support and, while the first-order
//! check fails somewhere outside it, expanding toward the violating
//! hyperedges that neighbor the mode's dominant seeds.
//!
//! [`clustering`] and [`matching`] are drivers built on top of the shift.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod error;
pub mod hypergraph;
pub mod kkt;
pub mod matching;
pub mod replicator;
pub mod shift;
pub mod simplex;
pub mod voting;

pub use error::{Error, Result};
pub use hypergraph::{Hyperedge, HyperedgeAdjacency, Hypergraph, Violation};
pub use replicator::{initial_vector, replicator_step, seek_mode, SeekConfig, SeekResult};
pub use shift::{hypergraph_shift, Phase, ShiftConfig, ShiftOutcome, Termination, TrajectoryStep};
pub use simplex::{
    affinity, density, is_mode, support, unit_indicator, ModeCertificate, SimplexVector,
};
