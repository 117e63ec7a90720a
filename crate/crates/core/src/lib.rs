//! Energy-optimal transport networks on graphs.
//!
//! For metabolic exponents `γ < 1` the local minimizers of the network energy
//! are supported on spanning trees, so the optimum is searched over trees by a
//! 1-swap descent with random restarts ([`descent`]). At `γ = 1` the energy is
//! convex and a projected gradient solver ([`convex`]) gives the global optimum
//! used to validate the tree search. [`centrality`] measures the hierarchy of
//! the resulting flow networks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod centrality;
pub mod convex;
pub mod descent;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod instances;
pub mod render;

pub use error::{Error, Result};
pub use graph::{FluxAssignment, Network, SpanningTree};
