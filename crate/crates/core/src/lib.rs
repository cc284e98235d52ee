//! Recurrence and transience of random walks on conductance graphs built from
//! pants decompositions.
//!
//! The crate is organised bottom-up: [`network`] holds the multigraph model,
//! [`profile`] parses length profiles, [`families`] builds truncated dual
//! graphs, [`solver`] decides the type problem numerically, and [`laminate`]
//! turns transient flows into train-track weights.

pub mod families;
pub mod laminate;
pub mod network;
pub mod numeric;
pub mod profile;
pub mod solver;

#[cfg(test)]
pub(crate) mod testutil;

pub use network::{ConductanceNetwork, Edge, EdgeId, VertexId};
pub use profile::ProfileExpr;
