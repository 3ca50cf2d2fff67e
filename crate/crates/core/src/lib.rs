//! Discrete branched transport and urban planning.
//!
//! Three views of the same transport problem live side by side:
//! mass fluxes on weighted directed graphs ([`flux_graph`]), irrigation
//! patterns made of mass-weighted polyline fibres ([`pattern`]), and network
//! sets with the two-speed metric they induce ([`network`]). The
//! [`equivalence`] module converts between them and checks that their costs
//! line up; [`solver`] searches for cheap fluxes between two atomic measures.

// Index loops over parallel arrays read better than zipped iterators here.
#![allow(clippy::needless_range_loop)]

pub mod equivalence;
pub mod error;
pub mod exec;
pub mod flux_graph;
pub mod geometry;
pub mod graph_reduce;
pub mod instances;
pub mod io;
pub mod measures;
pub mod network;
pub mod pattern;
pub mod solver;
pub mod transport;

pub use error::{Error, Result};
pub use exec::Execution;
pub use flux_graph::{CostSpec, Edge, FluxGraph};
pub use measures::{Atom, DiscreteMeasure};
pub use network::NetworkSet;
pub use pattern::{Fibre, IrrigationPattern};
pub use solver::{SolveConfig, SolveOutcome};
pub use transport::{PlanEntry, TransportPlan};
