//! Simulation and analysis of critical long-range percolation metrics.
//!
//! The crate is organised around the data flow of a typical experiment:
//!
//! * [`model`] holds the domain types (parameters, points, windows, edge
//!   configurations, lattice graphs, path traces) and [`rng`] the seeded
//!   stream contract every sampler uses.
//! * [`sampler`] draws the discrete lattice model and the continuous Poisson
//!   edge process, and superposes samples to couple different `beta`.
//! * [`metric`] computes chemical distances (BFS) and the continuous
//!   zero-cost-hop metric (Dijkstra over edge endpoints), geodesics, distance
//!   fields and a brute-force reference.
//! * [`renorm`] coarse-grains continuous samples onto the lattice and checks
//!   the deterministic comparison inequalities between the two metrics.
//! * [`estimators`] runs the Monte Carlo experiments: medians, exponent fits,
//!   diameter tails, path and hop counts, scaling tests.

pub mod error;
pub mod estimators;
pub mod metric;
pub mod model;
pub mod renorm;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use model::{
    EdgeConfiguration, LatticeBox, LatticeGraph, LongEdge, ModelParams, PathTrace, Point,
    TraceKind, Window,
};
pub use rng::{derive_stream, Stream};
