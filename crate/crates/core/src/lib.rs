//! Consensus-based distributed state estimation and observer-based control
//! of linear time-invariant multi-channel systems.
//!
//! One plant is observed and driven by a network of agents: observer nodes
//! each see a local output and a local input and exchange state estimates
//! over an undirected graph; controller nodes each drive their own input
//! channel using an estimate received from some observer node. The crate
//! provides
//!
//! - dense matrix kernels (rank-revealing factorizations, Riccati and
//!   Lyapunov solvers) in [`matrix`],
//! - the communication graph and the collective strong-detectability test
//!   in [`graph`],
//! - the strong-detectability decomposition that each observer node is
//!   built from, with an independent certificate verifier, in
//!   [`decomposition`],
//! - adaptive distributed observer nodes in [`observer`],
//! - linear, tracking, and sliding-mode controller nodes in [`controller`],
//! - a deterministic fixed-step closed-loop simulator in [`sim`].

pub mod controller;
pub mod decomposition;
pub mod error;
pub mod graph;
pub mod matrix;
pub mod observer;
pub mod sim;

pub use error::{Error, Result};
pub use matrix::{Matrix, RankTolerance, Vector};
