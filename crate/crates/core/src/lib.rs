//! Simulation and convergence analysis of ADD-OPT, an accelerated
//! distributed optimizer for agents communicating over a strongly-connected
//! directed graph, alongside the DEXTRA and gradient-push baselines.
//!
//! The crate is organised bottom-up:
//!
//! * [`digraph`]: topology, column-stochastic weights, Perron limit and the
//!   contraction norm for `A - A_inf`.
//! * [`objectives`]: per-agent smooth strongly-convex objectives and a
//!   centralized reference solver.
//! * [`algorithms`]: synchronous-round engines and traces.
//! * [`analysis`]: the 3x3 comparison system `t_k <= G t_{k-1} + H_{k-1} s_{k-1}`,
//!   its spectral radius and the closed-form step-size bound.
//! * [`experiments`]: the comparison, step-size and sparsity studies.

pub mod algorithms;
pub mod analysis;
pub mod digraph;
mod error;
pub mod experiments;
pub mod objectives;
pub mod stats;

pub use error::{Error, Result};
