//! Directed topology, column-stochastic weights and the spectral quantities
//! of the weight matrix.

mod graph;
mod spectral;
mod weights;

pub use graph::{is_strongly_connected, Digraph};
pub use spectral::{
    contraction_norm, perron_limit, perron_limit_with_cap, spectral_norm, spectral_radius, tau_eps,
    ContractionNorm, PerronLimit, SpectralData,
};
pub use weights::{uniform_weights, WeightMatrix};
