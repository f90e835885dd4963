//! Denoising network embedding: joint maximum-likelihood learning of node
//! representations and per-edge noise estimates from a corrupted graph,
//! with pluggable structure priors and the synthetic-experiment pipeline
//! around it.

pub mod error;
pub mod eval;
pub mod files;
pub mod graph;
pub mod model;
pub mod objective;
pub mod pipeline;
pub mod sampling;
pub mod synth;
pub mod util;

pub use error::{Error, Result};
