//! Optimal transport and Wasserstein gradient flows on metric graphs.

pub mod error;
pub mod graph;
pub mod grid;
pub mod measure;
pub mod piecewise;
pub mod regularize;
pub mod dynamics;
pub mod gradient_flow;
pub mod transport;

pub use error::{Error, Result};
