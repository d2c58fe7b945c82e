//! Incremental graph neural network inference over event-camera streams.
//!
//! Events are embedded as nodes of a spatio-temporal radius graph. A stack of
//! B-spline graph convolutions, voxel-grid max pooling and pointwise layers
//! runs over that graph. After a dense initialization, [`engine::AsyncState`]
//! consumes one event at a time and recomputes only the rows whose inputs
//! changed, reproducing the dense forward pass up to float tolerance.
//!
//! Module map:
//! - [`events`]: event types, CSV/binary formats, subsampling, windowing, synthetic streams
//! - [`graph`]: radius graph with degree cap, pseudo-coordinates, k-hop queries
//! - [`nn`]: spline convolution, voxel pooling, pointwise layers, dense forward pass
//! - [`engine`]: cached per-layer state and dirty-frontier updates
//! - [`flops`]: analytic FLOP model and instrumented counters
//! - [`model`]: architecture presets, initialization, weight files

pub mod engine;
pub mod error;
pub mod events;
pub mod flops;
pub mod graph;
pub mod model;
pub mod nn;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
