//! Photon-number statistics of twin beams measured with time-multiplexed
//! click detectors: forward model, reconstruction, and simulation.

pub mod detector;
pub mod dist;
pub mod error;
pub mod io;
pub mod montecarlo;
pub mod pipeline;
mod nnls;
pub mod reconstruct;
pub mod sources;
pub mod stats;

pub use error::{Error, Result};
