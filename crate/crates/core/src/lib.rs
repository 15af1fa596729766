//! Multilevel coding with per-layer LMMSE equalization for ISI channels.

pub mod allocation;
pub mod capacity;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod lmmse;
pub mod mlc;
pub mod rng;

pub use error::{Error, Result};
