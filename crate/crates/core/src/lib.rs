//! Synchronization statistics of two dissipatively coupled quantum Van der
//! Pol oscillators along continuously monitored quantum trajectories.

// `!(x > 0.0)` is the NaN-rejecting form used by every validator.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod hilbert;
pub mod lindblad;
pub mod metrics;
pub mod noise;
pub mod sse;

pub use error::{Error, Result};
