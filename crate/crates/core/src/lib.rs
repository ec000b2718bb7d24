//! Reproducible parallel random number streams on CPU thread pools.
//!
//! * [`rng`]: the MRG31k3p generator, stream creation with jump-ahead, and a
//!   text file format for saving stream states.
//! * [`grid`]: a deterministic emulation of a two-dimensional work-item index
//!   space, where every work item owns one stream.
//! * [`dist`]: uniform, normal (paired Box-Muller) and exponential fills.
//! * [`fisher`]: Monte Carlo Fisher exact test on two-way tables.
//! * [`grf`]: batched Matérn covariance, LDLᵀ factorization, and Gaussian
//!   random field simulation.
//!
//! Every output is a pure function of the input stream states and the work
//! grid; the number of worker threads never changes a result.

pub mod cli;
pub mod dist;
pub mod error;
pub mod fisher;
pub mod format;
pub mod grf;
pub mod grid;
pub mod rng;

pub use error::{Error, Result};
pub use grid::{Executor, MatrixBuffer, Shape, WorkGrid};
pub use rng::{Creator, State, StreamSet, StreamState};
