//! Exact and Monte Carlo fluctuation theory for one-dimensional random
//! walks: ladder epochs, ladder heights, the renewal function and the
//! local limit laws they obey.
//!
//! The crate is `no_std` and only needs `alloc`. Thread pools, files and
//! the command line live in the `ladder` crate.

#![no_std]

extern crate alloc;

pub mod asymptotics;
pub mod error;
pub mod fft;
pub mod increments;
pub mod lattice;
pub mod montecarlo;
pub mod numeric;
pub mod scalar;
pub mod series;

pub use error::{Error, Result};
pub use increments::{IncrementModel, ModelKind, ModelSpec};
pub use scalar::Scalar;
