//! Lattice random walks with drift along the horizontal axis, conditioned to
//! stay in the positive quadrant: exact dynamic programming, ladder-height
//! renewal functions, the quadrant harmonic function and limit-density
//! predictors.

pub mod asymptotics;
pub mod dp;
pub mod error;
pub mod harmonic;
pub mod io;
pub mod ladder;
pub mod model;
pub mod montecarlo;
pub mod pipeline;
pub mod quad;
pub mod verify;

pub use error::{Error, ErrorKind, Result};
