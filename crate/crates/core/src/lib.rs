// `!(x > 0.0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod hamiltonian;
pub mod integrator;
pub mod io;
pub mod planner;
pub mod schedule;
pub mod spectral;

pub use error::{Error, Result};
