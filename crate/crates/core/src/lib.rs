//! Higher-order influence-function estimators for the mean response under
//! missing-at-random data, built on a tensor Haar basis.
#![no_std]

extern crate alloc;

pub mod basis;
pub mod cells;
pub mod checks;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod mar;
pub mod projection;
pub mod rng;
pub mod ustat;

pub use error::{Error, Result};
