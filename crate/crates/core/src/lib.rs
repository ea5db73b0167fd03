//! Stabilization of quantum states, subspaces and subsystems under
//! Markovian (Lindblad) dynamics: analysis, controller synthesis, and
//! simulation-based verification.
// `!(x > t)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod operators;
pub mod simulate;
pub mod synthesis;

pub use error::{Error, Result};
