//! Symbolic and numeric mechanics on fibre bundles over the time axis.
//!
//! [`symexpr`] is the expression engine. [`bundle`] holds charts, jets and
//! reference frames, [`lagrangian`] and [`hamiltonian`] derive and integrate
//! the equations of motion, and [`quantum`] quantizes Hamiltonians as grid
//! operators on half-densities. [`cli`] drives all of it from a system file.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod cli;
pub mod error;
pub mod hamiltonian;
pub mod lagrangian;
mod linalg;
pub mod quantum;
pub mod symexpr;
pub mod trajectory;

pub use error::{Error, Result};
