//! Reduced Ginzburg-Landau model of a superconductor carrying a weak applied
//! current: steady states, their linear stability and time evolution.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod leading_order;
pub mod linsolve;
pub mod operators;
pub mod oracles;
pub mod report;
pub mod sparse;
pub mod stability;
pub mod steady;
pub mod tdgl;

pub use error::{GlcError, Result};
