//! Discrete Peierls-bracket workbench for Lagrangian field theories on a 1+1
//! dimensional Lorentzian lattice.

// Index loops mirror the tensor formulas; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod geometry;
pub mod green;
pub mod lattice;
pub mod observables;
pub mod peierls;
pub mod scenario;
pub mod variational;
pub mod wavemaps;

pub use error::{Error, Result};
