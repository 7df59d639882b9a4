//! Best-arm identification when the chosen arm must also clear a threshold in
//! every constrained subpopulation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod complexity;
pub mod config;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod model;
pub mod oracle;
pub mod presets;
pub mod stopping;
pub mod strategies;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{BanditInstance, EmpiricalState, ProblemShape};
