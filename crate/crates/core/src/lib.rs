//! Quadratic quasi-potential approximation near stable limit cycles and
//! minimum action escape paths.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::type_complexity, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod cycle;
pub mod error;
pub mod frame;
pub mod gmam;
pub mod hamiltonian;
pub mod interp;
pub mod io;
pub mod localqp;
pub mod linalg;
pub mod ode;
pub mod optimizer;
pub mod pipeline;
pub mod riccati;
pub mod systems;
pub mod validate;

pub use error::{Error, Result};
