//! Periodic gait search.

mod periodicity;
mod qp;
mod scenario;
mod solution;

pub use periodicity::*;
pub use qp::{solve_equality_qp, ConstraintBlock};
pub use scenario::*;
pub use solution::*;
