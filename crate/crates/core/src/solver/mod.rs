//! Linear and quadratic programming back ends used by the set oracles.

pub mod lp;
pub mod qp;

pub use lp::{maximize, LinearProgram, LpSolution};
pub use qp::{minimize, QpSolution, QuadraticProgram};
