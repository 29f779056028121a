//! Maximal elements, outer support points and their certificates for convex
//! sets of nonnegative random variables on finite probability spaces.

pub mod bishop_phelps;
pub mod convex_sets;
pub mod error;
pub mod gamma_family;
pub mod maximal;
pub mod prob_space;
pub mod problem;
pub mod solver;
pub mod suite;
pub mod utility;

pub use error::{Error, Result};
pub use prob_space::{DensityMeasure, ExtendedReal, ProbSpace, RandVar};
