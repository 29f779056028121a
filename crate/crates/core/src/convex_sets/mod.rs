//! Convex, bounded subsets of the nonnegative orthant.
//!
//! Every set exposes three oracles: membership, linear maximization (optionally
//! restricted to members dominating a floor), and projection in the weighted
//! L2 norm of the base probability.

mod expectation;
mod polytope;
mod section24;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use expectation::ExpectationSet;
pub use polytope::{coordinate_suprema, Polytope, VERTEX_ENUM_MAX_BASES, VERTEX_ENUM_MAX_DIM};
pub use section24::{maximize_concave_1d, KPoint, Section24Set, LINEAR_MAX_GRID};

use crate::error::{Error, Result};
use crate::prob_space::{DensityMeasure, ProbSpace, RandVar};

/// Default absolute tolerance on constraint residuals.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearMax {
    pub value: f64,
    pub point: Vec<f64>,
}

pub trait ConvexSet: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn contains(&self, f: &[f64], tol: f64) -> bool;

    /// Maximizes `sum_i c_i h_i` over members `h`, restricted to `h >= floor`
    /// when a floor is given. [`Error::EmptySet`] when no member dominates the floor.
    fn maximize_linear(&self, c: &[f64], floor: Option<&[f64]>) -> Result<LinearMax>;

    /// Minimizer of `sum_i w_i (f_i - phi_i)^2` over the set.
    fn project(&self, weights: &[f64], phi: &[f64]) -> Result<Vec<f64>>;

    fn bound_per_atom(&self) -> Vec<f64>;

    fn is_solid(&self) -> bool;

    fn solid_hull(&self) -> Result<Arc<dyn ConvexSet>>;

    /// All extreme points, when the representation makes them cheap to list.
    fn vertices(&self) -> Option<Vec<Vec<f64>>> {
        None
    }
}

/// `{f >= 0 : f <= g for some member g}`.
pub fn solid_hull(set: &dyn ConvexSet) -> Result<Arc<dyn ConvexSet>> {
    set.solid_hull()
}

/// `sup { <mu, f> : f in set }` and a maximizer.
pub fn linear_max(set: &dyn ConvexSet, space: &ProbSpace, mu: &DensityMeasure) -> Result<(f64, RandVar)> {
    space.check_dim("mu", mu.len())?;
    space.check_dim("set", set.dim())?;
    let m = set.maximize_linear(&space.functional(mu), None)?;
    Ok((m.value, RandVar::clamped(m.point)?))
}

pub fn project(set: &dyn ConvexSet, space: &ProbSpace, phi: &RandVar) -> Result<RandVar> {
    space.check_dim("phi", phi.len())?;
    space.check_dim("set", set.dim())?;
    RandVar::clamped(set.project(space.weights(), phi)?)
}

/// `max_{f in set} sum_i p_i (phi_i - f*_i)(f_i - f*_i)`: nonpositive exactly
/// when `fstar` is the projection of `phi`.
pub fn variational_gap(set: &dyn ConvexSet, space: &ProbSpace, phi: &[f64], fstar: &[f64]) -> Result<f64> {
    let c: Vec<f64> = (0..phi.len()).map(|i| space.weights()[i] * (phi[i] - fstar[i])).collect();
    let m = set.maximize_linear(&c, None)?;
    Ok(m.value - c.iter().zip(fstar).map(|(a, b)| a * b).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub bounded: bool,
    pub bounds: Vec<Option<f64>>,
}

/// Coordinatewise boundedness of a constructed set. Constructed sets are
/// bounded by invariant; see [`polytope_boundedness`] for raw systems.
pub fn is_bounded(set: &dyn ConvexSet, space: &ProbSpace) -> Result<BoundReport> {
    space.check_dim("set", set.dim())?;
    let bounds: Vec<Option<f64>> = set.bound_per_atom().into_iter().map(|b| b.is_finite().then_some(b)).collect();
    Ok(BoundReport { bounded: bounds.iter().all(Option::is_some), bounds })
}

/// Boundedness of `{f >= 0 : A f <= b}` without constructing the polytope.
pub fn polytope_boundedness(a: &[Vec<f64>], b: &[f64]) -> Result<BoundReport> {
    let n = a.first().map(Vec::len).ok_or_else(|| Error::Validation("no constraint rows".into()))?;
    let bounds = coordinate_suprema(n, a, b, &[], &[])?;
    Ok(BoundReport { bounded: bounds.iter().all(Option::is_some), bounds })
}

/// A random member: a Dirichlet-weighted mixture of maximizers of random
/// linear functionals (of either sign).
pub fn sample_member<R: Rng + ?Sized>(set: &dyn ConvexSet, rng: &mut R) -> Result<Vec<f64>> {
    let n = set.dim();
    let k = n + 1;
    let mut out = vec![0.0; n];
    let weights: Vec<f64> = (0..k).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let total: f64 = weights.iter().sum();
    for w in weights {
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = set.maximize_linear(&c, None)?;
        for (o, v) in out.iter_mut().zip(&m.point) {
            *o += w / total * v;
        }
    }
    Ok(out.into_iter().map(|v| v.max(0.0)).collect())
}

/// JSON descriptor of a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SetDescriptor {
    Polytope {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(rename = "A_eq", default, skip_serializing_if = "Vec::is_empty")]
        a_eq: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        b_eq: Vec<f64>,
    },
    Expectation {
        bound: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<Vec<f64>>,
    },
    Box {
        upper: Vec<f64>,
    },
    Section24 {
        xi: Vec<f64>,
    },
}

impl SetDescriptor {
    /// Builds and validates the set against the space (dimension, boundedness).
    pub fn build(&self, space: &ProbSpace) -> Result<Arc<dyn ConvexSet>> {
        let set: Arc<dyn ConvexSet> = match self {
            SetDescriptor::Polytope { a, b, a_eq, b_eq } => {
                Arc::new(Polytope::with_equalities(a.clone(), b.clone(), a_eq.clone(), b_eq.clone())?)
            }
            SetDescriptor::Expectation { bound, q } => Arc::new(match q {
                Some(q) => ExpectationSet::new(q.clone(), *bound)?,
                None => ExpectationSet::under(space, *bound)?,
            }),
            SetDescriptor::Box { upper } => Arc::new(Polytope::boxed(upper)?),
            SetDescriptor::Section24 { xi } => Arc::new(Section24Set::new(xi.clone())?),
        };
        space.check_dim("set", set.dim())?;
        Ok(set)
    }
}
