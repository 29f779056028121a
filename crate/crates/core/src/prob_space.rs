//! Finite probability spaces, nonnegative random variables and densities.
//!
//! A [`ProbSpace`] is a finite atom set with strictly positive weights. Random
//! variables and measures are plain vectors indexed by atom; the measure is
//! stored as a density against the base weights, so `dmu = h dP`.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum(weights) == 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbSpace {
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct ProbSpaceRepr {
    weights: Vec<f64>,
}

impl<'de> Deserialize<'de> for ProbSpace {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = ProbSpaceRepr::deserialize(de)?;
        ProbSpace::new(repr.weights).map_err(serde::de::Error::custom)
    }
}

impl ProbSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Validation("probability space needs at least one atom".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Validation(format!("atom {i} has non-positive weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Validation(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { weights })
    }

    /// Equal weights `1/n` on `n` atoms.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("probability space needs at least one atom".into()));
        }
        let w = 1.0 / n as f64;
        let mut weights = vec![w; n];
        // push the rounding residue onto the last atom so the sum check holds for any n
        let residue = 1.0 - weights.iter().sum::<f64>();
        weights[n - 1] += residue;
        Self::new(weights)
    }

    /// Normalizes arbitrary positive masses into a probability space.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Validation("masses must have a positive finite total".into()));
        }
        Self::new(masses.iter().map(|m| m / total).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn check_dim(&self, what: &str, len: usize) -> Result<()> {
        if len == self.len() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { what: what.to_string(), expected: self.len(), found: len })
        }
    }

    /// `sum_i p_i h_i f_i` without dimension checks. Internal fast path.
    pub(crate) fn pair(&self, density: &[f64], f: &[f64]) -> f64 {
        self.weights.iter().zip(density).zip(f).map(|((p, h), x)| p * h * x).sum()
    }

    /// Weighted squared L2 distance `sum_i p_i (f_i - g_i)^2`.
    pub fn l2_dist_sq(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(g).map(|((p, a), b)| p * (a - b) * (a - b)).sum()
    }

    /// Weighted second moment `sum_i p_i f_i^2`.
    pub fn second_moment(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(p, x)| p * x * x).sum()
    }

    /// Objective coefficients `p_i h_i` of the functional `f -> <mu, f>`.
    pub fn functional(&self, density: &[f64]) -> Vec<f64> {
        self.weights.iter().zip(density).map(|(p, h)| p * h).collect()
    }
}

/// A nonnegative random variable on a finite space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RandVar(Vec<f64>);

impl RandVar {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Validation(format!("random variable has invalid value {v} at atom {i}")));
        }
        Ok(Self(values))
    }

    /// Clamps negative solver noise to zero. Non-finite entries are still rejected.
    pub fn clamped(values: Vec<f64>) -> Result<Self> {
        Self::new(values.into_iter().map(|v| if v < 0.0 { 0.0 } else { v }).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| c * v).collect())
    }

    /// Coordinatewise `self <= other`, exact.
    pub fn le(&self, other: &RandVar) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }
}

impl Deref for RandVar {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for RandVar {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RandVar> for Vec<f64> {
    fn from(r: RandVar) -> Self {
        r.0
    }
}

/// A measure `dmu = h dP` given by its nonnegative density `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DensityMeasure(Vec<f64>);

impl DensityMeasure {
    pub fn new(density: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = density.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Validation(format!("density has invalid value {v} at atom {i}")));
        }
        Ok(Self(density))
    }

    /// The base probability itself, density identically one.
    pub fn base(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn zero(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn density(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }
}

impl Deref for DensityMeasure {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for DensityMeasure {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DensityMeasure> for Vec<f64> {
    fn from(m: DensityMeasure) -> Self {
        m.0
    }
}

/// A value in `[0, +inf]`. This crate only ever produces finite values; the
/// infinite variant exists for callers working with unbounded pairings.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// The finite value, or `f64::INFINITY`.
    pub fn get(&self) -> f64 {
        match self {
            ExtendedReal::Finite(v) => *v,
            ExtendedReal::Infinite => f64::INFINITY,
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            ExtendedReal::Finite(v)
        } else {
            ExtendedReal::Infinite
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::Infinite => write!(f, "inf"),
        }
    }
}

/// Convergence-in-probability metric `E[1 ∧ |f - g|]`.
pub fn metric(space: &ProbSpace, f: &[f64], g: &[f64]) -> Result<f64> {
    space.check_dim("f", f.len())?;
    space.check_dim("g", g.len())?;
    Ok(metric_unchecked(space, f, g))
}

pub(crate) fn metric_unchecked(space: &ProbSpace, f: &[f64], g: &[f64]) -> f64 {
    space.weights().iter().zip(f).zip(g).map(|((p, a), b)| p * (a - b).abs().min(1.0)).sum()
}

/// The pairing `<mu, f> = sum_i p_i h_i f_i`.
pub fn pairing(space: &ProbSpace, mu: &DensityMeasure, f: &RandVar) -> Result<ExtendedReal> {
    space.check_dim("mu", mu.len())?;
    space.check_dim("f", f.len())?;
    Ok(ExtendedReal::Finite(space.pair(mu, f)))
}

pub fn expectation(space: &ProbSpace, f: &RandVar) -> Result<f64> {
    space.check_dim("f", f.len())?;
    Ok(space.weights().iter().zip(f.iter()).map(|(p, x)| p * x).sum())
}
