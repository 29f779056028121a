//! JSON problem files shared by the command-line tools.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bishop_phelps::{DEFAULT_STEPS, DEFAULT_TOL};
use crate::convex_sets::{ConvexSet, SetDescriptor};
use crate::error::{Error, Result};
use crate::prob_space::{DensityMeasure, ProbSpace, RandVar};
use crate::utility::{UtilityField, UtilitySpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemOptions {
    pub tol: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, steps: DEFAULT_STEPS, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub space: ProbSpace,
    pub set: SetDescriptor,
    /// A point of the set (or any nonnegative vector, for projection).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilitySpec>,
    #[serde(default)]
    pub options: ProblemOptions,
}

/// A problem file with every cross-reference checked.
#[derive(Debug, Clone)]
pub struct Problem {
    pub space: ProbSpace,
    pub set: Arc<dyn ConvexSet>,
    pub g: Option<RandVar>,
    pub mu: Option<DensityMeasure>,
    pub utility: Option<UtilityField>,
    pub options: ProblemOptions,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("problem file: {e}")))
    }

    pub fn validate(&self) -> Result<Problem> {
        let space = self.space.clone();
        let n = space.len();
        let set = self.set.build(&space)?;
        let g = match &self.g {
            Some(g) => {
                space.check_dim("g", g.len())?;
                Some(RandVar::new(g.clone())?)
            }
            None => None,
        };
        let mu = match &self.mu {
            Some(mu) => {
                space.check_dim("mu", mu.len())?;
                Some(DensityMeasure::new(mu.clone())?)
            }
            None => None,
        };
        let utility = self.utility.as_ref().map(|u| u.build(n)).transpose()?;
        let o = self.options;
        if !(o.tol > 0.0 && o.tol.is_finite()) {
            return Err(Error::Validation(format!("tol must be positive, got {}", o.tol)));
        }
        if o.steps == 0 {
            return Err(Error::Validation("steps must be positive".into()));
        }
        Ok(Problem { space, set, g, mu, utility, options: o })
    }
}

impl Problem {
    pub fn parse(text: &str) -> Result<Self> {
        ProblemFile::parse(text)?.validate()
    }

    pub fn require_g(&self) -> Result<&RandVar> {
        self.g.as_ref().ok_or_else(|| Error::Validation("problem file lacks the point g".into()))
    }

    pub fn require_mu(&self) -> Result<&DensityMeasure> {
        self.mu.as_ref().ok_or_else(|| Error::Validation("problem file lacks the measure mu".into()))
    }

    pub fn require_utility(&self) -> Result<&UtilityField> {
        self.utility.as_ref().ok_or_else(|| Error::Validation("problem file lacks a utility".into()))
    }
}
