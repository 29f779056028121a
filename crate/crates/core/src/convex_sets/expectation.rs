use std::sync::Arc;

use super::{ConvexSet, LinearMax};
use crate::error::{Error, Result};
use crate::prob_space::ProbSpace;

/// The budget set `{f >= 0 : sum_i q_i f_i <= r}` with `q > 0`.
///
/// With `q` equal to the space weights this is `{E[f] <= r}`, the solid hull
/// of the sphere `{E[f] = r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationSet {
    q: Vec<f64>,
    bound: f64,
}

impl ExpectationSet {
    pub fn new(q: Vec<f64>, bound: f64) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::Validation("expectation set needs at least one atom".into()));
        }
        if q.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Validation("expectation weights must be strictly positive".into()));
        }
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::Validation("expectation bound must be positive".into()));
        }
        Ok(Self { q, bound })
    }

    /// `{E[f] <= r}` under the space weights.
    pub fn under(space: &ProbSpace, bound: f64) -> Result<Self> {
        Self::new(space.weights().to_vec(), bound)
    }

    pub fn weights(&self) -> &[f64] {
        &self.q
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    fn budget_used(&self, f: &[f64]) -> f64 {
        self.q.iter().zip(f).map(|(q, x)| q * x).sum()
    }
}

impl ConvexSet for ExpectationSet {
    fn dim(&self) -> usize {
        self.q.len()
    }

    fn contains(&self, f: &[f64], tol: f64) -> bool {
        f.len() == self.q.len()
            && f.iter().all(|v| v.is_finite() && *v >= -tol)
            && self.budget_used(f) - self.bound <= tol
    }

    fn maximize_linear(&self, c: &[f64], floor: Option<&[f64]>) -> Result<LinearMax> {
        let n = self.q.len();
        if c.len() != n || floor.is_some_and(|f| f.len() != n) {
            return Err(Error::DimensionMismatch { what: "vector".into(), expected: n, found: c.len() });
        }
        let mut point = floor.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
        let budget = self.bound - self.budget_used(&point);
        if budget < -1e-9 {
            return Err(Error::EmptySet);
        }
        // all remaining budget goes to the first atom with the best ratio c_i / q_i
        let mut best: Option<(usize, f64)> = None;
        for (i, (ci, qi)) in c.iter().zip(&self.q).enumerate() {
            let ratio = ci / qi;
            if best.is_none_or(|(_, b)| ratio > b) {
                best = Some((i, ratio));
            }
        }
        if let Some((i, ratio)) = best {
            if ratio > 0.0 && budget > 0.0 {
                point[i] += budget / self.q[i];
            }
        }
        let value = c.iter().zip(&point).map(|(a, b)| a * b).sum();
        Ok(LinearMax { value, point })
    }

    /// Closed form: `f_i = (phi_i - lambda q_i / p_i)^+` with the budget multiplier
    /// `lambda >= 0` found by walking the sorted breakpoints.
    fn project(&self, weights: &[f64], phi: &[f64]) -> Result<Vec<f64>> {
        let n = self.q.len();
        if weights.len() != n || phi.len() != n {
            return Err(Error::DimensionMismatch { what: "vector".into(), expected: n, found: phi.len() });
        }
        let clipped: Vec<f64> = phi.iter().map(|v| v.max(0.0)).collect();
        if self.budget_used(&clipped) <= self.bound {
            return Ok(clipped);
        }
        let breakpoints: Vec<f64> = (0..n).map(|i| clipped[i] * weights[i] / self.q[i]).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| breakpoints[b].total_cmp(&breakpoints[a]).then(a.cmp(&b)));
        let (mut sum_qphi, mut sum_qq) = (0.0, 0.0);
        let mut lambda = 0.0;
        for (k, &i) in order.iter().enumerate() {
            sum_qphi += self.q[i] * clipped[i];
            sum_qq += self.q[i] * self.q[i] / weights[i];
            lambda = (sum_qphi - self.bound) / sum_qq;
            let next = order.get(k + 1).map_or(0.0, |&j| breakpoints[j]);
            if lambda >= next {
                break;
            }
        }
        Ok((0..n).map(|i| (clipped[i] - lambda * self.q[i] / weights[i]).max(0.0)).collect())
    }

    fn bound_per_atom(&self) -> Vec<f64> {
        self.q.iter().map(|q| self.bound / q).collect()
    }

    fn is_solid(&self) -> bool {
        true
    }

    fn solid_hull(&self) -> Result<Arc<dyn ConvexSet>> {
        Ok(Arc::new(self.clone()))
    }

    fn vertices(&self) -> Option<Vec<Vec<f64>>> {
        let n = self.q.len();
        let mut out = vec![vec![0.0; n]];
        for i in 0..n {
            let mut v = vec![0.0; n];
            v[i] = self.bound / self.q[i];
            out.push(v);
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_sets::Polytope;

    #[test]
    fn linear_max_puts_budget_on_best_ratio() {
        let s = ExpectationSet::new(vec![0.5, 0.5], 1.0).unwrap();
        let m = s.maximize_linear(&[0.5, 1.0], None).unwrap();
        assert_eq!(m.point, vec![0.0, 2.0]);
        let m = s.maximize_linear(&[0.0, 0.0], None).unwrap();
        assert_eq!(m.value, 0.0);
        assert_eq!(s.maximize_linear(&[1.0, 1.0], Some(&[3.0, 0.0])).unwrap_err(), Error::EmptySet);
    }

    #[test]
    fn projection_examples() {
        let s = ExpectationSet::new(vec![0.5, 0.5], 1.0).unwrap();
        let p = [0.5, 0.5];
        assert_eq!(s.project(&p, &[2.0, 2.0]).unwrap(), vec![1.0, 1.0]);
        for n in 1..=20 {
            let phi = [2.0 + 2.0 / n as f64, 0.0];
            let f = s.project(&p, &phi).unwrap();
            assert!((f[0] - 2.0).abs() < 1e-14 && f[1] == 0.0, "n={n}: {f:?}");
        }
        assert_eq!(s.project(&p, &[0.2, 0.3]).unwrap(), vec![0.2, 0.3]);
    }

    #[test]
    fn closed_form_projection_matches_active_set() {
        let q = vec![0.2, 0.5, 0.3, 0.9];
        let w = [0.1, 0.4, 0.3, 0.2];
        let s = ExpectationSet::new(q.clone(), 1.5).unwrap();
        let poly = Polytope::new(vec![q], vec![1.5]).unwrap();
        for phi in [[3.0, 0.1, 2.0, 0.5], [0.0, 5.0, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0]] {
            let a = s.project(&w, &phi).unwrap();
            let b = poly.project(&w, &phi).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10, "{a:?} vs {b:?}");
            }
        }
    }
}
