//! The parametric set `{1 - a + (a + b) xi : 0 <= b <= sqrt(a) <= 1}` on a
//! finite discretization of `xi`, and its solid hull.
//!
//! Every oracle reduces to a one-dimensional concave or convex problem in the
//! parameter `a`, solved on a grid bracket refined by golden-section search.

use std::sync::Arc;

use serde::Serialize;

use super::{ConvexSet, LinearMax};
use crate::error::{Error, Result};

/// Grid resolution for bracketing the linear maximizer along `a`.
pub const LINEAR_MAX_GRID: usize = 1024;
const PROJECTION_GRID: usize = 64;
const GOLDEN_ITERS: usize = 100;
const FEAS_TOL: f64 = 1e-12;

/// A point `(alpha, beta)` of the parameter domain `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KPoint {
    pub alpha: f64,
    pub beta: f64,
}

impl KPoint {
    pub fn on_curve(alpha: f64) -> Self {
        Self { alpha, beta: alpha.max(0.0).sqrt() }
    }

    pub fn in_k(&self, tol: f64) -> bool {
        self.alpha >= -tol && self.alpha <= 1.0 + tol && self.beta >= -tol && self.beta <= self.alpha.max(0.0).sqrt() + tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section24Set {
    xi: Vec<f64>,
    solid: bool,
}

/// Maximizes a concave function on `[lo, hi]` by grid bracketing then golden section.
pub fn maximize_concave_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, grid: usize) -> (f64, f64) {
    if hi <= lo {
        return (lo, f(lo));
    }
    let grid = grid.max(2);
    let step = (hi - lo) / grid as f64;
    let mut best = (lo, f(lo));
    for k in 1..=grid {
        let x = if k == grid { hi } else { lo + step * k as f64 };
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERS {
        if b - a <= f64::EPSILON * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

impl Section24Set {
    pub fn new(xi: Vec<f64>) -> Result<Self> {
        if xi.len() < 2 {
            return Err(Error::Validation("section24 set needs at least two atoms".into()));
        }
        if xi.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Validation("xi must be strictly positive".into()));
        }
        let mut sorted = xi.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("xi values must be pairwise distinct".into()));
        }
        Ok(Self { xi, solid: false })
    }

    /// Default discretization: `xi_k` at the `(k - 1/2)/n` quantiles of Exp(1).
    pub fn exponential_quantiles(n: usize) -> Result<Self> {
        let xi = (1..=n).map(|k| -(1.0 - (k as f64 - 0.5) / n as f64).ln()).collect();
        Self::new(xi)
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn solid(&self) -> Self {
        Self { xi: self.xi.clone(), solid: true }
    }

    /// `1 - alpha + (alpha + beta) xi`.
    pub fn point(&self, k: KPoint) -> Vec<f64> {
        self.xi.iter().map(|x| 1.0 - k.alpha + (k.alpha + k.beta) * x).collect()
    }

    /// Least-squares parameters of `f` viewed as an affine function of `xi`, and the fit residual.
    pub fn parameters_of(&self, f: &[f64]) -> (KPoint, f64) {
        let n = self.xi.len() as f64;
        let mx = self.xi.iter().sum::<f64>() / n;
        let mf = f.iter().sum::<f64>() / n;
        let sxx: f64 = self.xi.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxf: f64 = self.xi.iter().zip(f).map(|(x, y)| (x - mx) * (y - mf)).sum();
        let slope = sxf / sxx;
        let intercept = mf - slope * mx;
        let residual = self.xi.iter().zip(f).map(|(x, y)| (y - intercept - slope * x).abs()).fold(0.0, f64::max);
        let alpha = 1.0 - intercept;
        (KPoint { alpha, beta: slope - alpha }, residual)
    }

    /// Smallest admissible `beta` at `alpha` so the curve point dominates `floor`.
    fn beta_floor(&self, alpha: f64, floor: Option<&[f64]>) -> f64 {
        floor.map_or(0.0, |fl| {
            self.xi
                .iter()
                .zip(fl)
                .map(|(x, f)| (f - 1.0 + alpha - alpha * x) / x)
                .fold(0.0, f64::max)
        })
    }

    /// Interval of `alpha` on which some `beta` makes the point dominate `floor`.
    fn feasible_alphas(&self, floor: Option<&[f64]>) -> Result<(f64, f64)> {
        if floor.is_none() {
            return Ok((0.0, 1.0));
        }
        let slack = |a: f64| a.max(0.0).sqrt() - self.beta_floor(a, floor);
        let (apeak, speak) = maximize_concave_1d(slack, 0.0, 1.0, LINEAR_MAX_GRID);
        if speak < -FEAS_TOL {
            return Err(Error::EmptySet);
        }
        let edge = |mut inside: f64, mut outside: f64| {
            if slack(outside) >= -FEAS_TOL {
                return outside;
            }
            for _ in 0..200 {
                let mid = 0.5 * (inside + outside);
                if mid == inside || mid == outside {
                    break;
                }
                if slack(mid) >= -FEAS_TOL {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            inside
        };
        Ok((edge(apeak, 0.0), edge(apeak, 1.0)))
    }

    /// Maximizes `k0 + ka * alpha + kb * beta` over `K ∩ {point >= floor}`.
    pub fn maximize_over_k(&self, k0: f64, ka: f64, kb: f64, floor: Option<&[f64]>) -> Result<(KPoint, f64)> {
        let (lo, hi) = self.feasible_alphas(floor)?;
        let beta_of = |a: f64| {
            if kb >= 0.0 {
                a.max(0.0).sqrt()
            } else {
                self.beta_floor(a, floor).min(a.max(0.0).sqrt())
            }
        };
        let objective = |a: f64| k0 + ka * a + kb * beta_of(a);
        let (alpha, value) = maximize_concave_1d(objective, lo, hi, LINEAR_MAX_GRID);
        Ok((KPoint { alpha, beta: beta_of(alpha) }, value))
    }

    /// Per-atom supremum `max_K 1 - a + (a + b) xi_i`, attained on the curve `b = sqrt(a)`.
    pub fn atom_bound(xi: f64) -> f64 {
        // 1 + s xi + s^2 (xi - 1) over s = sqrt(a) in [0, 1]
        if xi < 1.0 {
            let s = xi / (2.0 * (1.0 - xi));
            if s <= 1.0 {
                return 1.0 + xi * xi / (4.0 * (1.0 - xi));
            }
        }
        (2.0 * xi).max(1.0)
    }

    fn project_alpha(&self, weights: &[f64], phi: &[f64], alpha: f64) -> (KPoint, f64) {
        if self.solid {
            // larger beta only shrinks the shortfall, so beta sits on the curve
            let k = KPoint::on_curve(alpha);
            let g = self.point(k);
            let cost = weights.iter().zip(phi).zip(&g).map(|((p, x), y)| p * (x - y).max(0.0).powi(2)).sum();
            (k, cost)
        } else {
            let base: Vec<f64> = self.xi.iter().map(|x| 1.0 - alpha + alpha * x).collect();
            let num: f64 = (0..self.xi.len()).map(|i| weights[i] * self.xi[i] * (phi[i] - base[i])).sum();
            let den: f64 = (0..self.xi.len()).map(|i| weights[i] * self.xi[i] * self.xi[i]).sum();
            let beta = (num / den).clamp(0.0, alpha.max(0.0).sqrt());
            let k = KPoint { alpha, beta };
            let cost = self.point(k).iter().zip(phi).zip(weights).map(|((g, x), p)| p * (x - g).powi(2)).sum();
            (k, cost)
        }
    }
}

impl ConvexSet for Section24Set {
    fn dim(&self) -> usize {
        self.xi.len()
    }

    fn contains(&self, f: &[f64], tol: f64) -> bool {
        if f.len() != self.xi.len() || f.iter().any(|v| !v.is_finite() || *v < -tol) {
            return false;
        }
        if self.solid {
            let floor: Vec<f64> = f.iter().map(|v| v - tol).collect();
            return self.feasible_alphas(Some(&floor)).is_ok();
        }
        let (k, residual) = self.parameters_of(f);
        residual <= tol && k.in_k(tol)
    }

    fn maximize_linear(&self, c: &[f64], floor: Option<&[f64]>) -> Result<LinearMax> {
        let n = self.xi.len();
        if c.len() != n || floor.is_some_and(|f| f.len() != n) {
            return Err(Error::DimensionMismatch { what: "vector".into(), expected: n, found: c.len() });
        }
        if self.solid {
            // coordinates with c_i <= 0 stay at the floor; the rest follow the curve point
            let cp: Vec<f64> = c.iter().map(|v| v.max(0.0)).collect();
            let c0: f64 = cp.iter().sum();
            let c1: f64 = cp.iter().zip(&self.xi).map(|(a, x)| a * x).sum();
            let (k, _) = self.maximize_over_k(c0, c1 - c0, c1, floor)?;
            let g = self.point(k);
            let point: Vec<f64> = (0..n)
                .map(|i| if c[i] > 0.0 { g[i] } else { floor.map_or(0.0, |f| f[i].min(g[i]).max(0.0)) })
                .collect();
            let value = c.iter().zip(&point).map(|(a, b)| a * b).sum();
            return Ok(LinearMax { value, point });
        }
        let c0: f64 = c.iter().sum();
        let c1: f64 = c.iter().zip(&self.xi).map(|(a, x)| a * x).sum();
        let (k, _) = self.maximize_over_k(c0, c1 - c0, c1, floor)?;
        let point = self.point(k);
        let value = c.iter().zip(&point).map(|(a, b)| a * b).sum();
        Ok(LinearMax { value, point })
    }

    fn project(&self, weights: &[f64], phi: &[f64]) -> Result<Vec<f64>> {
        let n = self.xi.len();
        if weights.len() != n || phi.len() != n {
            return Err(Error::DimensionMismatch { what: "vector".into(), expected: n, found: phi.len() });
        }
        let (alpha, _) = maximize_concave_1d(|a| -self.project_alpha(weights, phi, a).1, 0.0, 1.0, PROJECTION_GRID);
        let (k, _) = self.project_alpha(weights, phi, alpha);
        let g = self.point(k);
        if self.solid {
            Ok(phi.iter().zip(&g).map(|(x, y)| x.min(*y).max(0.0)).collect())
        } else {
            Ok(g)
        }
    }

    fn bound_per_atom(&self) -> Vec<f64> {
        self.xi.iter().map(|x| Self::atom_bound(*x)).collect()
    }

    fn is_solid(&self) -> bool {
        self.solid
    }

    fn solid_hull(&self) -> Result<Arc<dyn ConvexSet>> {
        Ok(Arc::new(self.solid()))
    }
}
