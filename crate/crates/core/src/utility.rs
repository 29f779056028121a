//! Concave nondecreasing utility fields, their maximization over a convex set,
//! and the supporting measure `dmu = U'(g) dP` read off the optimizer.

use serde::{Deserialize, Serialize};

use crate::bishop_phelps::{certify_osp, OspCertificate};
use crate::convex_sets::{ConvexSet, MEMBERSHIP_TOL};
use crate::error::{Error, Result};
use crate::maximal::maximal_lift;
use crate::prob_space::{DensityMeasure, ProbSpace, RandVar};

/// Iterates stay at least this far above zero on atoms where the objective is
/// `-inf` at zero.
pub const DOMAIN_FLOOR: f64 = 1e-12;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 80;

/// One atom's utility function before weighting.
#[derive(Debug, Clone, PartialEq)]
pub enum Base {
    Log,
    /// `x^p / p` for `p` in `(0, 1)`.
    Power(f64),
    /// `(1 - exp(-a x)) / a`.
    Exponential(f64),
    Zero,
    /// Piecewise linear through `(x_k, u_k)`, constant after the last knot.
    Table { x: Vec<f64>, u: Vec<f64> },
}

impl Base {
    fn value(&self, x: f64) -> f64 {
        match self {
            Base::Log => {
                if x > 0.0 {
                    x.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Base::Power(p) => x.max(0.0).powf(*p) / p,
            Base::Exponential(a) => -(-a * x).exp_m1() / a,
            Base::Zero => 0.0,
            Base::Table { x: xs, u } => {
                let k = segment(xs, x);
                if k + 1 >= xs.len() {
                    return u[xs.len() - 1];
                }
                let s = (u[k + 1] - u[k]) / (xs[k + 1] - xs[k]);
                u[k] + s * (x - xs[k])
            }
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self {
            Base::Log => {
                if x > 0.0 {
                    1.0 / x
                } else {
                    f64::INFINITY
                }
            }
            Base::Power(p) => {
                if x > 0.0 {
                    x.powf(p - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            Base::Exponential(a) => (-a * x).exp(),
            Base::Zero => 0.0,
            Base::Table { x: xs, u } => {
                let k = segment(xs, x);
                if k + 1 >= xs.len() {
                    0.0
                } else {
                    (u[k + 1] - u[k]) / (xs[k + 1] - xs[k])
                }
            }
        }
    }

    /// `-U''(x)`, zero for piecewise-linear pieces.
    fn curvature(&self, x: f64) -> f64 {
        match self {
            Base::Log => 1.0 / (x * x),
            Base::Power(p) => (1.0 - p) * x.powf(p - 2.0),
            Base::Exponential(a) => a * (-a * x).exp(),
            Base::Zero | Base::Table { .. } => 0.0,
        }
    }

    fn infinite_at_zero(&self) -> bool {
        matches!(self, Base::Log)
    }

    fn infinite_marginal_at_zero(&self) -> bool {
        matches!(self, Base::Log | Base::Power(_))
    }
}

/// Index `k` with `x_k <= x < x_{k+1}`, or the last index past the end.
fn segment(xs: &[f64], x: f64) -> usize {
    xs.partition_point(|v| *v <= x).saturating_sub(1)
}

/// `U(omega, x) = w_i U_i(x)` on atom `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityField {
    atoms: Vec<Base>,
    weights: Vec<f64>,
}

impl UtilityField {
    fn homogeneous(n: usize, base: Base) -> Self {
        Self { atoms: vec![base; n], weights: vec![1.0; n] }
    }

    pub fn log(n: usize) -> Self {
        Self::homogeneous(n, Base::Log)
    }

    pub fn power(n: usize, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Validation(format!("power exponent {p} must lie in (0, 1)")));
        }
        Ok(Self::homogeneous(n, Base::Power(p)))
    }

    pub fn exponential(n: usize, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Validation(format!("exponential rate {a} must be positive")));
        }
        Ok(Self::homogeneous(n, Base::Exponential(a)))
    }

    pub fn zero(n: usize) -> Self {
        Self::homogeneous(n, Base::Zero)
    }

    /// Per-atom piecewise-linear utilities on common knots `x` (starting at 0).
    /// A single row of values is shared by all atoms.
    pub fn table(n: usize, x: &[f64], u: &[Vec<f64>]) -> Result<Self> {
        if x.len() < 2 || x[0] != 0.0 {
            return Err(Error::Validation("table knots must start at 0 and have at least two points".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("table knots must be finite and strictly increasing".into()));
        }
        let rows: Vec<&Vec<f64>> = match u.len() {
            1 => vec![&u[0]; n],
            m if m == n => u.iter().collect(),
            m => return Err(Error::DimensionMismatch { what: "table rows".into(), expected: n, found: m }),
        };
        let mut atoms = Vec::with_capacity(n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != x.len() {
                return Err(Error::DimensionMismatch { what: format!("table row {i}"), expected: x.len(), found: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("table row {i} has non-finite values")));
            }
            let slopes: Vec<f64> = (0..x.len() - 1).map(|k| (row[k + 1] - row[k]) / (x[k + 1] - x[k])).collect();
            if slopes.iter().any(|s| *s < 0.0) {
                return Err(Error::Validation(format!("table row {i} is decreasing")));
            }
            if slopes.windows(2).any(|w| w[1] > w[0] + 1e-12 * w[0].abs().max(1.0)) {
                return Err(Error::Validation(format!("table row {i} is not concave")));
            }
            atoms.push(Base::Table { x: x.to_vec(), u: row.clone() });
        }
        Ok(Self { atoms, weights: vec![1.0; n] })
    }

    /// Multiplies atom `i` by `w_i >= 0`.
    pub fn weighted(mut self, w: &[f64]) -> Result<Self> {
        if w.len() != self.len() {
            return Err(Error::DimensionMismatch { what: "utility weights".into(), expected: self.len(), found: w.len() });
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Validation("utility weights must be finite and nonnegative".into()));
        }
        for (a, b) in self.weights.iter_mut().zip(w) {
            *a *= b;
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn value(&self, i: usize, x: f64) -> f64 {
        if self.weights[i] == 0.0 {
            0.0
        } else {
            self.weights[i] * self.atoms[i].value(x)
        }
    }

    pub fn derivative(&self, i: usize, x: f64) -> f64 {
        if self.weights[i] == 0.0 {
            0.0
        } else {
            self.weights[i] * self.atoms[i].derivative(x)
        }
    }

    fn curvature(&self, i: usize, x: f64) -> f64 {
        if self.weights[i] == 0.0 {
            0.0
        } else {
            self.weights[i] * self.atoms[i].curvature(x)
        }
    }

    /// Whether `U_i(0) = -inf`.
    pub fn infinite_at_zero(&self, i: usize) -> bool {
        self.weights[i] > 0.0 && self.atoms[i].infinite_at_zero()
    }

    /// Whether `U_i'(0) = inf`.
    pub fn infinite_marginal_at_zero(&self, i: usize) -> bool {
        self.weights[i] > 0.0 && self.atoms[i].infinite_marginal_at_zero()
    }

    /// `sum_i p_i U_i(f_i)`.
    pub fn objective(&self, space: &ProbSpace, f: &[f64]) -> f64 {
        (0..f.len())
            .map(|i| {
                let v = self.value(i, f[i]);
                if v == 0.0 {
                    0.0
                } else {
                    space.weights()[i] * v
                }
            })
            .sum()
    }

    pub fn marginals(&self, g: &[f64]) -> Vec<f64> {
        (0..g.len()).map(|i| self.derivative(i, g[i])).collect()
    }

    /// Sampled checks of monotonicity, concavity and the derivative's sign and
    /// monotonicity on `(0, scale]`.
    pub fn check_shape(&self, scale: f64) -> Result<()> {
        let xs: Vec<f64> = (1..=40).map(|k| scale * k as f64 / 40.0).collect();
        for i in 0..self.len() {
            for w in xs.windows(3) {
                let (a, m, b) = (self.value(i, w[0]), self.value(i, w[1]), self.value(i, w[2]));
                let slack = 1e-12 * (a.abs() + b.abs() + 1.0);
                if b < a - slack {
                    return Err(Error::Validation(format!("utility on atom {i} decreases")));
                }
                if m < 0.5 * (a + b) - slack {
                    return Err(Error::Validation(format!("utility on atom {i} is not concave")));
                }
                let (da, db) = (self.derivative(i, w[0]), self.derivative(i, w[2]));
                if da < 0.0 || db > da + 1e-12 * da.abs().max(1.0) {
                    return Err(Error::Validation(format!("marginal utility on atom {i} is not nonincreasing and nonnegative")));
                }
            }
        }
        Ok(())
    }
}

/// JSON form of a utility field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum UtilitySpec {
    Log {},
    Power { p: f64 },
    Exponential { a: f64 },
    Zero {},
    Weighted { base: Box<UtilitySpec>, weights: Vec<f64> },
    Table { x: Vec<f64>, u: Vec<Vec<f64>> },
}

impl UtilitySpec {
    pub fn build(&self, n: usize) -> Result<UtilityField> {
        match self {
            UtilitySpec::Log {} => Ok(UtilityField::log(n)),
            UtilitySpec::Power { p } => UtilityField::power(n, *p),
            UtilitySpec::Exponential { a } => UtilityField::exponential(n, *a),
            UtilitySpec::Zero {} => Ok(UtilityField::zero(n)),
            UtilitySpec::Weighted { base, weights } => base.build(n)?.weighted(weights),
            UtilitySpec::Table { x, u } => UtilityField::table(n, x, u),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UtilityOptions {
    /// Target for the first-order residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for UtilityOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityOptimum {
    pub g: RandVar,
    pub objective: f64,
    /// Density `U_i'(g_i)`.
    pub mu: DensityMeasure,
    pub first_order_gap: f64,
    pub iterations: usize,
    /// Absent when the marginals do not form a valid certificate (for example a flat utility).
    pub certificate: Option<OspCertificate>,
}

/// `max_{f in set} sum_i p_i U_i'(g_i) (f_i - g_i)`, computed with the linear oracle.
/// Infinite when a marginal is infinite on an atom some member can raise.
pub fn fo_residual(set: &dyn ConvexSet, space: &ProbSpace, u: &UtilityField, g: &[f64]) -> Result<f64> {
    let c = marginal_functional(set, space, u, g);
    let Some(c) = c else { return Ok(f64::INFINITY) };
    let m = set.maximize_linear(&c, None)?;
    Ok(m.value - dot(&c, g))
}

/// Same as [`fo_residual`], maximizing over the given probe members only.
pub fn fo_residual_probes(space: &ProbSpace, u: &UtilityField, g: &[f64], probes: &[Vec<f64>]) -> f64 {
    let p = space.weights();
    probes
        .iter()
        .map(|f| {
            (0..g.len())
                .map(|i| {
                    let d = f[i] - g[i];
                    if d == 0.0 {
                        0.0
                    } else {
                        p[i] * u.derivative(i, g[i]) * d
                    }
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn marginal_functional(set: &dyn ConvexSet, space: &ProbSpace, u: &UtilityField, g: &[f64]) -> Option<Vec<f64>> {
    let bounds = set.bound_per_atom();
    let mut c = Vec::with_capacity(g.len());
    for i in 0..g.len() {
        let d = u.derivative(i, g[i]);
        if d.is_finite() {
            c.push(space.weights()[i] * d);
        } else if bounds[i] > 0.0 {
            return None;
        } else {
            c.push(0.0);
        }
    }
    Some(c)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A member that is strictly positive on every atom where some member is.
fn interior_start(set: &dyn ConvexSet) -> Result<Vec<f64>> {
    let n = set.dim();
    let bounds = set.bound_per_atom();
    let live: Vec<usize> = (0..n).filter(|i| bounds[*i] > 0.0).collect();
    if live.is_empty() {
        return Ok(set.maximize_linear(&vec![0.0; n], None)?.point);
    }
    let mut out = vec![0.0; n];
    for &i in &live {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let m = set.maximize_linear(&e, None)?;
        for (o, v) in out.iter_mut().zip(&m.point) {
            *o += v.max(0.0) / live.len() as f64;
        }
    }
    Ok(out)
}

/// Maximizes `sum_i p_i U_i(f_i)` by diagonally scaled projected gradient
/// ascent with Armijo backtracking, then lifts the optimizer to a maximal member.
pub fn maximize_utility(
    set: &dyn ConvexSet,
    space: &ProbSpace,
    u: &UtilityField,
    opts: &UtilityOptions,
) -> Result<UtilityOptimum> {
    let n = space.len();
    space.check_dim("set", set.dim())?;
    if u.len() != n {
        return Err(Error::DimensionMismatch { what: "utility".into(), expected: n, found: u.len() });
    }
    let bounds = set.bound_per_atom();
    for i in 0..n {
        if u.infinite_at_zero(i) && !(bounds[i] > 0.0) {
            return Err(Error::Domain(format!("no member is strictly positive on atom {i}")));
        }
    }
    // atoms where zero is never optimal stay above the floor
    let guarded: Vec<bool> = (0..n).map(|i| u.infinite_marginal_at_zero(i) && bounds[i] > 0.0).collect();
    let p = space.weights();
    let mut f = interior_start(set)?;
    let mut value = u.objective(space, &f);
    if !value.is_finite() {
        return Err(Error::Domain("objective is not finite at the interior start".into()));
    }
    let mut iterations = 0;
    let mut gap = fo_residual(set, space, u, &f)?;
    while gap > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: gap });
        }
        iterations += 1;
        let grad = u.marginals(&f);
        let curv: Vec<f64> = (0..n).map(|i| u.curvature(i, f[i])).collect();
        let top = curv.iter().copied().filter(|c| c.is_finite()).fold(0.0, f64::max);
        let scale: Vec<f64> = if top > 0.0 {
            curv.iter().map(|c| if c.is_finite() { c.max(1e-8 * top) } else { top }).collect()
        } else {
            vec![1.0; n]
        };
        let w: Vec<f64> = (0..n).map(|i| p[i] * scale[i]).collect();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let phi: Vec<f64> = (0..n)
                .map(|i| if grad[i].is_finite() { f[i] + t * grad[i] / scale[i] } else { f[i] })
                .collect();
            let trial: Vec<f64> = set.project(&w, &phi)?.into_iter().map(|v| v.max(0.0)).collect();
            let in_domain = (0..n).all(|i| !guarded[i] || trial[i] >= DOMAIN_FLOOR);
            if in_domain {
                let tv = u.objective(space, &trial);
                let slope: f64 = (0..n)
                    .map(|i| if grad[i].is_finite() { p[i] * grad[i] * (trial[i] - f[i]) } else { 0.0 })
                    .sum();
                let noise = 8.0 * f64::EPSILON * (value.abs() + 1.0);
                if tv.is_finite() && tv >= value + ARMIJO * slope - noise {
                    accepted = Some((trial, tv));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((trial, tv)) = accepted else { break };
        let moved = trial.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        f = trial;
        value = tv;
        gap = fo_residual(set, space, u, &f)?;
        if moved <= 1e-15 * (1.0 + f.iter().copied().fold(0.0, f64::max)) {
            break;
        }
    }
    let lifted = maximal_lift(set, space, &RandVar::clamped(f.clone())?)?;
    let objective = u.objective(space, &lifted);
    if objective < value - opts.tol.max(1e-12) * (1.0 + value.abs()) {
        return Err(Error::Numerical(format!("lift decreased the objective from {value} to {objective}")));
    }
    if (0..n).all(|i| u.infinite_marginal_at_zero(i) || !(bounds[i] > 0.0))
        && (0..n).any(|i| bounds[i] > 0.0 && lifted[i] < DOMAIN_FLOOR)
    {
        return Err(Error::Numerical("optimizer vanishes on an atom with infinite marginal utility".into()));
    }
    let first_order_gap = fo_residual(set, space, u, &lifted)?;
    let density: Vec<f64> = u.marginals(&lifted).into_iter().map(|d| if d.is_finite() { d } else { 0.0 }).collect();
    let certificate = extract_dual_certificate(set, space, u, &lifted, opts.tol).ok();
    Ok(UtilityOptimum { g: lifted, objective, mu: DensityMeasure::new(density)?, first_order_gap, iterations, certificate })
}

/// Builds `dmu = U'(g) dP` and certifies `g` as an outer support point with it.
pub fn extract_dual_certificate(
    set: &dyn ConvexSet,
    space: &ProbSpace,
    u: &UtilityField,
    g: &RandVar,
    tol: f64,
) -> Result<OspCertificate> {
    space.check_dim("g", g.len())?;
    if u.len() != g.len() {
        return Err(Error::DimensionMismatch { what: "utility".into(), expected: g.len(), found: u.len() });
    }
    let mut density = Vec::with_capacity(g.len());
    for i in 0..g.len() {
        let d = u.derivative(i, g[i]);
        if !d.is_finite() {
            return Err(Error::InfiniteMarginal(i));
        }
        density.push(d);
    }
    if (0..g.len()).all(|i| density[i] == 0.0 || g[i] == 0.0) {
        return Err(Error::FlatUtility);
    }
    certify_osp(set, space, g, &DensityMeasure::new(density)?, tol.max(MEMBERSHIP_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_sets::{ExpectationSet, Polytope};
    use crate::maximal::{is_maximal, MAXIMALITY_TOL};
    use proptest::prelude::*;

    fn fields(n: usize) -> Vec<UtilityField> {
        vec![
            UtilityField::log(n),
            UtilityField::power(n, 0.5).unwrap(),
            UtilityField::power(n, 0.2).unwrap(),
            UtilityField::exponential(n, 1.3).unwrap(),
            UtilityField::log(n).weighted(&vec![2.0; n]).unwrap(),
        ]
    }

    #[test]
    fn derivatives_match_central_differences() {
        for u in fields(1) {
            for k in 1..=20 {
                let x = 0.15 * k as f64;
                let h = 1e-5 * x;
                let fd = (u.value(0, x + h) - u.value(0, x - h)) / (2.0 * h);
                let d = u.derivative(0, x);
                assert!((fd - d).abs() <= 1e-5 * d.abs().max(1e-12), "{u:?} at {x}: {fd} vs {d}");
            }
            u.check_shape(5.0).unwrap();
        }
    }

    #[test]
    fn table_shapes() {
        let u = UtilityField::table(2, &[0.0, 1.0, 2.0], &[vec![0.0, 2.0, 3.0]]).unwrap();
        assert_eq!(u.value(1, 1.5), 2.5);
        assert_eq!(u.derivative(0, 0.5), 2.0);
        assert_eq!(u.derivative(0, 1.0), 1.0);
        assert_eq!(u.derivative(0, 7.0), 0.0);
        assert_eq!(u.value(0, 7.0), 3.0);
        u.check_shape(3.0).unwrap();
        assert!(UtilityField::table(1, &[0.0, 1.0, 2.0], &[vec![0.0, 1.0, 3.0]]).is_err());
        assert!(UtilityField::table(1, &[0.0, 1.0], &[vec![1.0, 0.0]]).is_err());
        assert!(UtilityField::table(1, &[0.5, 1.0], &[vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn spec_json() {
        let s: UtilitySpec = serde_json::from_str(r#"{"type":"weighted","base":{"type":"power","p":0.5},"weights":[1,2]}"#).unwrap();
        let u = s.build(2).unwrap();
        assert!((u.derivative(1, 4.0) - 1.0).abs() < 1e-15);
        assert!(serde_json::from_str::<UtilitySpec>(r#"{"type":"log","p":1}"#).is_err());
        assert!(serde_json::from_str::<UtilitySpec>(r#"{"type":"power","p":1.5}"#).unwrap().build(2).is_err());
    }

    #[test]
    fn log_on_expectation_set() {
        let space = ProbSpace::new(vec![0.5, 0.5]).unwrap();
        let set = ExpectationSet::new(vec![0.25, 0.75], 1.0).unwrap();
        let opt = maximize_utility(&set, &space, &UtilityField::log(2), &UtilityOptions::default()).unwrap();
        assert!((opt.g[0] - 2.0).abs() < 1e-8 && (opt.g[1] - 2.0 / 3.0).abs() < 1e-8, "{:?}", opt.g);
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((opt.objective - expected).abs() < 1e-10);
        assert!((opt.mu[0] - 0.5).abs() < 1e-8 && (opt.mu[1] - 1.5).abs() < 1e-8);
        let cert = opt.certificate.expect("certificate");
        assert!((cert.value - 1.0).abs() < 1e-8);
        assert!(opt.first_order_gap <= 1e-8);
    }

    #[test]
    fn power_on_symmetric_set() {
        let space = ProbSpace::new(vec![0.5, 0.5]).unwrap();
        let set = ExpectationSet::under(&space, 1.0).unwrap();
        let u = UtilityField::power(2, 0.5).unwrap();
        let opt = maximize_utility(&set, &space, &u, &UtilityOptions::default()).unwrap();
        assert!((opt.g[0] - 1.0).abs() < 1e-8 && (opt.g[1] - 1.0).abs() < 1e-8);
        let cert = extract_dual_certificate(&set, &space, &u, &opt.g, 1e-8).unwrap();
        assert!((cert.mu[0] - 1.0).abs() < 1e-7 && (cert.value - 1.0).abs() < 1e-7);
    }

    #[test]
    fn box_and_zero_utility() {
        let space = ProbSpace::new(vec![0.2, 0.3, 0.5]).unwrap();
        let bx = Polytope::boxed(&[1.0, 2.0, 0.5]).unwrap();
        for u in fields(3) {
            let opt = maximize_utility(&bx, &space, &u, &UtilityOptions::default()).unwrap();
            for (a, b) in opt.g.iter().zip([1.0, 2.0, 0.5]) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        let set = ExpectationSet::under(&space, 1.0).unwrap();
        let opt = maximize_utility(&set, &space, &UtilityField::zero(3), &UtilityOptions::default()).unwrap();
        assert!(is_maximal(&set, &space, &opt.g, MAXIMALITY_TOL).unwrap().is_maximal);
        assert!(opt.certificate.is_none());
        assert_eq!(fo_residual(&set, &space, &UtilityField::zero(3), &opt.g).unwrap(), 0.0);
        let err = extract_dual_certificate(&set, &space, &UtilityField::zero(3), &opt.g, 1e-8).unwrap_err();
        assert_eq!(err, Error::FlatUtility);
    }

    #[test]
    fn domain_and_marginal_errors() {
        let space = ProbSpace::new(vec![0.5, 0.5]).unwrap();
        let flat = Polytope::boxed(&[1.0, 0.0]).unwrap();
        let err = maximize_utility(&flat, &space, &UtilityField::log(2), &UtilityOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        let e = ExpectationSet::under(&space, 1.0).unwrap();
        let err =
            extract_dual_certificate(&e, &space, &UtilityField::log(2), &RandVar::new(vec![2.0, 0.0]).unwrap(), 1e-8)
                .unwrap_err();
        assert_eq!(err, Error::InfiniteMarginal(1));
    }

    #[test]
    fn residual_detects_suboptimal_points() {
        let space = ProbSpace::new(vec![0.5, 0.5]).unwrap();
        let set = ExpectationSet::new(vec![0.25, 0.75], 1.0).unwrap();
        let u = UtilityField::log(2);
        assert!(fo_residual(&set, &space, &u, &[2.0, 2.0 / 3.0]).unwrap() <= 1e-12);
        let bad = [1.0, 1.0];
        assert!(fo_residual(&set, &space, &u, &bad).unwrap() > 0.1);
        let probes = set.vertices().unwrap();
        assert!(fo_residual_probes(&space, &u, &bad, &probes) > 0.1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn log_matches_lagrange(raw_p in prop::collection::vec(0.05f64..1.0, 2..=4), raw_q in prop::collection::vec(0.05f64..1.0, 4)) {
            let space = ProbSpace::from_masses(&raw_p).unwrap();
            let n = space.len();
            let set = ExpectationSet::new(raw_q[..n].to_vec(), 1.0).unwrap();
            let opt = maximize_utility(&set, &space, &UtilityField::log(n), &UtilityOptions::default()).unwrap();
            for i in 0..n {
                let want = space.weights()[i] / raw_q[i];
                prop_assert!((opt.g[i] - want).abs() <= 1e-6 * want.max(1.0));
            }
            prop_assert!(opt.certificate.is_some());
        }

        #[test]
        fn power_matches_lagrange(raw_p in prop::collection::vec(0.05f64..1.0, 2..=4), raw_q in prop::collection::vec(0.05f64..1.0, 4), pw in 0.2f64..0.8) {
            // maximize sum p_i g_i^a / a subject to sum q_i g_i = 1:
            // g_i = (lambda q_i / p_i)^(1/(a-1)).
            let space = ProbSpace::from_masses(&raw_p).unwrap();
            let n = space.len();
            let q = &raw_q[..n];
            let set = ExpectationSet::new(q.to_vec(), 1.0).unwrap();
            let opt = maximize_utility(&set, &space, &UtilityField::power(n, pw).unwrap(), &UtilityOptions::default()).unwrap();
            let e = 1.0 / (pw - 1.0);
            let raw: Vec<f64> = (0..n).map(|i| (q[i] / space.weights()[i]).powf(e)).collect();
            let total: f64 = (0..n).map(|i| q[i] * raw[i]).sum();
            for i in 0..n {
                let want = raw[i] / total;
                prop_assert!((opt.g[i] - want).abs() <= 1e-6 * want.max(1.0), "{} vs {}", opt.g[i], want);
            }
        }

        #[test]
        fn lift_never_lowers_objective(raw_p in prop::collection::vec(0.05f64..1.0, 3), frac in prop::collection::vec(0.0f64..1.0, 3)) {
            let space = ProbSpace::from_masses(&raw_p).unwrap();
            let set = Polytope::new(vec![vec![1.0, 2.0, 1.0], vec![0.0, 1.0, 3.0]], vec![2.0, 1.5]).unwrap();
            let f: Vec<f64> = frac.iter().map(|v| v * 0.4).collect();
            let f = RandVar::new(f).unwrap();
            prop_assume!(set.contains(&f, 0.0));
            let g = maximal_lift(&set, &space, &f).unwrap();
            for u in fields(3) {
                let before = u.objective(&space, &f);
                prop_assert!(u.objective(&space, &g) >= before - 1e-12 * (1.0 + before.abs()));
            }
        }
    }
}
