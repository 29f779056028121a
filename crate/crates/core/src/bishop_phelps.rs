//! Outer support points and their certificates.
//!
//! For a maximal `g`, the sequence below inflates `g` to `phi_n = (1 + 1/n) g`,
//! projects onto the solid hull in the weighted L2 norm, and reads the
//! supporting measure off the projection residual `gamma_n = phi_n - f_n`.
//! Lifting `f_n` to a maximal `g_n` gives outer support points converging to
//! `g`. On a finite space every random variable is square integrable, so the
//! base probability is used as is.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convex_sets::{sample_member, ConvexSet, MEMBERSHIP_TOL};
use crate::error::{Error, Result};
use crate::maximal::{is_maximal, maximal_lift, maximal_lift_with_tol};
use crate::prob_space::{metric_unchecked, DensityMeasure, ProbSpace, RandVar};
use crate::utility::{maximize_utility, UtilityField, UtilityOptions};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_STEPS: usize = 64;
const MAX_RETRIES: usize = 3;

/// Why a candidate certificate was refused.
#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    #[error("not member")]
    NotMember,
    #[error("zero value")]
    ZeroValue,
    #[error("not maximal")]
    NotMaximal { atom: usize, slack: f64 },
    #[error("gap {gap:.3e}")]
    Gap { gap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OspCertificate {
    pub g: RandVar,
    pub mu: DensityMeasure,
    /// `<mu, g>`.
    pub value: f64,
    /// `sup_{f in set} <mu, f> - <mu, g>`.
    pub gap: f64,
    /// Set when `g = 0` is certified by the `{0}` convention rather than by `mu`.
    pub conventional: bool,
}

/// Checks `0 < sup_{f in set} <mu, f> = <mu, g> < inf` and maximality of `g`.
pub fn certify_osp(
    set: &dyn ConvexSet,
    space: &ProbSpace,
    g: &RandVar,
    mu: &DensityMeasure,
    tol: f64,
) -> Result<OspCertificate> {
    space.check_dim("g", g.len())?;
    space.check_dim("mu", mu.len())?;
    space.check_dim("set", set.dim())?;
    if !set.contains(g, tol.max(MEMBERSHIP_TOL)) {
        return Err(Rejection::NotMember.into());
    }
    let c = space.functional(mu);
    let sup = set.maximize_linear(&c, None)?.value;
    let value = space.pair(mu, g);
    if !(sup > 0.0 && value > 0.0) {
        return Err(Rejection::ZeroValue.into());
    }
    let report = is_maximal(set, space, g, tol)?;
    if !report.is_maximal {
        let (atom, slack) = report
            .per_atom_slack
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::MIN), |best, (i, s)| if s > best.1 { (i, s) } else { best });
        return Err(Rejection::NotMaximal { atom, slack }.into());
    }
    let gap = sup - value;
    if gap.abs() > tol || !sup.is_finite() {
        return Err(Rejection::Gap { gap }.into());
    }
    Ok(OspCertificate { g: g.clone(), mu: mu.clone(), value, gap, conventional: false })
}

/// The log-optimal member `g` and its certificate `dmu = (1/g) 1_{g > 0} dP`.
///
/// Atoms on which every member vanishes are excluded from the log objective.
/// For the set `{0}` the conventional certificate is returned.
pub fn osp_numeraire(set: &dyn ConvexSet, space: &ProbSpace, tol: f64) -> Result<OspCertificate> {
    space.check_dim("set", set.dim())?;
    let n = set.dim();
    let support: Vec<bool> = set.bound_per_atom().iter().map(|b| *b > 0.0).collect();
    if !support.iter().any(|s| *s) {
        return Ok(OspCertificate {
            g: RandVar::zeros(n),
            mu: DensityMeasure::base(n),
            value: 0.0,
            gap: 0.0,
            conventional: true,
        });
    }
    let weights: Vec<f64> = support.iter().map(|s| if *s { 1.0 } else { 0.0 }).collect();
    let field = UtilityField::log(n).weighted(&weights)?;
    let opt = maximize_utility(set, space, &field, &UtilityOptions { tol, ..UtilityOptions::default() })?;
    let density: Vec<f64> = opt.g.iter().map(|v| if *v > 0.0 { 1.0 / v } else { 0.0 }).collect();
    certify_osp(set, space, &opt.g, &DensityMeasure::new(density)?, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BishopPhelpsStep {
    /// Requested step index.
    pub n: usize,
    /// Index actually used for the inflation (doubled on degenerate retries).
    pub n_used: usize,
    pub phi: RandVar,
    pub f: RandVar,
    pub gamma: RandVar,
    pub mu: DensityMeasure,
    pub g_n: RandVar,
    pub cert: OspCertificate,
    /// `d(g_n, g)`.
    pub dist: f64,
    /// `sum_i p_i (f_i - g_i)^2`.
    pub l2err: f64,
    /// Largest clamp applied to enforce `f_n <= phi_n`.
    pub clamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BishopPhelpsTrace {
    pub g: RandVar,
    pub second_moment: f64,
    pub steps: Vec<BishopPhelpsStep>,
}

impl BishopPhelpsTrace {
    pub fn final_dist(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.dist)
    }

    pub fn first_dist(&self) -> f64 {
        self.steps.first().map_or(0.0, |s| s.dist)
    }

    pub fn worst_gap(&self) -> f64 {
        self.steps.iter().map(|s| s.cert.gap.abs()).fold(0.0, f64::max)
    }

    /// Writes `n,dist_n,l2err_n,value_n,gap_n`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,dist_n,l2err_n,value_n,gap_n")?;
        for s in &self.steps {
            writeln!(
                out,
                "{},{},{},{},{}",
                s.n,
                fmt12(s.dist),
                fmt12(s.l2err),
                fmt12(s.cert.value),
                fmt12(s.cert.gap)
            )?;
        }
        Ok(())
    }
}

/// Formats with 12 significant digits.
pub fn fmt12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    if rounded.abs() < 1e-4 || rounded.abs() >= 1e15 {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BishopPhelpsOptions {
    pub steps: usize,
    pub tol: f64,
}

impl Default for BishopPhelpsOptions {
    fn default() -> Self {
        Self { steps: DEFAULT_STEPS, tol: DEFAULT_TOL }
    }
}

/// Runs the inflation / projection / lift sequence for a maximal `g`.
pub fn bishop_phelps_sequence(
    set: &dyn ConvexSet,
    space: &ProbSpace,
    g: &RandVar,
    opts: &BishopPhelpsOptions,
) -> Result<BishopPhelpsTrace> {
    space.check_dim("g", g.len())?;
    space.check_dim("set", set.dim())?;
    if opts.steps == 0 {
        return Err(Error::Validation("steps must be positive".into()));
    }
    if !set.contains(g, opts.tol.max(MEMBERSHIP_TOL)) {
        return Err(Error::NotMember);
    }
    if g.is_zero() {
        return Err(Error::Validation("g must not vanish identically".into()));
    }
    let report = is_maximal(set, space, g, opts.tol)?;
    if !report.is_maximal {
        let (atom, slack) =
            report.per_atom_slack.iter().copied().enumerate().fold((0, f64::MIN), |b, (i, s)| if s > b.1 { (i, s) } else { b });
        return Err(Error::NotMaximal { atom, slack });
    }
    let hull = set.solid_hull()?;
    let second_moment = space.second_moment(g);
    let steps = (1..=opts.steps)
        .map(|n| bishop_phelps_step(set, hull.as_ref(), space, g, n, opts.tol, second_moment))
        .collect::<Result<Vec<_>>>()?;
    Ok(BishopPhelpsTrace { g: g.clone(), second_moment, steps })
}

fn bishop_phelps_step(
    set: &dyn ConvexSet,
    hull: &dyn ConvexSet,
    space: &ProbSpace,
    g: &RandVar,
    n: usize,
    tol: f64,
    second_moment: f64,
) -> Result<BishopPhelpsStep> {
    let fail = |reason: String| Error::Step { step: n, reason };
    let mut n_used = n;
    for _ in 0..=MAX_RETRIES {
        let inflate = 1.0 + 1.0 / n_used as f64;
        let phi: Vec<f64> = g.iter().map(|v| inflate * v).collect();
        let raw = hull.project(space.weights(), &phi).map_err(|e| fail(format!("projection: {e}")))?;
        let excess = raw.iter().zip(&phi).map(|(f, p)| f - p).fold(0.0f64, f64::max);
        if excess > tol {
            return Err(fail(format!("projection exceeds phi_n by {excess:.3e}")));
        }
        let f: Vec<f64> = raw.iter().zip(&phi).map(|(f, p)| f.min(*p).max(0.0)).collect();
        let gamma: Vec<f64> = phi.iter().zip(&f).map(|(p, f)| p - f).collect();
        if gamma.iter().all(|v| *v <= 0.0) {
            n_used *= 2;
            continue;
        }
        let l2err = space.l2_dist_sq(&f, g);
        let bound = second_moment / (n_used * n_used) as f64;
        if l2err > bound + tol {
            return Err(fail(format!("contraction bound violated: {l2err:.6e} > {bound:.6e}")));
        }
        let f = RandVar::new(f)?;
        let gamma = RandVar::new(gamma)?;
        let mu = DensityMeasure::new(gamma.values().to_vec())?;
        let g_n = maximal_lift(hull, space, &f)
            .or_else(|_| maximal_lift_with_tol(hull, space, &f, 10.0 * tol))
            .map_err(|e| fail(format!("lift: {e}")))?;
        let cert = certify_osp(set, space, &g_n, &mu, tol).map_err(|e| fail(e.to_string()))?;
        let dist = metric_unchecked(space, &g_n, g);
        return Ok(BishopPhelpsStep {
            n,
            n_used,
            phi: RandVar::new(phi)?,
            f,
            gamma,
            mu,
            g_n,
            cert,
            dist,
            l2err,
            clamp: excess.max(0.0),
        });
    }
    Err(fail(format!("gamma vanished after {MAX_RETRIES} retries")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSample {
    pub g: RandVar,
    pub first_dist: f64,
    pub final_dist: f64,
    pub max_coordinate: f64,
    pub final_l2err: f64,
    pub worst_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityScan {
    pub steps: usize,
    pub samples: Vec<ScanSample>,
    pub max_final_dist: f64,
}

impl DensityScan {
    /// Every sample ends no farther than it started and within `2/steps * max_i g_i`.
    pub fn within_envelope(&self) -> bool {
        let k = 2.0 / self.steps as f64;
        self.samples.iter().all(|s| s.final_dist <= s.first_dist + 1e-12 && s.final_dist <= k * s.max_coordinate + 1e-12)
    }
}

/// Runs the sequence from `samples` random maximal points (lifts of random members).
pub fn osp_density_scan(
    set: &dyn ConvexSet,
    space: &ProbSpace,
    samples: usize,
    opts: &BishopPhelpsOptions,
    seed: u64,
) -> Result<DensityScan> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let f = RandVar::clamped(sample_member(set, &mut rng)?)?;
        let g = maximal_lift(set, space, &f)?;
        if g.is_zero() {
            continue;
        }
        let trace = bishop_phelps_sequence(set, space, &g, opts)?;
        out.push(ScanSample {
            max_coordinate: g.iter().copied().fold(0.0, f64::max),
            first_dist: trace.first_dist(),
            final_dist: trace.final_dist(),
            final_l2err: trace.steps.last().map_or(0.0, |s| s.l2err),
            worst_gap: trace.worst_gap(),
            g,
        });
    }
    let max_final_dist = out.iter().map(|s| s.final_dist).fold(0.0, f64::max);
    Ok(DensityScan { steps: opts.steps, samples: out, max_final_dist })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_sets::{ExpectationSet, Polytope};
    use crate::maximal::MAXIMALITY_TOL;

    fn half() -> ProbSpace {
        ProbSpace::new(vec![0.5, 0.5]).unwrap()
    }

    fn rv(v: &[f64]) -> RandVar {
        RandVar::new(v.to_vec()).unwrap()
    }

    #[test]
    fn certify_examples() {
        let space = half();
        let e = ExpectationSet::under(&space, 1.0).unwrap();
        let c = certify_osp(&e, &space, &rv(&[1.0, 1.0]), &DensityMeasure::base(2), DEFAULT_TOL).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12 && c.gap.abs() < 1e-12);
        let err = certify_osp(&e, &space, &rv(&[1.0, 0.5]), &DensityMeasure::base(2), DEFAULT_TOL).unwrap_err();
        assert!(matches!(err, Error::Rejected(Rejection::NotMaximal { .. })), "{err:?}");
        let err = certify_osp(&e, &space, &rv(&[1.0, 1.0]), &DensityMeasure::zero(2), DEFAULT_TOL).unwrap_err();
        assert_eq!(err, Error::Rejected(Rejection::ZeroValue));
        let err = certify_osp(&e, &space, &rv(&[3.0, 1.0]), &DensityMeasure::base(2), DEFAULT_TOL).unwrap_err();
        assert_eq!(err, Error::Rejected(Rejection::NotMember));
        // maximal but wrongly supported
        let err = certify_osp(&e, &space, &rv(&[2.0, 0.0]), &DensityMeasure::new(vec![1.0, 2.0]).unwrap(), DEFAULT_TOL)
            .unwrap_err();
        assert!(matches!(err, Error::Rejected(Rejection::Gap { .. })));
    }

    #[test]
    fn numeraire_examples() {
        let space = half();
        let e = ExpectationSet::under(&space, 1.0).unwrap();
        let c = osp_numeraire(&e, &space, DEFAULT_TOL).unwrap();
        assert!((c.g[0] - 1.0).abs() < 1e-6 && (c.g[1] - 1.0).abs() < 1e-6);
        assert!((c.value - 1.0).abs() < 1e-8);
        let bx = Polytope::boxed(&[2.0, 0.5]).unwrap();
        let c = osp_numeraire(&bx, &space, DEFAULT_TOL).unwrap();
        assert_eq!(c.g.values(), &[2.0, 0.5]);
        assert!((c.mu[0] - 0.5).abs() < 1e-12 && (c.mu[1] - 2.0).abs() < 1e-12);
        assert!((c.value - 1.0).abs() < 1e-12);
        let zero = Polytope::boxed(&[0.0, 0.0]).unwrap();
        let c = osp_numeraire(&zero, &space, DEFAULT_TOL).unwrap();
        assert!(c.conventional && c.g.is_zero());
    }

    #[test]
    fn sequence_on_corner_point() {
        let space = half();
        let e = ExpectationSet::under(&space, 1.0).unwrap();
        let t = bishop_phelps_sequence(&e, &space, &rv(&[2.0, 0.0]), &BishopPhelpsOptions { steps: 5, tol: DEFAULT_TOL })
            .unwrap();
        for s in &t.steps {
            let n = s.n as f64;
            assert!((s.f[0] - 2.0).abs() < 1e-14 && s.f[1] == 0.0);
            assert!((s.gamma[0] - 2.0 / n).abs() < 1e-14 && s.gamma[1] == 0.0);
            assert!((s.cert.value - 2.0 / n).abs() < 1e-14);
            assert_eq!(s.g_n.values(), &[2.0, 0.0]);
            assert_eq!(s.dist, 0.0);
        }
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("n,dist_n,l2err_n,value_n,gap_n\n1,0,0,2,"));
    }

    #[test]
    fn sequence_on_symmetric_point_and_box() {
        let space = half();
        let e = ExpectationSet::under(&space, 1.0).unwrap();
        let t = bishop_phelps_sequence(&e, &space, &rv(&[1.0, 1.0]), &BishopPhelpsOptions { steps: 5, tol: DEFAULT_TOL })
            .unwrap();
        for s in &t.steps {
            let n = s.n as f64;
            assert!((s.f[0] - 1.0).abs() < 1e-14 && (s.f[1] - 1.0).abs() < 1e-14);
            assert!((s.gamma[0] - 1.0 / n).abs() < 1e-14 && (s.gamma[1] - 1.0 / n).abs() < 1e-14);
        }
        let u = [1.5, 0.25];
        let bx = Polytope::boxed(&u).unwrap();
        let t = bishop_phelps_sequence(&bx, &space, &rv(&u), &BishopPhelpsOptions { steps: 5, tol: DEFAULT_TOL }).unwrap();
        for s in &t.steps {
            let n = s.n as f64;
            assert!(s.dist == 0.0 && (s.gamma[0] - 1.5 / n).abs() < 1e-12 && (s.gamma[1] - 0.25 / n).abs() < 1e-12);
        }
    }

    #[test]
    fn sequence_rejects_non_maximal() {
        let space = half();
        let e = ExpectationSet::under(&space, 1.0).unwrap();
        let err = bishop_phelps_sequence(&e, &space, &rv(&[1.0, 0.5]), &BishopPhelpsOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NotMaximal { .. }));
    }

    #[test]
    fn non_solid_set_goes_through_the_hull() {
        let space = ProbSpace::new(vec![0.3, 0.7]).unwrap();
        // a wedge that is not downward closed
        let p = Polytope::new(vec![vec![1.0, 1.0], vec![-1.0, 1.0]], vec![2.0, 0.5]).unwrap();
        assert!(!p.is_solid());
        let g = maximal_lift(&p, &space, &rv(&[0.5, 0.5])).unwrap();
        assert!(is_maximal(&p, &space, &g, MAXIMALITY_TOL).unwrap().is_maximal);
        let t = bishop_phelps_sequence(&p, &space, &g, &BishopPhelpsOptions { steps: 16, tol: DEFAULT_TOL }).unwrap();
        assert!(t.final_dist() <= t.first_dist() + 1e-12);
        for s in &t.steps {
            assert!(s.l2err <= t.second_moment / (s.n_used * s.n_used) as f64 + 1e-8);
        }
    }

    #[test]
    fn twelve_digit_formatting() {
        assert_eq!(fmt12(0.1 + 0.2), "0.3");
        assert_eq!(fmt12(2.0), "2");
        assert_eq!(fmt12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt12(2.307182223051e-16), "2.30718222305e-16");
        assert_eq!(fmt12(-1e20), "-1e20");
    }
}
