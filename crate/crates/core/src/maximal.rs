//! Maximal elements (the outer boundary) of a convex set: the per-atom
//! maximality oracle, maximal lifting, and a harness comparing how dominating
//! sequences converge.

use rand::Rng;
use serde::Serialize;

use crate::convex_sets::{ConvexSet, LinearMax, MEMBERSHIP_TOL};
use crate::error::{Error, Result};
use crate::prob_space::{metric_unchecked, ProbSpace, RandVar};

/// Default absolute tolerance on per-atom slack.
pub const MAXIMALITY_TOL: f64 = 1e-8;

/// Step in the generic lift functional `1 + i * LIFT_TILT`.
pub const LIFT_TILT: f64 = 1.0 / (1u64 << 20) as f64;

const MAX_POLISH_PASSES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximalityReport {
    pub is_maximal: bool,
    /// A member dominating `g` and differing from it, when `g` is not maximal.
    pub witness: Option<RandVar>,
    /// `max {h_i : h in set, h >= g} - g_i` for each atom.
    pub per_atom_slack: Vec<f64>,
}

/// Maximizes `c` over members dominating `floor`. Falls back to a floor
/// relaxed by `tol` when rounding makes the exact floor infeasible.
fn maximize_above(set: &dyn ConvexSet, c: &[f64], floor: &[f64], tol: f64) -> Result<LinearMax> {
    match set.maximize_linear(c, Some(floor)) {
        Err(Error::EmptySet) => {
            let relaxed: Vec<f64> = floor.iter().map(|v| (v - tol).max(0.0)).collect();
            set.maximize_linear(c, Some(&relaxed))
        }
        other => other,
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// Solves `max h_i` over `{h in set, h >= g}` separately for every atom.
pub fn is_maximal(set: &dyn ConvexSet, space: &ProbSpace, g: &RandVar, tol: f64) -> Result<MaximalityReport> {
    space.check_dim("g", g.len())?;
    space.check_dim("set", set.dim())?;
    if !set.contains(g, tol.max(MEMBERSHIP_TOL)) {
        return Err(Error::NotMember);
    }
    let n = g.len();
    let mut slack = Vec::with_capacity(n);
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    for i in 0..n {
        let m = maximize_above(set, &unit(n, i), g, tol)?;
        let s = m.value - g[i];
        slack.push(s);
        if s > tol && best.as_ref().is_none_or(|(_, bs, _)| s > *bs) {
            best = Some((i, s, m.point));
        }
    }
    let witness = match best {
        Some((_, _, point)) => Some(RandVar::clamped(point.iter().zip(g.iter()).map(|(h, x)| h.max(*x)).collect())?),
        None => None,
    };
    Ok(MaximalityReport { is_maximal: witness.is_none(), witness, per_atom_slack: slack })
}

/// Returns a maximal member `h >= f`: first the maximizer of a strictly
/// positive generic functional above `f`, then per-atom polishing passes.
pub fn maximal_lift(set: &dyn ConvexSet, space: &ProbSpace, f: &RandVar) -> Result<RandVar> {
    maximal_lift_with_tol(set, space, f, MAXIMALITY_TOL)
}

pub fn maximal_lift_with_tol(set: &dyn ConvexSet, space: &ProbSpace, f: &RandVar, tol: f64) -> Result<RandVar> {
    space.check_dim("f", f.len())?;
    space.check_dim("set", set.dim())?;
    if !set.contains(f, tol.max(MEMBERSHIP_TOL)) {
        return Err(Error::NotMember);
    }
    let n = f.len();
    let tilt: Vec<f64> = (0..n).map(|i| space.weights()[i] * (1.0 + i as f64 * LIFT_TILT)).collect();
    let stage1 = maximize_above(set, &tilt, f, tol)?;
    let mut h: Vec<f64> = stage1.point.iter().zip(f.iter()).map(|(a, b)| a.max(*b)).collect();
    for _ in 0..MAX_POLISH_PASSES {
        let mut improved = false;
        for i in 0..n {
            let m = maximize_above(set, &unit(n, i), &h, tol)?;
            if m.value - h[i] > tol {
                h = m.point.iter().zip(&h).map(|(a, b)| a.max(*b)).collect();
                improved = true;
            }
        }
        if !improved {
            return RandVar::clamped(h);
        }
    }
    let h = RandVar::clamped(h)?;
    let report = is_maximal(set, space, &h, tol)?;
    let worst = report.per_atom_slack.iter().fold(0.0f64, |a, b| a.max(*b));
    if report.is_maximal {
        Ok(h)
    } else {
        Err(Error::NoConvergence { iterations: MAX_POLISH_PASSES, residual: worst })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReport {
    /// `d(f_n, g)`.
    pub f_dist: Vec<f64>,
    /// `d(g_n, g)`.
    pub g_dist: Vec<f64>,
    /// Largest `d(g_n, g) / d(f_n, g)` over the final quarter (where `d(f_n, g) > 0`).
    pub tail_ratio: f64,
    /// Whether `d(g_n, g) <= factor * d(f_n, g) + slack` over the final quarter.
    pub tail_bounded: bool,
}

/// Compares `d(g_n, g)` with `d(f_n, g)` for dominating pairs `f_n <= g_n`.
/// The tail check uses `d(g_n, g) <= 10 d(f_n, g) + 1e-6`.
pub fn domination_convergence_check(
    space: &ProbSpace,
    f_seq: &[RandVar],
    g_seq: &[RandVar],
    g: &RandVar,
) -> Result<DominationReport> {
    const FACTOR: f64 = 10.0;
    const SLACK: f64 = 1e-6;
    const ORDER_TOL: f64 = 1e-9;
    if f_seq.len() != g_seq.len() {
        return Err(Error::Validation("sequences differ in length".into()));
    }
    space.check_dim("g", g.len())?;
    for (n, (f, h)) in f_seq.iter().zip(g_seq).enumerate() {
        space.check_dim("f_n", f.len())?;
        space.check_dim("g_n", h.len())?;
        if f.iter().zip(h.iter()).any(|(a, b)| *a > *b + ORDER_TOL) {
            return Err(Error::Validation(format!("order violation f_n <= g_n at n = {}", n + 1)));
        }
    }
    let f_dist: Vec<f64> = f_seq.iter().map(|f| metric_unchecked(space, f, g)).collect();
    let g_dist: Vec<f64> = g_seq.iter().map(|h| metric_unchecked(space, h, g)).collect();
    let start = f_dist.len() - f_dist.len() / 4;
    let start = if f_dist.len() / 4 == 0 { f_dist.len().saturating_sub(1) } else { start };
    let mut tail_ratio: f64 = 0.0;
    let mut tail_bounded = true;
    for k in start..f_dist.len() {
        if f_dist[k] > 0.0 {
            tail_ratio = tail_ratio.max(g_dist[k] / f_dist[k]);
        }
        tail_bounded &= g_dist[k] <= FACTOR * f_dist[k] + SLACK;
    }
    Ok(DominationReport { f_dist, g_dist, tail_ratio, tail_bounded })
}

/// Forward convex combinations: element `n` mixes `seq[n..n + window]` with
/// random convex weights.
pub fn forward_convex_combinations<R: Rng + ?Sized>(seq: &[Vec<f64>], window: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..seq.len())
        .map(|n| {
            let tail = &seq[n..(n + window.max(1)).min(seq.len())];
            let w: Vec<f64> = tail.iter().map(|_| rng.gen::<f64>() + 1e-3).collect();
            let total: f64 = w.iter().sum();
            let mut out = vec![0.0; seq[n].len()];
            for (wk, v) in w.iter().zip(tail) {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += wk / total * x;
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_sets::{sample_member, ExpectationSet, Polytope, Section24Set, KPoint};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half() -> ProbSpace {
        ProbSpace::new(vec![0.5, 0.5]).unwrap()
    }

    fn rv(v: &[f64]) -> RandVar {
        RandVar::new(v.to_vec()).unwrap()
    }

    #[test]
    fn maximality_examples() {
        let space = half();
        let bx = Polytope::boxed(&[1.0, 2.0]).unwrap();
        assert!(is_maximal(&bx, &space, &rv(&[1.0, 2.0]), MAXIMALITY_TOL).unwrap().is_maximal);
        let e = ExpectationSet::under(&space, 1.0).unwrap();
        let r = is_maximal(&e, &space, &rv(&[2.0, 0.0]), MAXIMALITY_TOL).unwrap();
        assert!(r.is_maximal, "{r:?}");
        let r = is_maximal(&e, &space, &rv(&[1.0, 0.5]), MAXIMALITY_TOL).unwrap();
        assert!(!r.is_maximal);
        let w = r.witness.unwrap();
        assert!(e.contains(&w, 1e-12));
        assert!(w[0] >= 1.0 && w[1] >= 0.5 && w.values() != [1.0, 0.5]);
        assert!((crate::prob_space::expectation(&space, &w).unwrap() - 1.0).abs() < 1e-12);
        for s in &r.per_atom_slack {
            assert!(*s >= -1e-12);
        }
        assert_eq!(is_maximal(&e, &space, &rv(&[3.0, 0.0]), MAXIMALITY_TOL).unwrap_err(), Error::NotMember);
    }

    #[test]
    fn lift_examples() {
        let space = half();
        let bx = Polytope::boxed(&[1.0, 2.0]).unwrap();
        assert_eq!(maximal_lift(&bx, &space, &rv(&[0.5, 0.5])).unwrap().values(), &[1.0, 2.0]);
        let e = ExpectationSet::under(&space, 1.0).unwrap();
        let h = maximal_lift(&e, &space, &rv(&[0.5, 0.5])).unwrap();
        assert!(h[0] >= 0.5 && h[1] >= 0.5);
        assert!((crate::prob_space::expectation(&space, &h).unwrap() - 1.0).abs() < 1e-12);
        assert!(is_maximal(&e, &space, &h, MAXIMALITY_TOL).unwrap().is_maximal);
        let g = rv(&[2.0, 0.0]);
        assert_eq!(maximal_lift(&e, &space, &g).unwrap(), g);
        assert_eq!(maximal_lift(&e, &space, &rv(&[5.0, 0.0])).unwrap_err(), Error::NotMember);
    }

    #[test]
    fn section24_curve_points_are_maximal() {
        let s = Section24Set::exponential_quantiles(16).unwrap();
        let space = ProbSpace::uniform(16).unwrap();
        for alpha in [0.05, 0.3, 1.0] {
            let g = RandVar::new(s.point(KPoint::on_curve(alpha))).unwrap();
            assert!(is_maximal(&s, &space, &g, MAXIMALITY_TOL).unwrap().is_maximal);
        }
        // interior of K is dominated
        let g = RandVar::new(s.point(KPoint { alpha: 0.3, beta: 0.2 })).unwrap();
        assert!(!is_maximal(&s, &space, &g, MAXIMALITY_TOL).unwrap().is_maximal);
        let h = maximal_lift(&s, &space, &g).unwrap();
        assert!(g.le(&h));
        assert!(is_maximal(&s, &space, &h, MAXIMALITY_TOL).unwrap().is_maximal);
    }

    #[test]
    fn domination_examples() {
        let space = half();
        let g = rv(&[1.0, 2.0]);
        let seq = vec![g.clone(); 8];
        let r = domination_convergence_check(&space, &seq, &seq, &g).unwrap();
        assert!(r.f_dist.iter().chain(&r.g_dist).all(|d| *d == 0.0) && r.tail_bounded);
        // box lift of (1 - 1/n) g is the top corner
        let bx = Polytope::boxed(&[1.0, 2.0]).unwrap();
        let fs: Vec<RandVar> = (1..=12).map(|n| g.scaled(1.0 - 1.0 / n as f64).unwrap()).collect();
        let gs: Vec<RandVar> = fs.iter().map(|f| maximal_lift(&bx, &space, f).unwrap()).collect();
        assert!(gs.iter().all(|h| *h == g));
        let r = domination_convergence_check(&space, &fs, &gs, &g).unwrap();
        assert!(r.tail_bounded);
        let bad = domination_convergence_check(&space, &gs, &fs, &g);
        assert!(matches!(bad, Err(Error::Validation(_))));
    }

    #[test]
    fn lift_is_dominating_idempotent_and_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(2..=5);
            let space = ProbSpace::from_masses(&(0..n).map(|_| rng.gen_range(0.1..1.0)).collect::<Vec<_>>()).unwrap();
            let mut a: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.gen_range(0.1..1.0)).collect()).collect();
            a.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let p = Polytope::new(a, vec![1.0, 1.5, 2.0, 0.7]).unwrap();
            let f = RandVar::clamped(sample_member(&p, &mut rng).unwrap()).unwrap();
            let h = maximal_lift(&p, &space, &f).unwrap();
            assert!(f.le(&h));
            assert!(is_maximal(&p, &space, &h, MAXIMALITY_TOL).unwrap().is_maximal);
            let hh = maximal_lift(&p, &space, &h).unwrap();
            assert!(space.l2_dist_sq(&h, &hh).sqrt() < 1e-7);
        }
    }

    #[test]
    fn forward_combinations_keep_the_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let space = ProbSpace::uniform(3).unwrap();
        let e = ExpectationSet::under(&space, 1.0).unwrap();
        let g = maximal_lift(&e, &space, &rv(&[0.5, 0.5, 0.5])).unwrap();
        let seq: Vec<Vec<f64>> = (1..=64)
            .map(|n| g.iter().enumerate().map(|(i, v)| (v - (i as f64 + 1.0) / n as f64 * 0.1).max(0.0)).collect())
            .collect();
        let fwd = forward_convex_combinations(&seq, 8, &mut rng);
        let last = metric_unchecked(&space, seq.last().unwrap(), &g);
        let fwd_last = metric_unchecked(&space, fwd.last().unwrap(), &g);
        assert!(fwd_last <= 10.0 * last);
        assert!(fwd.iter().all(|v| e.contains(v, 1e-9)));
    }
}
