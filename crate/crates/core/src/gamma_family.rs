//! The curve example: `C = {1 - a + (a + b) xi : 0 <= b <= sqrt(a) <= 1}` with
//! `xi` at exponential quantiles. Every `g_gamma = 1 - gamma + (gamma + sqrt(gamma)) xi`,
//! `gamma` in `(0, 1]`, is supported by `d mu_gamma = (1 / g_gamma) d Q_gamma`
//! where `E_Q[1 / g_gamma] = c_gamma`, while the point `1` admits no such
//! probability in the continuum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bishop_phelps::{certify_osp, OspCertificate};
use crate::convex_sets::{maximize_concave_1d, ConvexSet, KPoint, Section24Set, LINEAR_MAX_GRID};
use crate::error::{Error, Result};
use crate::maximal::is_maximal;
use crate::prob_space::{DensityMeasure, ProbSpace, RandVar};

pub const DEFAULT_ATOMS: usize = 64;
pub const GAMMA_GRID: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// `(1 + 2 sqrt(gamma)) / (1 + sqrt(gamma))^2`.
pub fn c_gamma(gamma: f64) -> f64 {
    let s = gamma.sqrt();
    (1.0 + 2.0 * s) / ((1.0 + s) * (1.0 + s))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("gamma must lie in (0, 1], got {gamma}")))
    }
}

/// The default discretization: `xi` at Exp(1) quantiles with equal weights.
pub fn default_fixture(atoms: usize) -> Result<(ProbSpace, Section24Set)> {
    if atoms < 2 {
        return Err(Error::Validation("at least two atoms are needed".into()));
    }
    Ok((ProbSpace::uniform(atoms)?, Section24Set::exponential_quantiles(atoms)?))
}

pub fn g_gamma(set: &Section24Set, gamma: f64) -> Vec<f64> {
    set.point(KPoint::on_curve(gamma))
}

/// Largest `|xi / g - (gamma^{-1/2} (1 + sqrt(gamma))^{-1} - gamma^{-1/2} (1 - sqrt(gamma)) / g)|`.
pub fn identity_error(set: &Section24Set, gamma: f64) -> f64 {
    let s = gamma.sqrt();
    set.xi()
        .iter()
        .zip(g_gamma(set, gamma))
        .map(|(x, g)| (x / g - (1.0 / (s * (1.0 + s)) - (1.0 - s) / (s * g))).abs())
        .fold(0.0, f64::max)
}

/// Maximizes `(1 + 2 sqrt(gamma) - a + 2 sqrt(gamma) b) / (1 + sqrt(gamma))^2` over `K`.
/// The maximum sits on `b = sqrt(a)`, so the search runs over `s = sqrt(a)`.
pub fn k_maximum(gamma: f64) -> (KPoint, f64) {
    let r = gamma.sqrt();
    let den = (1.0 + r) * (1.0 + r);
    let (s, v) = maximize_concave_1d(|s| (1.0 + 2.0 * r - s * s + 2.0 * r * s) / den, 0.0, 1.0, LINEAR_MAX_GRID);
    (KPoint { alpha: s * s, beta: s }, v)
}

/// `Q_i proportional to p_i exp(theta / g_i)`, tuned so that `E_Q[1 / g] = c_gamma`.
pub fn tilted_probability(space: &ProbSpace, g: &[f64], target: f64) -> Result<Vec<f64>> {
    let inv: Vec<f64> = g.iter().map(|v| 1.0 / v).collect();
    let lo = inv.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = inv.iter().copied().fold(0.0, f64::max);
    if !(target > lo && target < hi) {
        return Err(Error::Domain(format!(
            "no probability on this discretization has E[1/g] = {target}; 1/g ranges over [{lo}, {hi}]"
        )));
    }
    let tilt = |theta: f64| -> Vec<f64> {
        let shift = if theta >= 0.0 { theta * hi } else { theta * lo };
        let raw: Vec<f64> = space.weights().iter().zip(&inv).map(|(p, x)| p * (theta * x - shift).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    };
    let mean = |q: &[f64]| q.iter().zip(&inv).map(|(a, b)| a * b).sum::<f64>();
    let (mut a, mut b) = (-1.0, 1.0);
    while mean(&tilt(a)) > target {
        a *= 2.0;
        if a < -1e12 {
            return Err(Error::Numerical("tilt bracket diverged".into()));
        }
    }
    while mean(&tilt(b)) < target {
        b *= 2.0;
        if b > 1e12 {
            return Err(Error::Numerical("tilt bracket diverged".into()));
        }
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if mean(&tilt(m)) < target {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-15 * b.abs().max(1.0) {
            break;
        }
    }
    Ok(tilt(0.5 * (a + b)))
}

/// Density of `mu_gamma = (1 / g_gamma) Q_gamma` with respect to the base probability.
pub fn mu_gamma(space: &ProbSpace, set: &Section24Set, gamma: f64) -> Result<DensityMeasure> {
    check_gamma(gamma)?;
    let g = g_gamma(set, gamma);
    let q = tilted_probability(space, &g, c_gamma(gamma))?;
    DensityMeasure::new((0..g.len()).map(|i| q[i] / (space.weights()[i] * g[i])).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaReport {
    pub gamma: f64,
    pub atoms: usize,
    pub c_gamma: f64,
    /// `|c_gamma - (1 + 2 sqrt(gamma)) (1 + sqrt(gamma))^{-2}|` recomputed independently.
    pub c_gamma_error: f64,
    pub identity_error: f64,
    pub k_argmax: KPoint,
    pub k_max: f64,
    /// `E_Q[1 / g_gamma]`.
    pub q_mean_inverse: f64,
    /// `sup_{f in C} <mu_gamma, f>` from the set's own oracle.
    pub set_max: f64,
    pub certificate: Option<OspCertificate>,
    pub rejection: Option<String>,
}

impl GammaReport {
    pub fn passes(&self, tol: f64) -> bool {
        (self.k_max - 1.0).abs() <= 1e-9
            && (self.k_argmax.alpha - self.gamma).abs() <= 1e-6
            && (self.k_argmax.beta - self.gamma.sqrt()).abs() <= 1e-6
            && self.c_gamma_error <= 1e-12
            && self.identity_error <= 1e-12
            && self.certificate.as_ref().is_some_and(|c| c.gap.abs() <= tol && (c.value - 1.0).abs() <= tol)
    }
}

pub fn gamma_report(gamma: f64, atoms: usize, tol: f64) -> Result<GammaReport> {
    check_gamma(gamma)?;
    let (space, set) = default_fixture(atoms)?;
    let g = g_gamma(&set, gamma);
    let c = c_gamma(gamma);
    let s = gamma.sqrt();
    let c_alt = 1.0 - gamma / ((1.0 + s) * (1.0 + s));
    let (k_argmax, k_max) = k_maximum(gamma);
    let mu = mu_gamma(&space, &set, gamma)?;
    let q_mean_inverse: f64 = (0..atoms).map(|i| space.weights()[i] * mu[i]).sum();
    let set_max = set.maximize_linear(&space.functional(&mu), None)?.value;
    let (certificate, rejection) = match certify_osp(&set, &space, &RandVar::new(g)?, &mu, tol) {
        Ok(c) => (Some(c), None),
        Err(Error::Rejected(r)) => (None, Some(r.to_string())),
        Err(e) => return Err(e),
    };
    Ok(GammaReport {
        gamma,
        atoms,
        c_gamma: c,
        c_gamma_error: (c - c_alt).abs(),
        identity_error: identity_error(&set, gamma),
        k_argmax,
        k_max,
        q_mean_inverse,
        set_max,
        certificate,
        rejection,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub label: String,
    /// `<nu, xi> / <nu, 1>`.
    pub ratio: f64,
    /// `sup_{f in C} <nu, f> - <nu, 1>`.
    pub support_gap: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstructionReport {
    pub atoms: usize,
    /// `min over the grid of sqrt(a) / (sqrt(a) + 1)`.
    pub ratio_bound: f64,
    /// Whether `1` is maximal on this discretization; in the continuum it is.
    pub one_is_maximal: bool,
    /// Largest amount by which a member dominating `1` can exceed it on one atom.
    pub one_slack: f64,
    pub candidates: Vec<Candidate>,
    /// Candidates whose support inequality holds, or that certify `1` outright.
    pub supporting: usize,
    pub accepted: usize,
    /// Every supporting or accepted candidate respects the ratio bound.
    pub holds: bool,
}

/// Tries candidate measures for the point `1` and checks the ratio bound on
/// every candidate that supports it.
pub fn obstruction_report(atoms: usize, grid: &[f64], random: usize, seed: u64, tol: f64) -> Result<ObstructionReport> {
    let (space, set) = default_fixture(atoms)?;
    let ratio_bound = grid.iter().map(|a| a.sqrt() / (a.sqrt() + 1.0)).fold(f64::INFINITY, f64::min);
    let one = RandVar::constant(atoms, 1.0)?;
    let report = is_maximal(&set, &space, &one, tol)?;
    let one_slack = report.per_atom_slack.iter().copied().fold(0.0, f64::max);

    let mut pool: Vec<(String, Vec<f64>)> = vec![("P".into(), vec![1.0; atoms])];
    for &gamma in grid {
        if let Ok(mu) = mu_gamma(&space, &set, gamma) {
            pool.push((format!("mu_gamma={gamma}"), mu.density().to_vec()));
        }
    }
    for i in 0..atoms {
        let mut e = vec![0.0; atoms];
        e[i] = 1.0 / space.weights()[i];
        pool.push((format!("atom={i}"), e));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..random {
        // concentrate mass near small xi, where the ratio is smallest
        let decay = rng.gen_range(0.0..8.0);
        let d: Vec<f64> = (0..atoms).map(|i| rng.gen::<f64>() * (-decay * set.xi()[i]).exp()).collect();
        pool.push((format!("random={k}"), d));
    }

    let mut candidates = Vec::with_capacity(pool.len());
    for (label, density) in pool {
        let nu = DensityMeasure::new(density)?;
        let c = space.functional(&nu);
        let mass: f64 = c.iter().sum();
        let ratio = c.iter().zip(set.xi()).map(|(a, x)| a * x).sum::<f64>() / mass;
        let sup = set.maximize_linear(&c, None)?.value;
        let accepted = certify_osp(&set, &space, &one, &nu, tol).is_ok();
        candidates.push(Candidate { label, ratio, support_gap: (sup - mass) / mass, accepted });
    }
    let relevant = |c: &&Candidate| c.accepted || c.support_gap <= tol;
    let supporting = candidates.iter().filter(relevant).count();
    let accepted = candidates.iter().filter(|c| c.accepted).count();
    let holds = candidates.iter().filter(relevant).all(|c| c.ratio <= ratio_bound + 1e-6);
    Ok(ObstructionReport {
        atoms,
        ratio_bound,
        one_is_maximal: report.is_maximal,
        one_slack,
        candidates,
        supporting,
        accepted,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_gamma_values() {
        assert!((c_gamma(1.0) - 0.75).abs() < 1e-15);
        assert!((c_gamma(0.25) - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn k_maximum_on_the_curve() {
        for gamma in [0.1, 0.25, 0.5, 0.75, 1.0] {
            let (k, v) = k_maximum(gamma);
            assert!((v - 1.0).abs() < 1e-12);
            assert!((k.alpha - gamma).abs() < 1e-7 && (k.beta - gamma.sqrt()).abs() < 1e-7, "{gamma}: {k:?}");
        }
    }

    #[test]
    fn reports_pass_on_default_grid() {
        for gamma in [0.1, 0.25, 0.5, 0.75, 1.0] {
            let r = gamma_report(gamma, DEFAULT_ATOMS, 1e-8).unwrap();
            assert!(r.passes(1e-8), "{r:#?}");
            assert!((r.q_mean_inverse - r.c_gamma).abs() < 1e-12);
            assert!((r.set_max - 1.0).abs() < 1e-8);
        }
        let r = gamma_report(1.0, DEFAULT_ATOMS, 1e-8).unwrap();
        assert!((r.k_argmax.alpha - 1.0).abs() < 1e-7 && (r.k_argmax.beta - 1.0).abs() < 1e-7);
    }

    #[test]
    fn small_gamma_certificate() {
        let r = gamma_report(1e-4, DEFAULT_ATOMS, 1e-8).unwrap();
        assert!(r.certificate.is_some(), "{r:#?}");
    }

    #[test]
    fn gamma_out_of_range() {
        assert!(gamma_report(0.0, 8, 1e-8).unwrap_err().is_validation());
        assert!(gamma_report(1.5, 8, 1e-8).unwrap_err().is_validation());
    }

    #[test]
    fn point_one_is_not_supported() {
        let r = obstruction_report(DEFAULT_ATOMS, &GAMMA_GRID, 20, 7, 1e-8).unwrap();
        assert!(r.holds);
        assert_eq!(r.accepted, 0);
        assert!(!r.one_is_maximal && r.one_slack > 0.0);
    }

    #[test]
    fn projection_sequence_on_the_curve() {
        use crate::bishop_phelps::{bishop_phelps_sequence, BishopPhelpsOptions};
        let (space, set) = default_fixture(16).unwrap();
        for gamma in [0.1, 0.5, 1.0] {
            let g = RandVar::new(g_gamma(&set, gamma)).unwrap();
            let t = bishop_phelps_sequence(&set, &space, &g, &BishopPhelpsOptions { steps: 16, tol: 1e-8 }).unwrap();
            assert!(t.final_dist() <= t.first_dist() + 1e-12);
            assert!(t.worst_gap() <= 1e-8);
        }
    }
}
