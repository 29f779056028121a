//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `max c·x  s.t.  A x <= b,  E x = d,  x >= 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const EPS_COST: f64 = 1e-10;
const EPS_PIVOT: f64 = 1e-10;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy)]
pub struct LinearProgram<'a> {
    pub objective: &'a [f64],
    pub a: &'a [Vec<f64>],
    pub b: &'a [f64],
    pub a_eq: &'a [Vec<f64>],
    pub b_eq: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

struct Tableau {
    rows: usize,
    cols: usize,
    // row-major, last column is the right-hand side
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.data[r * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let piv = self.data[pr * w + pc];
        for k in 0..w {
            self.data[pr * w + k] /= piv;
        }
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let factor = self.data[r * w + pc];
            if factor != 0.0 {
                for k in 0..w {
                    self.data[r * w + k] -= factor * self.data[pr * w + k];
                }
                self.data[r * w + pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.cols + 1;
        self.data.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }

    /// Runs Bland-rule pivots maximizing `cost` over columns `< allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j] - (0..self.rows).map(|r| cost[self.basis[r]] * self.at(r, j)).sum::<f64>();
                reduced > EPS_COST
            });
            let Some(j) = entering else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, j);
                if a > EPS_PIVOT {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio || (ratio == lratio && self.basis[r] < self.basis[lr]) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Err(Error::Unbounded),
                Some((r, _)) => self.pivot(r, j),
            }
        }
        Err(Error::NoConvergence { iterations: MAX_PIVOTS, residual: f64::NAN })
    }
}

/// Solves the linear program. Returns [`Error::EmptySet`] when infeasible and
/// [`Error::Unbounded`] when the objective is unbounded above.
pub fn maximize(lp: &LinearProgram<'_>) -> Result<LpSolution> {
    let n = lp.objective.len();
    let m1 = lp.a.len();
    let m2 = lp.a_eq.len();
    if lp.b.len() != m1 || lp.b_eq.len() != m2 {
        return Err(Error::Validation("constraint rows and right-hand sides differ in length".into()));
    }
    if lp.a.iter().chain(lp.a_eq).any(|row| row.len() != n) {
        return Err(Error::Validation("constraint row length differs from variable count".into()));
    }

    let rows = m1 + m2;
    let needs_art: Vec<bool> = (0..rows).map(|r| if r < m1 { lp.b[r] < 0.0 } else { true }).collect();
    let n_art = needs_art.iter().filter(|x| **x).count();
    let slack0 = n;
    let art0 = n + m1;
    let cols = n + m1 + n_art;
    let w = cols + 1;
    let mut data = vec![0.0; rows * w];
    let mut basis = vec![0; rows];
    let mut art = art0;
    for r in 0..rows {
        let (row, rhs) = if r < m1 { (&lp.a[r], lp.b[r]) } else { (&lp.a_eq[r - m1], lp.b_eq[r - m1]) };
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            data[r * w + j] = sign * row[j];
        }
        if r < m1 {
            data[r * w + slack0 + r] = sign;
        }
        data[r * w + cols] = sign * rhs;
        if needs_art[r] {
            data[r * w + art] = 1.0;
            basis[r] = art;
            art += 1;
        } else {
            basis[r] = slack0 + r;
        }
    }
    let mut t = Tableau { rows, cols, data, basis };

    let scale = lp.b.iter().chain(lp.b_eq).fold(1.0f64, |s, v| s.max(v.abs()));
    if n_art > 0 {
        let mut cost = vec![0.0; cols];
        for c in cost.iter_mut().skip(art0) {
            *c = -1.0;
        }
        t.optimize(&cost, cols)?;
        let infeas: f64 = (0..t.rows).filter(|&r| t.basis[r] >= art0).map(|r| t.rhs(r)).sum();
        if infeas > 1e-9 * scale {
            return Err(Error::EmptySet);
        }
        // drive zero-level artificials out of the basis, dropping redundant rows
        let mut r = 0;
        while r < t.rows {
            if t.basis[r] >= art0 {
                let col = (0..art0).filter(|j| !t.basis.contains(j)).max_by(|&a, &b| {
                    t.at(r, a).abs().partial_cmp(&t.at(r, b).abs()).unwrap_or(std::cmp::Ordering::Equal)
                });
                match col {
                    Some(j) if t.at(r, j).abs() > 1e-9 => {
                        t.pivot(r, j);
                        r += 1;
                    }
                    _ => t.remove_row(r),
                }
            } else {
                r += 1;
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(lp.objective);
    t.optimize(&cost, art0)?;

    let x = refine_basic_solution(lp, &t, n, m1).unwrap_or_else(|| {
        let mut x = vec![0.0; n];
        for r in 0..t.rows {
            if t.basis[r] < n {
                x[t.basis[r]] = t.rhs(r).max(0.0);
            }
        }
        x
    });
    let value = x.iter().zip(lp.objective).map(|(a, b)| a * b).sum();
    Ok(LpSolution { x, value })
}

/// Recomputes the basic solution from the original data to shed tableau drift.
fn refine_basic_solution(lp: &LinearProgram<'_>, t: &Tableau, n: usize, m1: usize) -> Option<Vec<f64>> {
    let rows = m1 + lp.a_eq.len();
    if t.rows != rows {
        return None;
    }
    let mut bmat = DMatrix::<f64>::zeros(rows, rows);
    let rhs = DVector::from_iterator(rows, lp.b.iter().chain(lp.b_eq).copied());
    for (k, &col) in t.basis.iter().enumerate() {
        for r in 0..rows {
            bmat[(r, k)] = if col < n {
                if r < m1 { lp.a[r][col] } else { lp.a_eq[r - m1][col] }
            } else if col - n == r {
                1.0
            } else {
                0.0
            };
        }
    }
    let sol = bmat.lu().solve(&rhs)?;
    let mut x = vec![0.0; n];
    for (k, &col) in t.basis.iter().enumerate() {
        if col < n {
            x[col] = sol[k].max(0.0);
        }
    }
    let drift = (0..t.rows)
        .filter(|&r| t.basis[r] < n)
        .map(|r| (x[t.basis[r]] - t.rhs(r).max(0.0)).abs())
        .fold(0.0, f64::max);
    (drift.is_finite() && drift < 1e-6).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(c: &[f64], a: &[Vec<f64>], b: &[f64], ae: &[Vec<f64>], be: &[f64]) -> Result<LpSolution> {
        maximize(&LinearProgram { objective: c, a, b, a_eq: ae, b_eq: be })
    }

    #[test]
    fn simple_max() {
        // max 3x + 2y, x + y <= 4, x + 3y <= 6, x <= 3
        let a = vec![vec![1.0, 1.0], vec![1.0, 3.0], vec![1.0, 0.0]];
        let s = solve(&[3.0, 2.0], &a, &[4.0, 6.0, 3.0], &[], &[]).unwrap();
        assert!((s.value - 11.0).abs() < 1e-12);
        assert!((s.x[0] - 3.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_negative_rhs() {
        // max x - y, x + y = 1, -x <= -0.25 (x >= 0.25), y >= 0.1 as -y <= -0.1
        let a = vec![vec![-1.0, 0.0], vec![0.0, -1.0]];
        let ae = vec![vec![1.0, 1.0]];
        let s = solve(&[1.0, -1.0], &a, &[-0.25, -0.1], &ae, &[1.0]).unwrap();
        assert!((s.x[0] - 0.9).abs() < 1e-12 && (s.x[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let a = vec![vec![1.0, 1.0]];
        assert_eq!(solve(&[1.0, 0.0], &a, &[-1.0], &[], &[]), Err(Error::EmptySet));
        let a = vec![vec![1.0, -1.0]];
        assert_eq!(solve(&[1.0, 1.0], &a, &[0.0], &[], &[]), Err(Error::Unbounded));
    }

    #[test]
    fn redundant_equalities() {
        let ae = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let s = solve(&[0.0, 1.0], &[], &[], &ae, &[1.0, 2.0]).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // classic cycling example under the textbook largest-coefficient rule
        let a = vec![
            vec![0.5, -5.5, -2.5, 9.0],
            vec![0.5, -1.5, -0.5, 1.0],
            vec![1.0, 0.0, 0.0, 0.0],
        ];
        let s = solve(&[10.0, -57.0, -9.0, -24.0], &a, &[0.0, 0.0, 1.0], &[], &[]).unwrap();
        assert!((s.value - 1.0).abs() < 1e-9);
    }
}
