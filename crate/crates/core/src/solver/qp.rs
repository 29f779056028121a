//! Primal active-set method for convex quadratic programs with a diagonal,
//! positive semidefinite Hessian:
//!
//! `min ½ x'Hx + c'x  s.t.  A x <= b,  E x = d,  x >= 0`.
//!
//! Directions are computed in the null space of the working set. When the
//! reduced Hessian is singular and the reduced gradient has a component in its
//! kernel, the method follows that zero-curvature descent direction until a
//! constraint blocks it, so bounded feasible regions always terminate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::lp::{self, LinearProgram};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct QuadraticProgram<'a> {
    pub hess_diag: &'a [f64],
    pub linear: &'a [f64],
    pub a: &'a [Vec<f64>],
    pub b: &'a [f64],
    pub a_eq: &'a [Vec<f64>],
    pub b_eq: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Inequality rows in the final working set. Indices `< a.len()` refer to
    /// `A`, index `a.len() + j` to the bound `x_j >= 0`.
    pub active: Vec<usize>,
}

struct Rows<'a> {
    a: &'a [Vec<f64>],
    b: &'a [f64],
    n: usize,
}

impl Rows<'_> {
    fn len(&self) -> usize {
        self.a.len() + self.n
    }

    fn dot(&self, j: usize, v: &[f64]) -> f64 {
        if j < self.a.len() {
            self.a[j].iter().zip(v).map(|(x, y)| x * y).sum()
        } else {
            -v[j - self.a.len()]
        }
    }

    fn rhs(&self, j: usize) -> f64 {
        if j < self.a.len() { self.b[j] } else { 0.0 }
    }

    fn norm(&self, j: usize) -> f64 {
        if j < self.a.len() { self.a[j].iter().map(|x| x * x).sum::<f64>().sqrt() } else { 1.0 }
    }

    fn dense(&self, j: usize) -> Vec<f64> {
        if j < self.a.len() {
            self.a[j].clone()
        } else {
            let mut e = vec![0.0; self.n];
            e[j - self.a.len()] = -1.0;
            e
        }
    }
}

fn matrix_of(rows: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c])
}

/// Orthonormal basis (as columns) of the null space of `m` (k x n).
fn null_space(m: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let mut padded = DMatrix::<f64>::zeros(n.max(m.nrows()), n);
    padded.rows_mut(0, m.nrows()).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, b| a.max(*b));
    let tol = 1e-10 * smax.max(1.0);
    let kernel: Vec<usize> = (0..n).filter(|&i| svd.singular_values[i] <= tol).collect();
    DMatrix::from_fn(n, kernel.len(), |r, c| vt[(kernel[c], r)])
}

fn rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 {
        return 0;
    }
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, b| a.max(*b));
    svd.singular_values.iter().filter(|s| **s > 1e-10 * smax.max(1.0)).count()
}

/// Finds any feasible point of the constraint system.
pub fn feasible_point(n: usize, a: &[Vec<f64>], b: &[f64], a_eq: &[Vec<f64>], b_eq: &[f64]) -> Result<Vec<f64>> {
    let zero = vec![0.0; n];
    lp::maximize(&LinearProgram { objective: &zero, a, b, a_eq, b_eq }).map(|s| s.x)
}

/// Solves the program from a feasible `start` (computed by phase one when absent).
pub fn minimize(qp: &QuadraticProgram<'_>, start: Option<&[f64]>, max_iter: usize) -> Result<QpSolution> {
    let n = qp.linear.len();
    if qp.hess_diag.len() != n {
        return Err(Error::Validation("hessian and linear term differ in length".into()));
    }
    if qp.hess_diag.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
        return Err(Error::Validation("hessian diagonal must be nonnegative".into()));
    }
    let rows = Rows { a: qp.a, b: qp.b, n };
    let mut x = match start {
        Some(s) => s.to_vec(),
        None => feasible_point(n, qp.a, qp.b, qp.a_eq, qp.b_eq)?,
    };
    let hscale = qp.hess_diag.iter().fold(1.0f64, |a, b| a.max(*b));

    // equality rows, dropping linearly dependent ones
    let mut eq_rows: Vec<Vec<f64>> = Vec::new();
    for row in qp.a_eq {
        let mut trial = eq_rows.clone();
        trial.push(row.clone());
        if rank(&matrix_of(&trial, n)) == trial.len() {
            eq_rows = trial;
        }
    }

    let active_tol = 1e-10;
    let mut working: Vec<usize> = Vec::new();
    {
        let mut current = eq_rows.clone();
        for j in 0..rows.len() {
            let slack = rows.rhs(j) - rows.dot(j, &x);
            if slack.abs() <= active_tol * rows.norm(j).max(1.0) {
                current.push(rows.dense(j));
                if rank(&matrix_of(&current, n)) == current.len() {
                    working.push(j);
                } else {
                    current.pop();
                }
            }
        }
    }

    for iter in 0..max_iter {
        let grad: Vec<f64> = (0..n).map(|i| qp.hess_diag[i] * x[i] + qp.linear[i]).collect();
        let gscale = grad.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        let mut active_rows = eq_rows.clone();
        active_rows.extend(working.iter().map(|&j| rows.dense(j)));
        let m = matrix_of(&active_rows, n);
        let z = null_space(&m, n);
        let gvec = DVector::from_vec(grad.clone());

        if z.ncols() > 0 {
            let r = z.transpose() * &gvec;
            let rnorm = r.amax();
            if rnorm > 1e-11 * gscale {
                let h = DMatrix::from_diagonal(&DVector::from_column_slice(qp.hess_diag));
                let reduced = z.transpose() * h * &z;
                let eig = SymmetricEigen::new(reduced);
                let u = eig.eigenvectors.transpose() * &r;
                let curv_tol = 1e-12 * hscale;
                let flat: Vec<usize> = (0..u.len())
                    .filter(|&k| eig.eigenvalues[k] <= curv_tol && u[k].abs() > 1e-11 * gscale)
                    .collect();
                let unbounded_dir = !flat.is_empty();
                let y = DVector::from_fn(u.len(), |k, _| {
                    if unbounded_dir {
                        if flat.contains(&k) { -u[k] } else { 0.0 }
                    } else if eig.eigenvalues[k] > curv_tol {
                        -u[k] / eig.eigenvalues[k]
                    } else {
                        0.0
                    }
                });
                let p = &z * (&eig.eigenvectors * y);
                let p: Vec<f64> = p.iter().copied().collect();
                let pnorm = p.iter().map(|v| v * v).sum::<f64>().sqrt();

                let mut block: Option<(usize, f64)> = None;
                for j in 0..rows.len() {
                    if working.contains(&j) {
                        continue;
                    }
                    let ap = rows.dot(j, &p);
                    if ap > 1e-14 * rows.norm(j) * pnorm {
                        let ratio = (rows.rhs(j) - rows.dot(j, &x)).max(0.0) / ap;
                        if block.is_none_or(|(_, best)| ratio < best) {
                            block = Some((j, ratio));
                        }
                    }
                }
                let step_max = if unbounded_dir { f64::INFINITY } else { 1.0 };
                let step = match block {
                    Some((j, ratio)) if ratio < step_max => {
                        working.push(j);
                        ratio
                    }
                    _ if unbounded_dir => return Err(Error::Unbounded),
                    _ => 1.0,
                };
                for (xi, pi) in x.iter_mut().zip(&p) {
                    *xi += step * pi;
                }
                continue;
            }
        }

        // stationary on the working set: check multiplier signs
        if working.is_empty() {
            return Ok(QpSolution { x, iterations: iter, active: working });
        }
        let lambda = m
            .transpose()
            .svd(true, true)
            .solve(&(-gvec), 1e-12)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let k0 = eq_rows.len();
        let mut drop: Option<(usize, f64)> = None;
        for (pos, &j) in working.iter().enumerate() {
            let l = lambda[k0 + pos];
            if l < -1e-10 * gscale {
                let better = match drop {
                    None => true,
                    Some((bp, bl)) => l < bl || (l == bl && j < working[bp]),
                };
                if better {
                    drop = Some((pos, l));
                }
            }
        }
        match drop {
            Some((pos, _)) => {
                working.remove(pos);
            }
            None => return Ok(QpSolution { x, iterations: iter, active: working }),
        }
    }
    let grad: Vec<f64> = (0..n).map(|i| qp.hess_diag[i] * x[i] + qp.linear[i]).collect();
    Err(Error::NoConvergence { iterations: max_iter, residual: grad.iter().fold(0.0, |a, b| a.max(b.abs())) })
}
