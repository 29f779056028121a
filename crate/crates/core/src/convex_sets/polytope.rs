//! Polytopes `{x >= 0 : A x <= b, E x = d}`, optionally carrying auxiliary
//! variables that are projected out. The auxiliary form represents solid
//! hulls exactly: `{f : 0 <= f <= g, g in P}`.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use super::{ConvexSet, LinearMax};
use crate::error::{Error, Result};
use crate::solver::{self, LinearProgram, QuadraticProgram};

/// Vertex enumeration is used for linear maximization up to this many atoms.
pub const VERTEX_ENUM_MAX_DIM: usize = 12;
/// Upper limit on the number of candidate bases examined during enumeration.
pub const VERTEX_ENUM_MAX_BASES: u64 = 250_000;

const VERTEX_TOL: f64 = 1e-9;

#[derive(Debug)]
pub struct Polytope {
    dim: usize,
    aux: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    a_eq: Vec<Vec<f64>>,
    b_eq: Vec<f64>,
    bounds: Vec<f64>,
    solid: bool,
    vertices: OnceLock<Option<Vec<Vec<f64>>>>,
}

/// Coordinatewise suprema of `{x >= 0 : A x <= b, E x = d}`; `None` marks an
/// unbounded coordinate.
pub fn coordinate_suprema(
    n: usize,
    a: &[Vec<f64>],
    b: &[f64],
    a_eq: &[Vec<f64>],
    b_eq: &[f64],
) -> Result<Vec<Option<f64>>> {
    (0..n)
        .map(|i| {
            let mut c = vec![0.0; n];
            c[i] = 1.0;
            match solver::maximize(&LinearProgram { objective: &c, a, b, a_eq, b_eq }) {
                Ok(s) => Ok(Some(s.value)),
                Err(Error::Unbounded) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

impl Polytope {
    /// `{f >= 0 : A f <= b}`.
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        Self::with_equalities(a, b, Vec::new(), Vec::new())
    }

    pub fn with_equalities(a: Vec<Vec<f64>>, b: Vec<f64>, a_eq: Vec<Vec<f64>>, b_eq: Vec<f64>) -> Result<Self> {
        let dim = a.first().or(a_eq.first()).map(Vec::len).ok_or_else(|| {
            Error::Validation("polytope needs at least one constraint row to fix its dimension".into())
        })?;
        Self::build(dim, 0, a, b, a_eq, b_eq)
    }

    /// The box `{0 <= f <= upper}`.
    pub fn boxed(upper: &[f64]) -> Result<Self> {
        if upper.iter().any(|u| !(u.is_finite() && *u >= 0.0)) {
            return Err(Error::Validation("box upper bounds must be finite and nonnegative".into()));
        }
        let n = upper.len();
        let a = (0..n)
            .map(|i| {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                row
            })
            .collect();
        Self::new(a, upper.to_vec())
    }

    fn build(
        dim: usize,
        aux: usize,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        a_eq: Vec<Vec<f64>>,
        b_eq: Vec<f64>,
    ) -> Result<Self> {
        let n = dim + aux;
        if dim == 0 {
            return Err(Error::Validation("polytope dimension must be positive".into()));
        }
        if a.len() != b.len() || a_eq.len() != b_eq.len() {
            return Err(Error::Validation("constraint rows and right-hand sides differ in length".into()));
        }
        if a.iter().chain(&a_eq).any(|r| r.len() != n) {
            return Err(Error::Validation(format!("every constraint row must have {n} entries")));
        }
        if a.iter().chain(&a_eq).flatten().chain(&b).chain(&b_eq).any(|v| !v.is_finite()) {
            return Err(Error::Validation("constraint data must be finite".into()));
        }
        let sup = coordinate_suprema(n, &a, &b, &a_eq, &b_eq)?;
        if sup.iter().any(Option::is_none) {
            return Err(Error::Unbounded);
        }
        let bounds = sup[..dim].iter().map(|s| s.unwrap_or(f64::INFINITY).max(0.0)).collect();
        let solid = aux == 0 && a_eq.is_empty() && a.iter().flatten().all(|v| *v >= 0.0);
        Ok(Self { dim, aux, a, b, a_eq, b_eq, bounds, solid, vertices: OnceLock::new() })
    }

    pub fn inequalities(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.a, &self.b)
    }

    pub fn equalities(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.a_eq, &self.b_eq)
    }

    pub fn aux_dim(&self) -> usize {
        self.aux
    }

    /// Solid hull via one block of auxiliary variables: visible `f`, hidden `(x, z)`.
    pub fn lifted_solid_hull(&self) -> Result<Polytope> {
        let d = self.dim;
        let n_old = self.dim + self.aux;
        let n_new = d + n_old;
        let mut a = Vec::with_capacity(d + self.a.len());
        for i in 0..d {
            let mut row = vec![0.0; n_new];
            row[i] = 1.0;
            row[d + i] = -1.0;
            a.push(row);
        }
        let shift = |row: &Vec<f64>| {
            let mut out = vec![0.0; d];
            out.extend_from_slice(row);
            out
        };
        a.extend(self.a.iter().map(shift));
        let a_eq = self.a_eq.iter().map(shift).collect();
        let mut b = vec![0.0; d];
        b.extend_from_slice(&self.b);
        let mut hull = Self::build(d, n_old, a, b, a_eq, self.b_eq.clone())?;
        hull.solid = true;
        Ok(hull)
    }

    fn n(&self) -> usize {
        self.dim + self.aux
    }

    fn direct_violation(&self, x: &[f64]) -> f64 {
        let ineq = self.a.iter().zip(&self.b).map(|(r, b)| dot(r, x) - b);
        let eq = self.a_eq.iter().zip(&self.b_eq).map(|(r, d)| (dot(r, x) - d).abs());
        let neg = x.iter().map(|v| -v);
        ineq.chain(eq).chain(neg).fold(0.0, f64::max)
    }

    /// Cached vertex list in visible coordinates, when enumeration is affordable.
    pub fn vertices_cached(&self) -> Option<&[Vec<f64>]> {
        self.vertices.get_or_init(|| self.enumerate_vertices()).as_deref()
    }

    fn enumerate_vertices(&self) -> Option<Vec<Vec<f64>>> {
        if self.aux > 0 || self.dim > VERTEX_ENUM_MAX_DIM {
            return None;
        }
        let n = self.n();
        let eq = independent_rows(&self.a_eq, &self.b_eq, n);
        let free = n - eq.len();
        let mut rows: Vec<(Vec<f64>, f64)> = self.a.iter().cloned().zip(self.b.iter().copied()).collect();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = -1.0;
            rows.push((e, 0.0));
        }
        if binomial(rows.len() as u64, free as u64) > VERTEX_ENUM_MAX_BASES {
            return None;
        }
        let mut out: Vec<Vec<f64>> = Vec::new();
        for_each_combination(rows.len(), free, |subset| {
            let mut m = DMatrix::<f64>::zeros(n, n);
            let mut rhs = DVector::<f64>::zeros(n);
            for (k, (row, d)) in eq.iter().chain(subset.iter().map(|&s| &rows[s])).enumerate() {
                for c in 0..n {
                    m[(k, c)] = row[c];
                }
                rhs[k] = *d;
            }
            let lu = m.lu();
            if lu.determinant().abs() < 1e-12 {
                return;
            }
            let Some(x) = lu.solve(&rhs) else { return };
            let x: Vec<f64> = x.iter().map(|v| if v.abs() < 1e-13 { 0.0 } else { *v }).collect();
            if self.direct_violation(&x) > VERTEX_TOL {
                return;
            }
            let x: Vec<f64> = x.into_iter().map(|v| v.max(0.0)).collect();
            if !out.iter().any(|v| v.iter().zip(&x).all(|(a, b)| (a - b).abs() <= VERTEX_TOL)) {
                out.push(x);
            }
        });
        Some(out)
    }

    /// Linear maximization by simplex, bypassing the vertex cache.
    pub fn maximize_by_simplex(&self, c: &[f64], floor: Option<&[f64]>) -> Result<LinearMax> {
        let n = self.n();
        let mut obj = vec![0.0; n];
        obj[..self.dim].copy_from_slice(c);
        let floor_full: Vec<f64> = match floor {
            Some(f) => f.iter().copied().chain(std::iter::repeat_n(0.0, self.aux)).collect(),
            None => vec![0.0; n],
        };
        let b: Vec<f64> = self.a.iter().zip(&self.b).map(|(r, b)| b - dot(r, &floor_full)).collect();
        let b_eq: Vec<f64> = self.a_eq.iter().zip(&self.b_eq).map(|(r, d)| d - dot(r, &floor_full)).collect();
        let sol = solver::maximize(&LinearProgram { objective: &obj, a: &self.a, b: &b, a_eq: &self.a_eq, b_eq: &b_eq })?;
        let point: Vec<f64> = sol.x[..self.dim].iter().zip(&floor_full).map(|(y, f)| y + f).collect();
        Ok(LinearMax { value: dot(c, &point), point })
    }
}

impl ConvexSet for Polytope {
    fn dim(&self) -> usize {
        self.dim
    }

    fn contains(&self, f: &[f64], tol: f64) -> bool {
        if f.len() != self.dim || f.iter().any(|v| !v.is_finite() || *v < -tol) {
            return false;
        }
        if self.aux == 0 {
            return self.direct_violation(f) <= tol;
        }
        // feasibility of the hidden block with the visible block pinned, rows relaxed by tol
        let d = self.dim;
        let hidden: Vec<Vec<f64>> = self.a.iter().map(|r| r[d..].to_vec()).collect();
        let b: Vec<f64> = self.a.iter().zip(&self.b).map(|(r, b)| b - dot(&r[..d], f) + tol).collect();
        let mut rows = hidden;
        let mut rhs = b;
        for (r, e) in self.a_eq.iter().zip(&self.b_eq) {
            let v = e - dot(&r[..d], f);
            rows.push(r[d..].to_vec());
            rhs.push(v + tol);
            rows.push(r[d..].iter().map(|x| -x).collect());
            rhs.push(-v + tol);
        }
        let zero = vec![0.0; self.aux];
        solver::maximize(&LinearProgram { objective: &zero, a: &rows, b: &rhs, a_eq: &[], b_eq: &[] }).is_ok()
    }

    fn maximize_linear(&self, c: &[f64], floor: Option<&[f64]>) -> Result<LinearMax> {
        check_len(self.dim, c.len())?;
        if let Some(f) = floor {
            check_len(self.dim, f.len())?;
        }
        if floor.is_none() {
            if let Some(vs) = self.vertices_cached() {
                let mut best: Option<(f64, &Vec<f64>)> = None;
                for v in vs {
                    let val = dot(c, v);
                    if best.is_none_or(|(b, _)| val > b) {
                        best = Some((val, v));
                    }
                }
                let (value, v) = best.ok_or(Error::EmptySet)?;
                return Ok(LinearMax { value, point: v.clone() });
            }
        }
        self.maximize_by_simplex(c, floor)
    }

    fn project(&self, weights: &[f64], phi: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, weights.len())?;
        check_len(self.dim, phi.len())?;
        let n = self.n();
        let mut hess = vec![0.0; n];
        let mut lin = vec![0.0; n];
        for i in 0..self.dim {
            hess[i] = 2.0 * weights[i];
            lin[i] = -2.0 * weights[i] * phi[i];
        }
        let rows = self.a.len() + n;
        let max_iter = (10 * n * (rows + 1)).max(200);
        let qp = QuadraticProgram { hess_diag: &hess, linear: &lin, a: &self.a, b: &self.b, a_eq: &self.a_eq, b_eq: &self.b_eq };
        let sol = solver::minimize(&qp, None, max_iter)?;
        Ok(sol.x[..self.dim].iter().map(|v| v.max(0.0)).collect())
    }

    fn bound_per_atom(&self) -> Vec<f64> {
        self.bounds.clone()
    }

    fn is_solid(&self) -> bool {
        self.solid
    }

    fn solid_hull(&self) -> Result<Arc<dyn ConvexSet>> {
        if self.solid {
            Ok(Arc::new(self.clone_shallow()))
        } else {
            Ok(Arc::new(self.lifted_solid_hull()?))
        }
    }

    fn vertices(&self) -> Option<Vec<Vec<f64>>> {
        self.vertices_cached().map(<[_]>::to_vec)
    }
}

impl Polytope {
    fn clone_shallow(&self) -> Self {
        Self {
            dim: self.dim,
            aux: self.aux,
            a: self.a.clone(),
            b: self.b.clone(),
            a_eq: self.a_eq.clone(),
            b_eq: self.b_eq.clone(),
            bounds: self.bounds.clone(),
            solid: self.solid,
            vertices: OnceLock::new(),
        }
    }
}

impl Clone for Polytope {
    fn clone(&self) -> Self {
        self.clone_shallow()
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what: "vector".into(), expected, found })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn independent_rows(rows: &[Vec<f64>], rhs: &[f64], n: usize) -> Vec<(Vec<f64>, f64)> {
    let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
    for (r, d) in rows.iter().zip(rhs) {
        let mut trial: Vec<&Vec<f64>> = out.iter().map(|(r, _)| r).collect();
        trial.push(r);
        let m = DMatrix::from_fn(trial.len(), n, |i, j| trial[i][j]);
        let svd = m.svd(false, false);
        let smax = svd.singular_values.iter().fold(0.0f64, |a, b| a.max(*b));
        let rank = svd.singular_values.iter().filter(|s| **s > 1e-10 * smax.max(1.0)).count();
        if rank == trial.len() {
            out.push((r.clone(), *d));
        }
    }
    out
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        // rightmost position that can still advance
        let Some(i) = (0..k).rev().find(|&i| idx[i] < i + n - k) else { return };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
