//! Newton and extended Newton polytope queries.
//!
//! Hull heights and membership are answered with one small LP per query
//! rather than by facet enumeration, so the same code serves every dimension.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::lp::{Constraint, LpProblem, LpStatus};
use crate::poly::{Degree, TropicalPolynomial, DEFAULT_TOL};

/// A point `(a, b)` of an extended Newton polytope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedPoint {
    pub degree: Vec<f64>,
    pub height: f64,
}

impl ExtendedPoint {
    pub fn new(degree: Vec<f64>, height: f64) -> Self {
        Self { degree, height }
    }
}

/// Convex hull of a finite set of degree vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonPolytope {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl NewtonPolytope {
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("Newton polytope needs at least one point".into()));
        }
        for p in &points {
            check_dim(dim, p.len())?;
        }
        Ok(Self { dim, points })
    }

    pub fn of(p: &TropicalPolynomial) -> Result<Self> {
        Self::new(p.dim(), p.terms().iter().map(|t| t.degree.clone()).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Closed-hull membership; boundary points count as inside.
    pub fn contains(&self, j: &[f64]) -> Result<bool> {
        check_dim(self.dim, j.len())?;
        if self.points.len() == 1 {
            return Ok(self.points[0].iter().zip(j).all(|(a, b)| (a - b).abs() <= DEFAULT_TOL));
        }
        let lp = convex_combination_lp(&self.points, j, vec![0.0; self.points.len()]);
        Ok(lp.solve()?.status == LpStatus::Optimal)
    }

    /// Per-axis integer bounds `(floor(min), ceil(max))`.
    pub fn integer_bounds(&self) -> (Degree, Degree) {
        let lo = (0..self.dim)
            .map(|k| self.points.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min).floor() as i64)
            .collect();
        let hi = (0..self.dim)
            .map(|k| self.points.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max).ceil() as i64)
            .collect();
        (lo, hi)
    }

    /// All integer points inside the polytope, in lexicographic order.
    pub fn lattice_points(&self) -> Result<Vec<Degree>> {
        let (lo, hi) = self.integer_bounds();
        let mut out = Vec::new();
        for j in lattice_box(&lo, &hi) {
            let jf: Vec<f64> = j.iter().map(|&v| v as f64).collect();
            if self.contains(&jf)? {
                out.push(j);
            }
        }
        Ok(out)
    }
}

/// `Σλ_k a_k = j`, `Σλ_k = 1`, `λ >= 0` with the given objective.
fn convex_combination_lp(points: &[Vec<f64>], j: &[f64], objective: Vec<f64>) -> LpProblem {
    let k = points.len();
    let mut constraints = Vec::with_capacity(j.len() + 1);
    for (axis, &target) in j.iter().enumerate() {
        constraints.push(Constraint::eq(points.iter().map(|p| p[axis]).collect(), target));
    }
    constraints.push(Constraint::eq(vec![1.0; k], 1.0));
    LpProblem::new(objective, constraints)
}

/// Height of the upper hull of `points` above degree `j`:
/// `max Σλ_k b_k` over convex combinations with `Σλ_k a_k = j`.
/// Returns `None` when `j` lies outside the Newton polytope.
pub fn upper_hull_height(points: &[ExtendedPoint], j: &[f64]) -> Result<Option<f64>> {
    let Some(first) = points.first() else {
        return Err(Error::InvalidArgument("upper hull of an empty point set".into()));
    };
    check_dim(first.degree.len(), j.len())?;
    let degrees: Vec<Vec<f64>> = points.iter().map(|p| p.degree.clone()).collect();
    let heights = points.iter().map(|p| p.height).collect();
    let sol = convex_combination_lp(&degrees, j, heights).solve()?;
    match sol.status {
        LpStatus::Optimal => Ok(Some(sol.objective)),
        LpStatus::Infeasible => Ok(None),
        // Bounded feasible region; this would be a solver defect.
        LpStatus::Unbounded => Err(crate::lp::LpError::Malformed("unbounded hull LP".into()).into()),
    }
}

/// Indices of points that are vertices of the upper hull: points that no
/// convex combination of the others reaches or exceeds.
pub fn upper_hull_vertices(points: &[ExtendedPoint], tol: f64) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (k, p) in points.iter().enumerate() {
        let others: Vec<ExtendedPoint> = points
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .map(|(_, q)| q.clone())
            .collect();
        let is_vertex = if others.is_empty() {
            true
        } else {
            match upper_hull_height(&others, &p.degree)? {
                None => true,
                Some(h) => h < p.height - tol,
            }
        };
        if is_vertex {
            out.push(k);
        }
    }
    Ok(out)
}

/// Integer shifts `c` with `c + Newt(d) ⊆ Newt(p)`.
///
/// Candidates range over `[min p - min d, max p - max d]` per axis; a shift is
/// kept when every generator of `Newt(d)`, shifted by `c`, lies in `Newt(p)`.
pub fn valid_shifts(d_poly: &NewtonPolytope, p_poly: &NewtonPolytope) -> Result<Vec<Degree>> {
    check_dim(p_poly.dim, d_poly.dim)?;
    let (plo, phi) = p_poly.integer_bounds();
    let dim = p_poly.dim;
    let dmin: Vec<f64> = (0..dim)
        .map(|k| d_poly.points.iter().map(|v| v[k]).fold(f64::INFINITY, f64::min))
        .collect();
    let dmax: Vec<f64> = (0..dim)
        .map(|k| d_poly.points.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let lo: Degree = (0..dim).map(|k| (plo[k] as f64 - dmin[k]).floor() as i64).collect();
    let hi: Degree = (0..dim).map(|k| (phi[k] as f64 - dmax[k]).ceil() as i64).collect();
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return Ok(Vec::new());
    }
    let mut shifts = Vec::new();
    'candidates: for c in lattice_box(&lo, &hi) {
        for v in &d_poly.points {
            let moved: Vec<f64> = v.iter().zip(&c).map(|(a, &s)| a + s as f64).collect();
            if !p_poly.contains(&moved)? {
                continue 'candidates;
            }
        }
        shifts.push(c);
    }
    Ok(shifts)
}

/// One zonotope generator: the segment from the origin to `extended`, where
/// `extended = scale · (weights, bias)` in `R^{dim+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub neuron: usize,
    pub extended: Vec<f64>,
}

/// Scaled extended segments of a ReLU layer. Zero scales produce degenerate
/// generators and are dropped.
pub fn zonotope_generators(weights: &[Vec<f64>], biases: &[f64], scales: &[f64]) -> Result<Vec<Generator>> {
    check_dim(weights.len(), biases.len())?;
    check_dim(weights.len(), scales.len())?;
    let mut out = Vec::new();
    for (i, ((w, &b), &s)) in weights.iter().zip(biases).zip(scales).enumerate() {
        if s < 0.0 || !s.is_finite() {
            return Err(Error::InvalidArgument(format!("scale {i} must be a finite non-negative number, got {s}")));
        }
        if s == 0.0 {
            continue;
        }
        let mut extended: Vec<f64> = w.iter().map(|v| s * v).collect();
        extended.push(s * b);
        out.push(Generator { neuron: i, extended });
    }
    Ok(out)
}

/// Iterates the integer box `lo..=hi` in lexicographic order.
pub fn lattice_box(lo: &[i64], hi: &[i64]) -> impl Iterator<Item = Degree> {
    let lo = lo.to_vec();
    let hi = hi.to_vec();
    let empty = lo.iter().zip(&hi).any(|(l, h)| l > h);
    let mut next = if empty { None } else { Some(lo.clone()) };
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut succ = current.clone();
        for k in (0..succ.len()).rev() {
            if succ[k] < hi[k] {
                succ[k] += 1;
                next = Some(succ);
                break;
            }
            succ[k] = lo[k];
        }
        Some(current)
    })
}
