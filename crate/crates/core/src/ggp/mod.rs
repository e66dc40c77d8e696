//! Geometric-programming formulations of division.
//!
//! Both programs work on positivity-shifted coefficients so that every
//! `p'_j`, `d'_i` is at least 1 and `p'_j - d'_i >= 1`, which keeps every
//! quotient variable strictly positive.

mod barrier;
mod direct;

pub use barrier::{solve_gp, BarrierOptions, BarrierReport, GpProblem, Monomial, Posynomial};
pub use direct::{r_sweep, solve_direct_approx, DirectApproxOptions, DirectApproxProblem, DirectApproxSolution, SweepEntry, SweepReport};

use std::collections::BTreeMap;

use crate::error::{check_dim, Error, Result};
use crate::poly::{maxplus_convolution, Degree, LatticePolynomial, TropicalPolynomial};
use crate::polytope::{valid_shifts, NewtonPolytope};

/// Adds `max(0, 1 - min coeff)` to every coefficient.
pub fn positivity_shift(p: &LatticePolynomial) -> (LatticePolynomial, f64) {
    let shift = p.min_coeff().map_or(0.0, |m| (1.0 - m).max(0.0));
    (p.shifted(shift), shift)
}

/// `Σ_j ((q ⊕ d)_j - p_j)^2` over the degrees of `p` that `q ⊕ d` reaches.
pub fn eval_goal0(q: &LatticePolynomial, p: &LatticePolynomial, d: &LatticePolynomial) -> Result<f64> {
    check_dim(p.dim(), q.dim())?;
    let conv = maxplus_convolution(q, d)?;
    Ok(p.iter().filter_map(|(j, pj)| conv.get(j).map(|v| (v - pj).powi(2))).sum())
}

/// A canonical division instance in shifted coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedInstance {
    /// Canonical dividend plus `p_shift`.
    pub p: LatticePolynomial,
    /// Canonical divisor plus `d_shift`.
    pub d: LatticePolynomial,
    pub p_shift: f64,
    pub d_shift: f64,
    /// Valid shifts `C`, nonempty.
    pub shifts: Vec<Degree>,
}

impl ShiftedInstance {
    pub fn new(p: &TropicalPolynomial, d: &TropicalPolynomial) -> Result<Self> {
        check_dim(p.dim(), d.dim())?;
        if p.is_bottom() || d.is_bottom() {
            return Err(Error::Bottom);
        }
        let np = p.canonicalize()?;
        let nd = d.canonicalize()?;
        let shifts = valid_shifts(&lattice_newton(&nd)?, &lattice_newton(&np)?)?;
        if shifts.is_empty() {
            return Err(Error::InvalidArgument("the divisor admits no valid shift".into()));
        }
        let (d_shifted, d_shift) = positivity_shift(&nd);
        let (_, base) = positivity_shift(&np);
        let gap = 1.0 + d_shifted.max_coeff().unwrap_or(0.0) - np.min_coeff().unwrap_or(0.0);
        let p_shift = base.max(gap);
        Ok(Self { p: np.shifted(p_shift), d: d_shifted, p_shift, d_shift, shifts })
    }

    pub fn dim(&self) -> usize {
        self.p.dim()
    }

    /// For each shift `c`, the pairs `(j, d'_{j-c})` over the divisor's degrees.
    pub fn products(&self) -> Vec<Vec<(Degree, f64)>> {
        self.shifts
            .iter()
            .map(|c| {
                self.d
                    .iter()
                    .map(|(i, di)| (c.iter().zip(i).map(|(a, b)| a + b).collect(), di))
                    .collect()
            })
            .collect()
    }

    /// Closed-form erosion in shifted coordinates.
    pub fn erosion(&self) -> Vec<f64> {
        self.products()
            .iter()
            .map(|pairs| pairs.iter().map(|(j, di)| self.p_at(j) - di).fold(f64::INFINITY, f64::min))
            .collect()
    }

    pub(crate) fn p_at(&self, j: &[i64]) -> f64 {
        self.p.get(j).expect("valid shifts stay inside the dividend's support")
    }

    /// Maps shifted quotient values back to original coordinates.
    pub fn to_original(&self, shifted: &[f64]) -> LatticePolynomial {
        let offset = self.d_shift - self.p_shift;
        let coeffs: BTreeMap<Degree, f64> =
            self.shifts.iter().cloned().zip(shifted.iter().map(|q| q + offset)).collect();
        LatticePolynomial::new(self.dim(), coeffs).expect("finite quotient")
    }

    /// Original-coordinate dividend and divisor.
    pub fn original(&self) -> (LatticePolynomial, LatticePolynomial) {
        (self.p.shifted(-self.p_shift), self.d.shifted(-self.d_shift))
    }
}

fn lattice_newton(p: &LatticePolynomial) -> Result<NewtonPolytope> {
    NewtonPolytope::new(p.dim(), p.degrees().map(|j| j.iter().map(|&v| v as f64).collect()).collect())
}

/// The exact-division GP: minimize `Σ_c 1/l_c` subject to `l_c / q_c <= 1`
/// and `(q_c + d_i) / p_{c+i} <= 1` for every shift and divisor degree.
#[derive(Debug, Clone, PartialEq)]
pub struct GgpDivisionProblem {
    pub instance: ShiftedInstance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GgpDivisionSolution {
    /// Quotient in original coordinates.
    pub quotient: LatticePolynomial,
    /// Lower-bound variables `l_c` in shifted coordinates.
    pub lower_bounds: Vec<f64>,
    pub report: BarrierReport,
}

impl GgpDivisionProblem {
    pub fn new(p: &TropicalPolynomial, d: &TropicalPolynomial) -> Result<Self> {
        Ok(Self { instance: ShiftedInstance::new(p, d)? })
    }

    /// Log-domain program over `y = (ln q'_c, ln l_c)`.
    pub fn to_gp(&self) -> GpProblem {
        let n = self.instance.shifts.len();
        let objective = Posynomial::new((0..n).map(|c| Monomial::new(0.0, vec![(n + c, -1.0)])).collect());
        let mut constraints = Vec::new();
        for c in 0..n {
            constraints.push(Posynomial::new(vec![Monomial::new(0.0, vec![(n + c, 1.0), (c, -1.0)])]));
        }
        for (c, pairs) in self.instance.products().iter().enumerate() {
            for (j, di) in pairs {
                let lp = self.instance.p_at(j).ln();
                constraints.push(Posynomial::new(vec![
                    Monomial::new(-lp, vec![(c, 1.0)]),
                    Monomial::new(di.ln() - lp, vec![]),
                ]));
            }
        }
        GpProblem { n_vars: 2 * n, objective, constraints }
    }

    /// Strictly feasible start: `q'_c = 0.5`, `l_c = 0.25`.
    pub fn start(&self) -> Vec<f64> {
        let n = self.instance.shifts.len();
        let mut y = vec![0.5f64.ln(); n];
        y.extend(std::iter::repeat_n(0.25f64.ln(), n));
        y
    }
}

pub fn solve_division_ggp(problem: &GgpDivisionProblem, opts: &BarrierOptions) -> Result<GgpDivisionSolution> {
    let n = problem.instance.shifts.len();
    let (y, report) = solve_gp(&problem.to_gp(), &problem.start(), opts)?;
    let q: Vec<f64> = y[..n].iter().map(|u| u.exp()).collect();
    let lower_bounds = y[n..].iter().map(|v| v.exp()).collect();
    Ok(GgpDivisionSolution { quotient: problem.instance.to_original(&q), lower_bounds, report })
}
