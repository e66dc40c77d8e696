//! Log-barrier interior-point method for geometric programs in convex
//! (log-sum-exp) form.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `exp(log_coeff + Σ a_k y_k)` over sparse exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub log_coeff: f64,
    pub exps: Vec<(usize, f64)>,
}

impl Monomial {
    pub fn new(log_coeff: f64, exps: Vec<(usize, f64)>) -> Self {
        Self { log_coeff, exps }
    }

    fn exponent(&self, y: &[f64]) -> f64 {
        self.log_coeff + self.exps.iter().map(|&(k, a)| a * y[k]).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posynomial {
    pub terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Self { terms }
    }

    /// Log of the posynomial at `y = ln x`.
    pub fn log_value(&self, y: &[f64]) -> f64 {
        let z: Vec<f64> = self.terms.iter().map(|m| m.exponent(y)).collect();
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
    }

    /// Value, gradient and (optionally) Hessian of the log-sum-exp.
    fn derivatives(&self, y: &[f64], hess: bool) -> (f64, DVector<f64>, Option<DMatrix<f64>>) {
        let n = y.len();
        let z: Vec<f64> = self.terms.iter().map(|m| m.exponent(y)).collect();
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let total: f64 = w.iter().sum();
        let value = m + total.ln();
        let mut g = DVector::zeros(n);
        for (term, wk) in self.terms.iter().zip(&w) {
            for &(k, a) in &term.exps {
                g[k] += wk / total * a;
            }
        }
        let h = (hess && self.terms.len() > 1).then(|| {
            let mut h = DMatrix::zeros(n, n);
            for (term, wk) in self.terms.iter().zip(&w) {
                let pk = wk / total;
                for &(r, ar) in &term.exps {
                    for &(c, ac) in &term.exps {
                        h[(r, c)] += pk * ar * ac;
                    }
                }
            }
            h - &g * g.transpose()
        });
        (value, g, h)
    }
}

/// Minimize `f0` subject to `f_k <= 1`, all posynomials in `y = ln x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpProblem {
    pub n_vars: usize,
    pub objective: Posynomial,
    pub constraints: Vec<Posynomial>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptions {
    /// Stop when the barrier bound `m / t` drops below this.
    pub gap_tol: f64,
    /// Growth factor of `t` between centering steps.
    pub mu: f64,
    pub t0: f64,
    /// Newton steps allowed per centering.
    pub max_newton: usize,
    /// Centering stops at `λ²/2` below this.
    pub newton_tol: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-10, mu: 10.0, t0: 1.0, max_newton: 100, newton_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierReport {
    pub outer_iterations: usize,
    pub newton_steps: usize,
    pub duality_gap: f64,
    /// Log objective at the returned point.
    pub objective: f64,
}

/// Solves `problem` from the strictly feasible `start`.
pub fn solve_gp(problem: &GpProblem, start: &[f64], opts: &BarrierOptions) -> Result<(Vec<f64>, BarrierReport)> {
    if start.len() != problem.n_vars {
        return Err(Error::DimensionMismatch { expected: problem.n_vars, found: start.len() });
    }
    if !strictly_feasible(problem, start) {
        return Err(Error::InvalidArgument("barrier start is not strictly feasible".into()));
    }
    let m = problem.constraints.len().max(1) as f64;
    let mut y = start.to_vec();
    let mut t = opts.t0;
    let mut outer = 0;
    let mut newton_steps = 0;
    let mut trace = Vec::new();
    loop {
        newton_steps += center(problem, &mut y, t, opts)?;
        outer += 1;
        trace.push(problem.objective.log_value(&y));
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Solver { message: "barrier iterate is not finite".into(), trace });
        }
        if m / t < opts.gap_tol {
            break;
        }
        t *= opts.mu;
    }
    let objective = problem.objective.log_value(&y);
    Ok((y, BarrierReport { outer_iterations: outer, newton_steps, duality_gap: m / t, objective }))
}

fn strictly_feasible(problem: &GpProblem, y: &[f64]) -> bool {
    problem.constraints.iter().all(|c| c.log_value(y) < 0.0)
}

fn barrier_value(problem: &GpProblem, y: &[f64], t: f64) -> f64 {
    let mut phi = t * problem.objective.log_value(y);
    for c in &problem.constraints {
        let f = c.log_value(y);
        if f >= 0.0 {
            return f64::INFINITY;
        }
        phi -= (-f).ln();
    }
    phi
}

fn center(problem: &GpProblem, y: &mut Vec<f64>, t: f64, opts: &BarrierOptions) -> Result<usize> {
    let n = problem.n_vars;
    for step in 0..opts.max_newton {
        let (_, g0, h0) = problem.objective.derivatives(y, true);
        let mut grad = g0 * t;
        let mut hess = h0.map_or_else(|| DMatrix::zeros(n, n), |h| h * t);
        for c in &problem.constraints {
            let (f, g, h) = c.derivatives(y, true);
            let s = -f;
            grad += &g / s;
            hess += &g * g.transpose() / (s * s);
            if let Some(h) = h {
                hess += h / s;
            }
        }
        let dir = newton_direction(hess, &grad)?;
        let slope = grad.dot(&dir);
        if -slope / 2.0 <= opts.newton_tol {
            return Ok(step);
        }
        let phi = barrier_value(problem, y, t);
        let mut s = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = y.iter().zip(dir.iter()).map(|(a, b)| a + s * b).collect();
            let value = barrier_value(problem, &trial, t);
            if value.is_finite() && value <= phi + 0.01 * s * slope {
                *y = trial;
                break true;
            }
            s *= 0.5;
            if s < 1e-16 {
                break false;
            }
        };
        if !accepted {
            // Rounding floor of the barrier value; the point is as centered
            // as double precision allows.
            return Ok(step);
        }
    }
    Ok(opts.max_newton)
}

fn newton_direction(hess: DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let n = grad.len();
    let scale = (0..n).map(|k| hess[(k, k)].abs()).fold(0.0, f64::max).max(1.0);
    let mut ridge = 0.0;
    for _ in 0..20 {
        let mut h = hess.clone();
        for k in 0..n {
            h[(k, k)] += ridge;
        }
        if let Some(chol) = h.cholesky() {
            return Ok(-chol.solve(grad));
        }
        ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 10.0 };
    }
    Err(Error::Solver { message: "barrier Hessian is not positive definite".into(), trace: Vec::new() })
}
