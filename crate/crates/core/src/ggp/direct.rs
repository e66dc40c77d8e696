//! Relaxed direct approximation of the dividend by shifted divisors.
//!
//! The program minimizes
//! `(Σ_j M_j² + p_j²)^r / Π_c l_c + R Σ_j ξ_j` with `l_c <= q_c`,
//! `M_j <= ξ_j p_j` and `ξ_j >= 1`, where `M_j = (q ⊕ d)_j` and `r = |C|`.
//! At any fixed `q` the best `l_c` is `q_c` and the best `ξ_j` is
//! `max(1, M_j / p_j)`, so both are profiled out and the solver works on
//! `u_c = ln q_c` alone. Every max is replaced by a log-sum-exp smooth max
//! of sharpness β, which only ever overestimates, and β is doubled between
//! stages so the recorded objective can only decrease.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ShiftedInstance;
use crate::error::{Error, Result};
use crate::poly::{Degree, LatticePolynomial, TropicalPolynomial};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectApproxOptions {
    pub beta0: f64,
    pub beta_max: f64,
    /// Quasi-Newton iterations per β stage.
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for DirectApproxOptions {
    fn default() -> Self {
        Self { beta0: 50.0, beta_max: 1e5, max_iters: 400, grad_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectApproxProblem {
    pub instance: ShiftedInstance,
    /// Weight `R` of the slack penalty.
    pub regularization: f64,
    degrees: Vec<Degree>,
    p: Vec<f64>,
    /// For each degree of `p`, the `(shift index, d'_{j-c})` pairs reaching it.
    reach: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectApproxSolution {
    /// Quotient in original coordinates.
    pub quotient: LatticePolynomial,
    /// `q'_c` in shifted coordinates; also the certified `l_c`.
    pub shifted_quotient: Vec<f64>,
    /// `ξ_j = max(1, (q ⊕ d)_j / p_j)` with the exact max.
    pub slacks: BTreeMap<Degree, f64>,
    /// Log of the relaxed objective with exact maxima.
    pub goal2_log: f64,
    /// Fractional least-squares surrogate `Σ (M_j² + p_j²) / Σ 2 p_j M_j`.
    pub goal1: f64,
    /// `Σ_j ((q ⊕ d)_j - p_j)²`.
    pub goal0: f64,
    /// Smoothed log objective after every accepted step.
    pub trace: Vec<f64>,
}

impl DirectApproxSolution {
    pub fn max_slack(&self) -> f64 {
        self.slacks.values().copied().fold(1.0, f64::max)
    }
}

impl DirectApproxProblem {
    pub fn new(instance: ShiftedInstance, regularization: f64) -> Result<Self> {
        if !(regularization > 0.0 && regularization.is_finite()) {
            return Err(Error::InvalidArgument(format!("R must be positive, got {regularization}")));
        }
        let degrees: Vec<Degree> = instance.p.degrees().cloned().collect();
        let p: Vec<f64> = instance.p.iter().map(|(_, v)| v).collect();
        let index: BTreeMap<&Degree, usize> = degrees.iter().enumerate().map(|(k, j)| (j, k)).collect();
        let mut reach = vec![Vec::new(); degrees.len()];
        for (c, pairs) in instance.products().into_iter().enumerate() {
            for (j, di) in pairs {
                reach[index[&j]].push((c, di));
            }
        }
        Ok(Self { instance, regularization, degrees, p, reach })
    }

    pub fn n_vars(&self) -> usize {
        self.instance.shifts.len()
    }

    /// Smoothed log objective and its gradient in `u = ln q'`.
    pub fn objective_and_gradient(&self, u: &[f64], beta: f64) -> (f64, Vec<f64>) {
        let n = self.n_vars();
        let r = n as f64;
        let q: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        let mut s = 0.0;
        let mut xi_sum = 0.0;
        // Per degree: smoothed M_j, its softmax weights, and the slack weight σ_j.
        let mut parts = Vec::with_capacity(self.p.len());
        for (reach, &pj) in self.reach.iter().zip(&self.p) {
            s += pj * pj;
            if reach.is_empty() {
                xi_sum += 1.0;
                parts.push(None);
                continue;
            }
            let vals: Vec<f64> = reach.iter().map(|&(c, di)| q[c] + di).collect();
            let (m, w) = smooth_max(&vals, beta);
            s += m * m;
            let (xi, xw) = smooth_max(&[1.0, m / pj], beta);
            xi_sum += xi;
            parts.push(Some((m, w, xw[1])));
        }
        let ln_a = r * s.ln() - u.iter().sum::<f64>();
        let ln_b = self.regularization.ln() + xi_sum.ln();
        let top = ln_a.max(ln_b);
        let f = top + ((ln_a - top).exp() + (ln_b - top).exp()).ln();
        let wa = (ln_a - f).exp();
        let wb = (ln_b - f).exp();

        let mut grad = vec![-wa; n];
        for ((reach, &pj), part) in self.reach.iter().zip(&self.p).zip(&parts) {
            let Some((m, w, sigma)) = part else { continue };
            for (&(c, _), wk) in reach.iter().zip(w) {
                let dm = wk * q[c];
                grad[c] += wa * r * 2.0 * m * dm / s + wb * sigma / pj * dm / xi_sum;
            }
        }
        (f, grad)
    }

    /// Exact `(q ⊕ d)_j` at shifted `q`, `None` where no shift reaches `j`.
    fn convolution(&self, q: &[f64]) -> Vec<Option<f64>> {
        self.reach
            .iter()
            .map(|reach| reach.iter().map(|&(c, di)| q[c] + di).reduce(f64::max))
            .collect()
    }
}

/// `(1/β) ln Σ exp(β v_k)` and its softmax weights.
fn smooth_max(vals: &[f64], beta: f64) -> (f64, Vec<f64>) {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = vals.iter().map(|v| (beta * (v - m)).exp()).collect();
    let total: f64 = e.iter().sum();
    (m + total.ln() / beta, e.into_iter().map(|x| x / total).collect())
}

pub fn solve_direct_approx(problem: &DirectApproxProblem, opts: &DirectApproxOptions) -> Result<DirectApproxSolution> {
    if !(opts.beta0 > 0.0 && opts.beta_max >= opts.beta0) {
        return Err(Error::InvalidArgument("need 0 < beta0 <= beta_max".into()));
    }
    let mut u: Vec<f64> = problem.instance.erosion().iter().map(|q| q.ln()).collect();
    let mut trace = Vec::new();
    let mut beta = opts.beta0;
    loop {
        quasi_newton(problem, &mut u, beta, opts, &mut trace)?;
        if beta >= opts.beta_max {
            break;
        }
        beta = (beta * 2.0).min(opts.beta_max);
    }
    if let Some(k) = trace.windows(2).position(|w| w[1] > w[0] + 1e-10) {
        return Err(Error::Solver { message: format!("objective increased at step {}", k + 1), trace });
    }
    certify(problem, &u, trace)
}

fn quasi_newton(
    problem: &DirectApproxProblem,
    u: &mut Vec<f64>,
    beta: f64,
    opts: &DirectApproxOptions,
    trace: &mut Vec<f64>,
) -> Result<()> {
    let n = u.len();
    let (mut f, mut g) = problem.objective_and_gradient(u, beta);
    trace.push(f);
    let mut h = identity(n);
    for _ in 0..opts.max_iters {
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver { message: "non-finite objective".into(), trace: trace.clone() });
        }
        if g.iter().map(|v| v.abs()).fold(0.0, f64::max) < opts.grad_tol {
            break;
        }
        let mut dir = mat_vec(&h, &g, -1.0);
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            h = identity(n);
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        let mut s = 1.0;
        let step = loop {
            let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + s * b).collect();
            let (ft, gt) = problem.objective_and_gradient(&trial, beta);
            if ft.is_finite() && ft <= f + 1e-4 * s * slope {
                break Some((trial, ft, gt));
            }
            s *= 0.5;
            if s < 1e-20 {
                break None;
            }
        };
        let Some((trial, ft, gt)) = step else { break };
        let sk: Vec<f64> = trial.iter().zip(u.iter()).map(|(a, b)| a - b).collect();
        let yk: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&sk, &yk);
        if sy > 1e-16 {
            bfgs_update(&mut h, &sk, &yk, sy);
        }
        let stalled = f - ft <= 1e-15 * (1.0 + f.abs());
        *u = trial;
        f = ft;
        g = gt;
        trace.push(f);
        if stalled {
            break;
        }
    }
    Ok(())
}

fn certify(problem: &DirectApproxProblem, u: &[f64], trace: Vec<f64>) -> Result<DirectApproxSolution> {
    let q: Vec<f64> = u.iter().map(|v| v.exp()).collect();
    let conv = problem.convolution(&q);
    let mut slacks = BTreeMap::new();
    let (mut s, mut cross, mut goal0, mut xi_sum) = (0.0, 0.0, 0.0, 0.0);
    for ((j, &pj), m) in problem.degrees.iter().zip(&problem.p).zip(&conv) {
        s += pj * pj;
        let xi = match m {
            Some(m) => {
                s += m * m;
                cross += 2.0 * pj * m;
                goal0 += (m - pj).powi(2);
                (m / pj).max(1.0)
            }
            None => 1.0,
        };
        if let Some(m) = m {
            if m / (pj * xi) > 1.0 + 1e-8 {
                return Err(Error::Solver { message: format!("slack constraint violated at {j:?}"), trace });
            }
        }
        xi_sum += xi;
        slacks.insert(j.clone(), xi);
    }
    let r = q.len() as f64;
    let ln_a = r * s.ln() - u.iter().sum::<f64>();
    let ln_b = problem.regularization.ln() + xi_sum.ln();
    let top = ln_a.max(ln_b);
    let goal2_log = top + ((ln_a - top).exp() + (ln_b - top).exp()).ln();
    Ok(DirectApproxSolution {
        quotient: problem.instance.to_original(&q),
        shifted_quotient: q,
        slacks,
        goal2_log,
        goal1: s / cross,
        goal0,
        trace,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for k in 0..n {
        h[k * n + k] = 1.0;
    }
    h
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mat_vec(h: &[f64], v: &[f64], scale: f64) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|r| scale * dot(&h[r * n..(r + 1) * n], v)).collect()
}

/// Inverse-Hessian update `H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y, 1.0);
    let yhy = dot(y, &hy);
    for r in 0..n {
        for c in 0..n {
            h[r * n + c] += -rho * (s[r] * hy[c] + hy[r] * s[c]) + (rho * rho * yhy + rho) * s[r] * s[c];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub regularization: f64,
    pub goal0: f64,
    pub goal1: f64,
    pub goal2_log: f64,
    pub max_slack: f64,
    pub quotient: TropicalPolynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    /// Index of the entry with the smallest goal0 (first on ties).
    pub best: usize,
}

/// Solves one instance per `R` concurrently and ranks them by goal0.
pub fn r_sweep(instance: &ShiftedInstance, weights: &[f64], opts: &DirectApproxOptions) -> Result<SweepReport> {
    if weights.is_empty() {
        return Err(Error::InvalidArgument("empty R sweep".into()));
    }
    let entries = weights
        .par_iter()
        .map(|&r| {
            let sol = solve_direct_approx(&DirectApproxProblem::new(instance.clone(), r)?, opts)?;
            Ok(SweepEntry {
                regularization: r,
                goal0: sol.goal0,
                goal1: sol.goal1,
                goal2_log: sol.goal2_log,
                max_slack: sol.max_slack(),
                quotient: sol.quotient.to_polynomial(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = entries
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.goal0.total_cmp(&b.1.goal0))
        .map(|(k, _)| k)
        .expect("nonempty sweep");
    Ok(SweepReport { entries, best })
}
