//! Small dense two-phase simplex with Bland's pivoting rule.
//!
//! Problems are stated as `maximize c·x` subject to linear constraints and
//! `x >= 0`. The solver is sized for hull-height and membership queries (tens
//! of variables), not for general use.

use thiserror::Error;

/// Residual allowed on constraints of a returned optimum.
pub const RESIDUAL_TOL: f64 = 1e-8;
const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed LP: {0}")]
    Malformed(String),
    #[error("simplex iteration limit {0} exceeded")]
    IterationLimit(usize),
    #[error("LP solution violates constraints by {0:e}")]
    Residual(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub kind: ConstraintKind,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, kind: ConstraintKind, rhs: f64) -> Self {
        Self { coeffs, kind, rhs }
    }

    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self::new(coeffs, ConstraintKind::Eq, rhs)
    }

    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self::new(coeffs, ConstraintKind::Le, rhs)
    }

    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self::new(coeffs, ConstraintKind::Ge, rhs)
    }

    /// Amount by which `x` violates this constraint (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
        match self.kind {
            ConstraintKind::Le => (lhs - self.rhs).max(0.0),
            ConstraintKind::Ge => (self.rhs - lhs).max(0.0),
            ConstraintKind::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `maximize objective·x` s.t. `constraints`, `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, constraints: Vec<Constraint>) -> Self {
        Self { objective, constraints }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        solve(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; meaningful only when `status` is `Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    /// `rows × (cols + 1)`; the last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, row: usize) -> f64 {
        self.a[row][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[row][col];
        for v in self.a[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[row].clone();
        for (r, line) in self.a.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (v, pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Runs Bland-rule simplex maximizing `cost` over columns `< allowed`.
    /// Returns `false` if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize, limit: usize) -> Result<bool, LpError> {
        for _ in 0..limit {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let z: f64 = self.basis.iter().enumerate().map(|(r, &b)| cost[b] * self.a[r][j]).sum();
                cost[j] - z > COST_TOL
            });
            let Some(col) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.a.len() {
                let coef = self.a[r][col];
                if coef > PIVOT_TOL {
                    let ratio = self.rhs(r) / coef;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((best, best_ratio)) => {
                            if ratio < best_ratio - 1e-12
                                || (ratio <= best_ratio + 1e-12 && self.basis[r] < self.basis[best])
                            {
                                Some((r, ratio))
                            } else {
                                Some((best, best_ratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((row, _)) => self.pivot(row, col),
            }
        }
        Err(LpError::IterationLimit(limit))
    }
}

pub fn solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    let n = problem.n_vars();
    for (k, c) in problem.constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(LpError::Malformed(format!(
                "constraint {k} has {} coefficients, expected {n}",
                c.coeffs.len()
            )));
        }
        if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Malformed(format!("constraint {k} is not finite")));
        }
    }
    if problem.objective.iter().any(|v| !v.is_finite()) {
        return Err(LpError::Malformed("objective is not finite".into()));
    }

    // Normalize to non-negative right-hand sides.
    let rows: Vec<Constraint> = problem
        .constraints
        .iter()
        .map(|c| {
            if c.rhs < 0.0 {
                let kind = match c.kind {
                    ConstraintKind::Le => ConstraintKind::Ge,
                    ConstraintKind::Ge => ConstraintKind::Le,
                    ConstraintKind::Eq => ConstraintKind::Eq,
                };
                Constraint::new(c.coeffs.iter().map(|v| -v).collect(), kind, -c.rhs)
            } else {
                c.clone()
            }
        })
        .collect();

    let m = rows.len();
    let n_slack = rows.iter().filter(|c| c.kind != ConstraintKind::Eq).count();
    let n_art = rows.iter().filter(|c| c.kind != ConstraintKind::Le).count();
    let real_cols = n + n_slack;
    let cols = real_cols + n_art;

    let mut a = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let (mut s, mut t) = (n, real_cols);
    for (r, c) in rows.iter().enumerate() {
        a[r][..n].copy_from_slice(&c.coeffs);
        a[r][cols] = c.rhs;
        match c.kind {
            ConstraintKind::Le => {
                a[r][s] = 1.0;
                basis[r] = s;
                s += 1;
            }
            ConstraintKind::Ge => {
                a[r][s] = -1.0;
                s += 1;
                a[r][t] = 1.0;
                basis[r] = t;
                t += 1;
            }
            ConstraintKind::Eq => {
                a[r][t] = 1.0;
                basis[r] = t;
                t += 1;
            }
        }
    }
    let mut tab = Tableau { a, basis, cols };
    let limit = 50 * (m + cols) + 1000;

    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        for v in &mut phase1[real_cols..] {
            *v = -1.0;
        }
        tab.optimize(&phase1, cols, limit)?;
        let infeasibility: f64 = (0..m)
            .filter(|&r| tab.basis[r] >= real_cols)
            .map(|r| tab.rhs(r))
            .sum();
        let scale = 1.0 + rows.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
        if infeasibility > 1e-9 * scale {
            return Ok(LpSolution { status: LpStatus::Infeasible, x: vec![0.0; n], objective: f64::NAN });
        }
        // Drive zero-level artificials out of the basis, dropping redundant rows.
        let mut r = 0;
        while r < tab.a.len() {
            if tab.basis[r] >= real_cols {
                match (0..real_cols).find(|&j| tab.a[r][j].abs() > PIVOT_TOL) {
                    Some(j) => {
                        tab.pivot(r, j);
                        r += 1;
                    }
                    None => {
                        tab.a.remove(r);
                        tab.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&problem.objective);
    // Artificial columns are excluded from entering in phase 2.
    if !tab.optimize(&cost, real_cols, limit)? {
        return Ok(LpSolution { status: LpStatus::Unbounded, x: vec![0.0; n], objective: f64::INFINITY });
    }

    let mut x = vec![0.0; n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rhs(r).max(0.0);
        }
    }
    let residual = problem
        .constraints
        .iter()
        .map(|c| c.violation(&x))
        .fold(0.0, f64::max);
    let scale = 1.0 + problem.constraints.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
    if residual > RESIDUAL_TOL * scale {
        return Err(LpError::Residual(residual));
    }
    let objective = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { status: LpStatus::Optimal, x, objective })
}
