//! Max-affine fitting with fixed slopes: alternate between assigning each
//! sample to its maximizing term and refitting each term's intercept by least
//! squares.

use crate::error::{Error, Result};
use crate::network::TropicalPart;
use crate::poly::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct MaxLinearFit {
    pub intercepts: Vec<f64>,
    /// Squared-error objective at the start and after every iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    /// The assignment stabilized (or no step could improve) before `max_iters`.
    pub converged: bool,
}

impl MaxLinearFit {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace starts with the initial objective")
    }
}

/// `Σ_s (max_c (a_c · x_s + q_c) - t_s)²`.
pub fn maxlinear_objective(x: &[f64], targets: &[f64], degrees: &[Vec<f64>], intercepts: &[f64]) -> f64 {
    let dim = x.len() / targets.len();
    x.chunks(dim)
        .zip(targets)
        .map(|(row, t)| (model(row, degrees, intercepts).1 - t).powi(2))
        .sum()
}

/// Index of the maximizing term (first on ties) and the model value.
fn model(row: &[f64], degrees: &[Vec<f64>], intercepts: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (c, (a, q)) in degrees.iter().zip(intercepts).enumerate() {
        let v = dot(a, row) + q;
        if v > best.1 {
            best = (c, v);
        }
    }
    best
}

/// Fits intercepts of `max_c (a_c · x + q_c)` to `targets` at the rows of the
/// row-major matrix `x`. Empty clusters take the worst-fitted sample from a
/// cluster that can spare it; steps that would raise the objective are
/// shortened toward the previous intercepts.
pub fn maxlinear_fit(
    x: &[f64],
    targets: &[f64],
    degrees: &[Vec<f64>],
    init: &[f64],
    max_iters: usize,
) -> Result<MaxLinearFit> {
    let n = targets.len();
    let k = degrees.len();
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument("max-linear fit needs samples and at least one term".into()));
    }
    if init.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: init.len() });
    }
    if !x.len().is_multiple_of(n) {
        return Err(Error::Shape("sample matrix does not match the target count".into()));
    }
    let dim = x.len() / n;
    if let Some(a) = degrees.iter().find(|a| a.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: a.len() });
    }
    let rows: Vec<&[f64]> = x.chunks(dim).collect();

    let mut q = init.to_vec();
    let mut objective = maxlinear_objective(x, targets, degrees, &q);
    let mut trace = vec![objective];
    let mut previous: Option<Vec<usize>> = None;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        let mut assign: Vec<usize> = rows.iter().map(|r| model(r, degrees, &q).0).collect();
        if previous.as_ref() == Some(&assign) {
            converged = true;
            break;
        }
        previous = Some(assign.clone());
        repair_empty_clusters(&rows, targets, degrees, &q, &mut assign);

        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (s, &c) in assign.iter().enumerate() {
            sums[c] += targets[s] - dot(&degrees[c], rows[s]);
            counts[c] += 1;
        }
        let fitted: Vec<f64> =
            (0..k).map(|c| if counts[c] > 0 { sums[c] / counts[c] as f64 } else { q[c] }).collect();

        iterations += 1;
        let mut step = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = q.iter().zip(&fitted).map(|(a, b)| a + step * (b - a)).collect();
            let value = maxlinear_objective(x, targets, degrees, &trial);
            if value <= objective {
                break Some((trial, value));
            }
            step *= 0.5;
            if step < 1e-12 {
                break None;
            }
        };
        match accepted {
            Some((trial, value)) => {
                q = trial;
                objective = value;
                trace.push(value);
            }
            None => {
                trace.push(objective);
                converged = true;
                break;
            }
        }
    }
    Ok(MaxLinearFit { intercepts: q, objective_trace: trace, iterations, converged })
}

fn repair_empty_clusters(rows: &[&[f64]], targets: &[f64], degrees: &[Vec<f64>], q: &[f64], assign: &mut [usize]) {
    let k = degrees.len();
    let mut counts = vec![0usize; k];
    for &c in assign.iter() {
        counts[c] += 1;
    }
    let mut worst: Vec<usize> = (0..rows.len()).collect();
    let residual = |s: usize| (model(rows[s], degrees, q).1 - targets[s]).abs();
    worst.sort_by(|&a, &b| residual(b).total_cmp(&residual(a)).then(a.cmp(&b)));
    let mut donors = worst.into_iter();
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        if let Some(s) = donors.by_ref().find(|&s| counts[assign[s]] > 1) {
            counts[assign[s]] -= 1;
            assign[s] = c;
            counts[c] = 1;
        }
    }
}

/// Samples of `p(x) - d(x)` for fitting a quotient of `p` by `d`.
pub fn division_targets(p: &TropicalPart, d: &TropicalPart, x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() || !x.len().is_multiple_of(p.dim()) {
        return Err(Error::Shape("sample matrix width does not match the parts".into()));
    }
    x.chunks(p.dim()).map(|r| Ok(p.eval(r)? - d.eval(r)?)).collect()
}
