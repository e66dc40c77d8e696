//! Vertex-based compression of two-layer ReLU classifiers.
//!
//! Each signed half of the network is a zonotope polynomial; the inputs of a
//! sample set pick out its most frequently activated vertices, which become
//! the hidden rows of a smaller network. A single output-bias correction then
//! absorbs the mean preactivation error.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::network::{activated_vertex, decompose, vertex_of_pattern, Pattern, TropicalPart, TwoLayerNet};
use crate::train::{accuracy, train, TrainConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Default size of the vertex-harvesting sample.
pub const DEFAULT_SUBSET: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct VertexEntry {
    pub pattern: Pattern,
    pub extended: Vec<f64>,
    pub count: usize,
}

/// Activated vertices by decreasing count, ties by ascending pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexStats {
    pub entries: Vec<VertexEntry>,
}

impl VertexStats {
    pub fn total(&self) -> usize {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn rows_of<'a>(x: &'a [f64], dim: usize) -> Result<std::slice::Chunks<'a, f64>> {
    if x.is_empty() || !x.len().is_multiple_of(dim) {
        return Err(Error::Shape(format!("{} values do not form a nonempty sample matrix of width {dim}", x.len())));
    }
    Ok(x.chunks(dim))
}

/// Counts the activated vertex of every row of the row-major matrix `x`.
pub fn harvest_vertices(part: &TropicalPart, x: &[f64]) -> Result<VertexStats> {
    let dim = part.dim();
    let _ = rows_of(x, dim)?;
    let patterns: Vec<Pattern> = x
        .par_chunks(dim)
        .map(|row| activated_vertex(part, row).map(|v| v.pattern))
        .collect::<Result<_>>()?;
    let mut counts: BTreeMap<Pattern, usize> = BTreeMap::new();
    for p in patterns {
        *counts.entry(p).or_default() += 1;
    }
    let mut entries: Vec<VertexEntry> = counts
        .into_iter()
        .map(|(pattern, count)| VertexEntry { extended: vertex_of_pattern(part, &pattern), pattern, count })
        .collect();
    entries.sort_by_key(|e| std::cmp::Reverse(e.count));
    Ok(VertexStats { entries })
}

/// Extended rows `(w, b)` produced by the vertex assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase1Rows {
    pub rows: Vec<Vec<f64>>,
    /// Trailing rows left at zero because the vertices ran out.
    pub zero_filled: usize,
}

/// Row 1 takes the top vertex; each later vertex `u_j` is subtracted from a
/// uniformly chosen earlier row and becomes row `j`.
pub fn phase1(stats: &VertexStats, k: usize, dim: usize, seed: u64) -> Result<Phase1Rows> {
    if k == 0 {
        return Err(Error::InvalidArgument("phase 1 needs at least one row".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    phase1_with(stats, k, dim, &mut rng)
}

fn phase1_with(stats: &VertexStats, k: usize, dim: usize, rng: &mut ChaCha8Rng) -> Result<Phase1Rows> {
    if let Some(e) = stats.entries.iter().find(|e| e.extended.len() != dim + 1) {
        return Err(Error::DimensionMismatch { expected: dim + 1, found: e.extended.len() });
    }
    let used = k.min(stats.len());
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (j, entry) in stats.entries.iter().take(used).enumerate() {
        if j > 0 {
            let pick = rng.random_range(0..j);
            for (r, u) in rows[pick].iter_mut().zip(&entry.extended) {
                *r -= u;
            }
        }
        rows.push(entry.extended.clone());
    }
    rows.resize(k, vec![0.0; dim + 1]);
    Ok(Phase1Rows { rows, zero_filled: k - used })
}

/// Output bias making the reduced network's mean preactivation on `x`
/// match the original's. The reduced network's own `b2` is ignored.
pub fn phase2(net: &TwoLayerNet, reduced: &TwoLayerNet, x: &[f64]) -> Result<f64> {
    check_dim(net.dim(), reduced.dim())?;
    let rows = rows_of(x, net.dim())?;
    let n = rows.len() as f64;
    let diff: f64 = rows
        .map(|r| net.preactivation_unchecked(r) - net.b2() - (reduced.preactivation_unchecked(r) - reduced.b2()))
        .sum();
    Ok(diff / n + net.b2())
}

/// Mean of `p(x) - d(x)` over the rows of `x`.
pub fn mean_quotient(p: &TropicalPart, d: &TropicalPart, x: &[f64]) -> Result<f64> {
    check_dim(p.dim(), d.dim())?;
    let rows = rows_of(x, p.dim())?;
    let n = rows.len() as f64;
    Ok(rows.map(|r| p.eval_unchecked(r) - d.eval_unchecked(r)).sum::<f64>() / n)
}

/// `Σ_x (q0 + d(x) - p(x))²` for a constant quotient `q0`.
pub fn goal_orig(p: &TropicalPart, d: &TropicalPart, q0: f64, x: &[f64]) -> Result<f64> {
    check_dim(p.dim(), d.dim())?;
    Ok(rows_of(x, p.dim())?.map(|r| (q0 + d.eval_unchecked(r) - p.eval_unchecked(r)).powi(2)).sum())
}

/// Rows `⌈f·n⌉` split between the parts in proportion to their sizes, by
/// largest remainder (ties to the positive part).
pub fn neuron_budget(f: f64, hidden: usize, n_plus: usize, n_minus: usize) -> Result<(usize, usize)> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::InvalidArgument(format!("kept fraction must lie in (0, 1], got {f}")));
    }
    let active = n_plus + n_minus;
    if active == 0 {
        return Err(Error::InvalidArgument("network has no neuron with a nonzero output weight".into()));
    }
    let total = ((f * hidden as f64) - 1e-9).ceil().max(1.0) as usize;
    let quota_plus = total as f64 * n_plus as f64 / active as f64;
    let mut plus = quota_plus.floor() as usize;
    let mut minus = (total as f64 * n_minus as f64 / active as f64).floor() as usize;
    if plus + minus < total {
        let rem_plus = quota_plus - plus as f64;
        let rem_minus = total as f64 * n_minus as f64 / active as f64 - minus as f64;
        if rem_plus >= rem_minus {
            plus += 1;
        } else {
            minus += 1;
        }
    }
    if (n_plus > 0 && plus == 0) || (n_minus > 0 && minus == 0) {
        return Err(Error::InvalidArgument(format!(
            "fraction {f} leaves a nonempty part without neurons ({plus} positive, {minus} negative)"
        )));
    }
    Ok((plus, minus))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub schema_version: u32,
    pub dataset: String,
    pub model: String,
    pub method: String,
    pub kept_fraction: f64,
    pub original_neurons: usize,
    pub compressed_neurons: usize,
    pub positive_neurons: usize,
    pub negative_neurons: usize,
    pub distinct_positive_vertices: usize,
    pub distinct_negative_vertices: usize,
    pub zero_filled: usize,
    pub bias: f64,
    pub samples: usize,
    /// Root mean squared preactivation error on the sample set.
    pub preactivation_rmse: f64,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_accuracy_before: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_accuracy_after: Option<f64>,
}

/// Compresses `net` to `⌈f·n1⌉` hidden units using the samples of `x`.
pub fn compress(net: &TwoLayerNet, x: &Dataset, f: f64, seed: u64) -> Result<(TwoLayerNet, CompressionReport)> {
    check_dim(net.dim(), x.dim())?;
    let dim = net.dim();
    let (plus, minus, _) = decompose(net);
    let (k_plus, k_minus) = neuron_budget(f, net.hidden(), plus.len(), minus.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut w1 = Vec::new();
    let mut b1 = Vec::new();
    let mut w2 = Vec::new();
    let mut zero_filled = 0;
    let mut distinct = [0, 0];
    for (slot, (part, k, sign)) in [(&plus, k_plus, 1.0), (&minus, k_minus, -1.0)].into_iter().enumerate() {
        if k == 0 {
            continue;
        }
        let stats = harvest_vertices(part, x.features())?;
        distinct[slot] = stats.len();
        let rows = phase1_with(&stats, k, dim, &mut rng)?;
        zero_filled += rows.zero_filled;
        for row in rows.rows {
            w1.extend_from_slice(&row[..dim]);
            b1.push(row[dim]);
            w2.push(sign);
        }
    }
    let reduced = TwoLayerNet::new(dim, w1, b1, w2, 0.0)?;
    let bias = phase2(net, &reduced, x.features())?;
    let compressed = reduced.with_b2(bias);

    let sq: f64 = x
        .rows()
        .map(|r| (net.preactivation_unchecked(r) - compressed.preactivation_unchecked(r)).powi(2))
        .sum();
    let report = CompressionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset: String::new(),
        model: String::new(),
        method: "tropical".into(),
        kept_fraction: f,
        original_neurons: net.hidden(),
        compressed_neurons: compressed.hidden(),
        positive_neurons: k_plus,
        negative_neurons: k_minus,
        distinct_positive_vertices: distinct[0],
        distinct_negative_vertices: distinct[1],
        zero_filled,
        bias,
        samples: x.len(),
        preactivation_rmse: (sq / x.len() as f64).sqrt(),
        accuracy_before: accuracy(net, x)?,
        accuracy_after: accuracy(&compressed, x)?,
        test_accuracy_before: None,
        test_accuracy_after: None,
    };
    Ok((compressed, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStep {
    pub hidden: usize,
    /// Accuracy on the training data after compression and retraining.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeOutcome {
    pub net: TwoLayerNet,
    pub steps: Vec<IterationStep>,
}

/// Halves the hidden layer `halvings` times, retraining on `train_data` for
/// `config.epochs` epochs after each halving.
pub fn iterative_compress(
    net: &TwoLayerNet,
    train_data: &Dataset,
    x: &Dataset,
    halvings: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<IterativeOutcome> {
    if halvings == 0 {
        return Err(Error::InvalidArgument("need at least one halving".into()));
    }
    let mut current = net.clone();
    let mut steps = Vec::with_capacity(halvings);
    for it in 0..halvings {
        let (compressed, _) = compress(&current, x, 0.5, seed.wrapping_add(it as u64))?;
        current = if config.epochs > 0 {
            let cfg = TrainConfig { seed: config.seed.wrapping_add(it as u64), ..*config };
            train(&compressed, train_data, &cfg)?
        } else {
            compressed
        };
        steps.push(IterationStep { hidden: current.hidden(), accuracy: accuracy(&current, train_data)? });
    }
    Ok(IterativeOutcome { net: current, steps })
}
