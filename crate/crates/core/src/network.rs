//! Two-layer ReLU classifiers viewed as differences of tropical polynomials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::division::SAMPLE_RADIUS;
use crate::error::{check_dim, Error, Result};
use crate::poly::{dot, Term, TropicalPolynomial, DEFAULT_TOL};
use crate::polytope::{zonotope_generators, Generator};

/// `x ↦ Σ_i w2_i · relu(W1_i · x + b1_i) + b2`. `W1` is stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetJson", into = "NetJson")]
pub struct TwoLayerNet {
    dim: usize,
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetJson {
    #[serde(rename = "W1")]
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl TryFrom<NetJson> for TwoLayerNet {
    type Error = Error;

    fn try_from(j: NetJson) -> Result<Self> {
        let dim = j.w1.first().map(Vec::len).ok_or_else(|| Error::Shape("W1 has no rows".into()))?;
        if let Some(row) = j.w1.iter().find(|r| r.len() != dim) {
            return Err(Error::Shape(format!("ragged W1: row of length {} in a {dim}-column matrix", row.len())));
        }
        TwoLayerNet::new(dim, j.w1.concat(), j.b1, j.w2, j.b2)
    }
}

impl From<TwoLayerNet> for NetJson {
    fn from(n: TwoLayerNet) -> Self {
        NetJson { w1: n.w1.chunks(n.dim).map(<[f64]>::to_vec).collect(), b1: n.b1, w2: n.w2, b2: n.b2 }
    }
}

impl TwoLayerNet {
    pub fn new(dim: usize, w1: Vec<f64>, b1: Vec<f64>, w2: Vec<f64>, b2: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("input dimension must be positive".into()));
        }
        let hidden = b1.len();
        if hidden == 0 {
            return Err(Error::Shape("hidden layer is empty".into()));
        }
        if w1.len() != hidden * dim {
            return Err(Error::Shape(format!("W1 has {} entries, expected {hidden}×{dim}", w1.len())));
        }
        if w2.len() != hidden {
            return Err(Error::Shape(format!("w2 has {} entries, expected {hidden}", w2.len())));
        }
        let net = Self { dim, w1, b1, w2, b2 };
        net.check_finite()?;
        Ok(net)
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        let all = self.w1.iter().chain(&self.b1).chain(&self.w2).chain(std::iter::once(&self.b2));
        if all.into_iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("network parameters"))
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hidden(&self) -> usize {
        self.b1.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.w1[i * self.dim..(i + 1) * self.dim]
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn b2(&self) -> f64 {
        self.b2
    }

    pub fn with_b2(mut self, b2: f64) -> Self {
        self.b2 = b2;
        self
    }

    pub fn preactivation(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.preactivation_unchecked(x))
    }

    pub(crate) fn preactivation_unchecked(&self, x: &[f64]) -> f64 {
        let hidden: f64 = (0..self.hidden())
            .map(|i| self.w2[i] * (dot(self.row(i), x) + self.b1[i]).max(0.0))
            .sum();
        hidden + self.b2
    }
}

/// `x ↦ Σ_k scales_k · max(weights_k · x + biases_k, 0)` over the neurons of one
/// output-weight sign. Only neurons with a nonzero scale are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct TropicalPart {
    dim: usize,
    scales: Vec<f64>,
    weights: Vec<f64>,
    biases: Vec<f64>,
    neurons: Vec<usize>,
}

impl TropicalPart {
    /// `neurons[k]` names the original hidden unit of row `k`.
    pub fn new(dim: usize, scales: Vec<f64>, weights: Vec<f64>, biases: Vec<f64>, neurons: Vec<usize>) -> Result<Self> {
        let n = scales.len();
        if weights.len() != n * dim || biases.len() != n || neurons.len() != n {
            return Err(Error::Shape("tropical part rows disagree in length".into()));
        }
        if scales.iter().any(|&s| s < 0.0 || !s.is_finite()) {
            return Err(Error::InvalidArgument("part scales must be finite and nonnegative".into()));
        }
        let mut part = Self { dim, scales: Vec::new(), weights: Vec::new(), biases: Vec::new(), neurons: Vec::new() };
        for k in 0..n {
            if scales[k] > 0.0 {
                part.scales.push(scales[k]);
                part.weights.extend_from_slice(&weights[k * dim..(k + 1) * dim]);
                part.biases.push(biases[k]);
                part.neurons.push(neurons[k]);
            }
        }
        Ok(part)
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, scales: Vec::new(), weights: Vec::new(), biases: Vec::new(), neurons: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn neurons(&self) -> &[usize] {
        &self.neurons
    }

    pub fn weights(&self, k: usize) -> &[f64] {
        &self.weights[k * self.dim..(k + 1) * self.dim]
    }

    /// Scale of every original hidden unit, zero for units not in this part.
    pub fn scales_by_neuron(&self, hidden: usize) -> Vec<f64> {
        let mut out = vec![0.0; hidden];
        for (k, &n) in self.neurons.iter().enumerate() {
            out[n] = self.scales[k];
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        (0..self.len()).map(|k| self.scales[k] * self.pre(k, x).max(0.0)).sum()
    }

    fn pre(&self, k: usize, x: &[f64]) -> f64 {
        dot(self.weights(k), x) + self.biases[k]
    }

    /// Extended-space segments `scale_k · (w_k, b_k)` generating the zonotope.
    pub fn generators(&self) -> Result<Vec<Generator>> {
        let rows: Vec<Vec<f64>> = (0..self.len()).map(|k| self.weights(k).to_vec()).collect();
        let mut gens = zonotope_generators(&rows, &self.biases, &self.scales)?;
        for g in &mut gens {
            g.neuron = self.neurons[g.neuron];
        }
        Ok(gens)
    }

    /// Row `k` alone as the tropical polynomial `max(s·w·x + s·b, 0)`.
    pub fn segment_polynomial(&self, k: usize) -> TropicalPolynomial {
        let s = self.scales[k];
        let terms = vec![
            Term::new(self.weights(k).iter().map(|w| s * w).collect(), s * self.biases[k]),
            Term::new(vec![0.0; self.dim], 0.0),
        ];
        TropicalPolynomial::new(self.dim, terms).expect("finite segment")
    }

    /// This part with row `k` removed.
    pub fn without(&self, k: usize) -> Self {
        let mut out = Self::empty(self.dim);
        for r in (0..self.len()).filter(|&r| r != k) {
            out.scales.push(self.scales[r]);
            out.weights.extend_from_slice(self.weights(r));
            out.biases.push(self.biases[r]);
            out.neurons.push(self.neurons[r]);
        }
        out
    }

    /// Row `k` alone.
    pub fn only(&self, k: usize) -> Self {
        Self {
            dim: self.dim,
            scales: vec![self.scales[k]],
            weights: self.weights(k).to_vec(),
            biases: vec![self.biases[k]],
            neurons: vec![self.neurons[k]],
        }
    }
}

/// Splits `net` into `p₊`, `p₋` and the output bias, with
/// `preactivation = p₊ − p₋ + bias`.
pub fn decompose(net: &TwoLayerNet) -> (TropicalPart, TropicalPart, f64) {
    let n = net.hidden();
    let idx: Vec<usize> = (0..n).collect();
    let plus: Vec<f64> = net.w2.iter().map(|&w| w.max(0.0)).collect();
    let minus: Vec<f64> = net.w2.iter().map(|&w| (-w).max(0.0)).collect();
    let build = |scales| {
        TropicalPart::new(net.dim, scales, net.w1.clone(), net.b1.clone(), idx.clone()).expect("consistent net shapes")
    };
    (build(plus), build(minus), net.b2)
}

/// Firing set of a part's rows, one bit per row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern(Vec<u64>);

impl Pattern {
    pub fn empty(len: usize) -> Self {
        Pattern(vec![0; len.div_ceil(64)])
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut p = Self::empty(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                p.set(i);
            }
        }
        p
    }

    pub fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub fn is_set(&self, i: usize) -> bool {
        self.0.get(i / 64).is_some_and(|w| w >> (i % 64) & 1 == 1)
    }

    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    pub fn words(&self) -> &[u64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivatedVertex {
    pub pattern: Pattern,
    /// `Σ_{k firing} scale_k · (w_k, b_k)`, length `dim + 1`.
    pub extended: Vec<f64>,
}

impl ActivatedVertex {
    /// `extended · (x, 1)`.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        let d = x.len();
        dot(&self.extended[..d], x) + self.extended[d]
    }
}

pub fn activated_vertex(part: &TropicalPart, x: &[f64]) -> Result<ActivatedVertex> {
    check_dim(part.dim, x.len())?;
    let mut pattern = Pattern::empty(part.len());
    for k in 0..part.len() {
        if part.pre(k, x) > 0.0 {
            pattern.set(k);
        }
    }
    let extended = vertex_of_pattern(part, &pattern);
    Ok(ActivatedVertex { pattern, extended })
}

/// Extended vertex selected by `pattern`.
pub fn vertex_of_pattern(part: &TropicalPart, pattern: &Pattern) -> Vec<f64> {
    let d = part.dim;
    let mut ext = vec![0.0; d + 1];
    for k in (0..part.len()).filter(|&k| pattern.is_set(k)) {
        let s = part.scales[k];
        for (e, w) in ext[..d].iter_mut().zip(part.weights(k)) {
            *e += s * w;
        }
        ext[d] += s * part.biases[k];
    }
    ext
}

/// Checks `part = quotient + divisor` pointwise at `samples` uniform points of `[-5, 5]^dim`.
pub fn divides_exactly(
    part: &TropicalPart,
    divisor: &TropicalPart,
    quotient: &TropicalPart,
    samples: usize,
    seed: u64,
) -> Result<bool> {
    check_dim(part.dim, divisor.dim)?;
    check_dim(part.dim, quotient.dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; part.dim];
    for _ in 0..samples {
        for v in x.iter_mut() {
            *v = rng.random_range(-SAMPLE_RADIUS..=SAMPLE_RADIUS);
        }
        let lhs = part.eval_unchecked(&x);
        let rhs = quotient.eval_unchecked(&x) + divisor.eval_unchecked(&x);
        if (lhs - rhs).abs() > DEFAULT_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Divides `part` by the segment of original hidden unit `neuron`, with the
/// remaining segments as quotient, and checks the product identity.
pub fn check_divisibility(part: &TropicalPart, neuron: usize, samples: usize, seed: u64) -> Result<bool> {
    let k = part
        .neurons
        .iter()
        .position(|&n| n == neuron)
        .ok_or_else(|| Error::InvalidArgument(format!("neuron {neuron} has zero scale in this part")))?;
    divides_exactly(part, &part.only(k), &part.without(k), samples, seed)
}
