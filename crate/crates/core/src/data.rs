//! Binary-labelled datasets: IDX and CSV ingestion and a synthetic generator.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

/// Row-major features with labels in `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub samples: usize,
    pub dim: usize,
    pub positives: usize,
    pub feature_min: f64,
    pub feature_max: f64,
}

/// How raw class labels map to `{0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Labeling {
    /// Keep only classes `a` and `b`, relabelled 0 and 1.
    Pair(u8, u8),
    /// Even classes to 0, odd classes to 1.
    EvenOdd,
}

impl Labeling {
    fn map(&self, raw: u8) -> Option<u8> {
        match *self {
            Labeling::Pair(a, _) if raw == a => Some(0),
            Labeling::Pair(_, b) if raw == b => Some(1),
            Labeling::Pair(..) => None,
            Labeling::EvenOdd => Some(raw % 2),
        }
    }
}

impl Dataset {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if dim == 0 || labels.is_empty() {
            return Err(Error::Shape("a dataset needs a positive dimension and at least one sample".into()));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::Shape(format!(
                "{} feature values do not form {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidArgument(format!("label {l} is not binary")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset features"));
        }
        Ok(Self { dim, features, labels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks(self.dim)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(self.dim, features, labels)
    }

    /// The first `n` samples (all of them if `n >= len`).
    pub fn head(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        Self::new(self.dim, self.features[..n * self.dim].to_vec(), self.labels[..n].to_vec())
    }

    /// Seeded shuffle, then the first `round(fraction · n)` samples go to the
    /// first half of the split.
    pub fn split(&self, fraction: f64, seed: u64) -> Result<(Self, Self)> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = ((fraction * self.len() as f64).round() as usize).clamp(1, self.len().saturating_sub(1).max(1));
        if cut >= self.len() {
            return Err(Error::InvalidArgument("cannot split a single-sample dataset".into()));
        }
        Ok((self.select(&idx[..cut])?, self.select(&idx[cut..])?))
    }

    /// `n` samples drawn without replacement by a seeded shuffle, or all of them.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<Self> {
        if n >= self.len() {
            return Ok(self.clone());
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.select(&idx[..n])
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats {
            samples: self.len(),
            dim: self.dim,
            positives: self.labels.iter().filter(|&&l| l == 1).count(),
            feature_min: self.features.iter().copied().fold(f64::INFINITY, f64::min),
            feature_max: self.features.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse("truncated IDX header".into()))
}

/// Parses an IDX image file into `(count, rows·cols, pixels / 255)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES {
        return Err(Error::Parse(format!("bad IDX image magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let dim = be_u32(bytes, 8)? as usize * be_u32(bytes, 12)? as usize;
    let body = &bytes[16..];
    if body.len() != n * dim {
        return Err(Error::Parse(format!("IDX image body has {} bytes, expected {}", body.len(), n * dim)));
    }
    Ok((n, dim, body.iter().map(|&b| f64::from(b) / 255.0).collect()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS {
        return Err(Error::Parse(format!("bad IDX label magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::Parse(format!("IDX label body has {} bytes, expected {n}", body.len())));
    }
    Ok(body.to_vec())
}

/// Reads an IDX image/label pair. Without a labeling the raw labels must
/// already be binary.
pub fn load_idx(images: &Path, labels: &Path, labeling: Option<Labeling>) -> Result<Dataset> {
    let (n, dim, pixels) = parse_idx_images(&fs::read(images)?)?;
    let raw = parse_idx_labels(&fs::read(labels)?)?;
    if raw.len() != n {
        return Err(Error::Parse(format!("{n} images but {} labels", raw.len())));
    }
    relabel(dim, &pixels, &raw, labeling)
}

fn relabel(dim: usize, features: &[f64], raw: &[u8], labeling: Option<Labeling>) -> Result<Dataset> {
    let Some(labeling) = labeling else {
        return Dataset::new(dim, features.to_vec(), raw.to_vec());
    };
    let mut kept = Vec::new();
    let mut labels = Vec::new();
    for (i, &l) in raw.iter().enumerate() {
        if let Some(mapped) = labeling.map(l) {
            kept.extend_from_slice(&features[i * dim..(i + 1) * dim]);
            labels.push(mapped);
        }
    }
    Dataset::new(dim, kept, labels)
}

/// CSV with a header row, the label in the first column and features after.
pub fn load_csv(path: &Path, labeling: Option<Labeling>) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut dim = None;
    let mut features = Vec::new();
    let mut raw = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let width = record.len().checked_sub(1).filter(|&w| w > 0).ok_or_else(|| {
            Error::Parse(format!("row {}: need a label and at least one feature", line + 1))
        })?;
        if *dim.get_or_insert(width) != width {
            return Err(Error::Parse(format!("row {}: expected {} features, found {width}", line + 1, dim.unwrap())));
        }
        let label: u8 = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: bad label {:?}", line + 1, &record[0])))?;
        raw.push(label);
        for field in record.iter().skip(1) {
            features.push(
                field.trim().parse().map_err(|_| Error::Parse(format!("row {}: bad feature {field:?}", line + 1)))?,
            );
        }
    }
    let dim = dim.ok_or_else(|| Error::Parse("CSV has no data rows".into()))?;
    relabel(dim, &features, &raw, labeling)
}

/// Two unit-variance Gaussian classes centred at `∓separation/2` on the
/// first axis, shuffled.
pub fn synth_gaussians(n: usize, dim: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("sample count must be positive and even, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for &k in &order {
        let label = u8::from(k >= n / 2);
        let centre = if label == 1 { separation / 2.0 } else { -separation / 2.0 };
        for axis in 0..dim {
            let noise: f64 = StandardNormal.sample(&mut rng);
            features.push(noise + if axis == 0 { centre } else { 0.0 });
        }
        labels.push(label);
    }
    Dataset::new(dim, features, labels)
}
