//! Max-plus polynomials.
//!
//! A [`TropicalPolynomial`] is the function `x ↦ max_i (a_i·x + b_i)`. Tropical
//! addition is the pointwise maximum of two such functions and tropical
//! multiplication is their ordinary sum. Polynomials with integer degrees can be
//! brought into [`LatticePolynomial`] form, which carries one coefficient per
//! lattice point of the Newton polytope, each lifted onto the upper hull of the
//! extended Newton polytope.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::polytope::{self, ExtendedPoint};

/// Default absolute tolerance for coefficient comparisons.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Integer degree vector.
pub type Degree = Vec<i64>;

/// One affine piece `degree·x + coeff`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub degree: Vec<f64>,
    pub coeff: f64,
}

impl Term {
    pub fn new(degree: Vec<f64>, coeff: f64) -> Self {
        Self { degree, coeff }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.degree, x) + self.coeff
    }
}

/// A finite maximum of affine functions over `R^dim`.
///
/// Terms are kept sorted by degree (descending, lexicographic) with duplicate
/// degrees collapsed to their largest coefficient. A polynomial without terms is
/// the bottom element (the constant `-inf`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolynomialJson", into = "PolynomialJson")]
pub struct TropicalPolynomial {
    dim: usize,
    terms: Vec<Term>,
}

impl TropicalPolynomial {
    pub fn new(dim: usize, terms: Vec<Term>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("polynomial dimension must be positive".into()));
        }
        let mut collapsed: Vec<Term> = Vec::with_capacity(terms.len());
        for mut term in terms {
            check_dim(dim, term.degree.len())?;
            if !term.coeff.is_finite() || term.degree.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("polynomial term"));
            }
            // -0.0 and 0.0 must compare as the same degree.
            for v in &mut term.degree {
                if *v == 0.0 {
                    *v = 0.0;
                }
            }
            collapsed.push(term);
        }
        collapsed.sort_by(|a, b| cmp_degree(&b.degree, &a.degree));
        collapsed.dedup_by(|later, kept| {
            if later.degree == kept.degree {
                kept.coeff = kept.coeff.max(later.coeff);
                true
            } else {
                false
            }
        });
        Ok(Self { dim, terms: collapsed })
    }

    /// Convenience constructor from `(degree, coeff)` pairs.
    pub fn from_pairs<I, D>(dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (D, f64)>,
        D: Into<Vec<f64>>,
    {
        Self::new(dim, pairs.into_iter().map(|(a, b)| Term::new(a.into(), b)).collect())
    }

    /// Univariate shorthand: `from_univariate(&[(3, 0.0), (0, 0.0)])` is `max(3x, 0)`.
    pub fn from_univariate(pairs: &[(i64, f64)]) -> Self {
        Self::from_pairs(1, pairs.iter().map(|&(a, b)| (vec![a as f64], b)))
            .expect("finite univariate terms")
    }

    pub fn bottom(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    pub fn constant(dim: usize, value: f64) -> Result<Self> {
        Self::new(dim, vec![Term::new(vec![0.0; dim], value)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_bottom(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_bottom()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        if self.is_bottom() {
            return Err(Error::Bottom);
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluates with the bottom polynomial mapped to `-inf`.
    pub fn eval_or_bottom(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn tropical_sum(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let terms = self.terms.iter().chain(other.terms.iter()).cloned().collect();
        Self::new(self.dim, terms)
    }

    pub fn tropical_product(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let mut terms = Vec::with_capacity(self.len() * other.len());
        for a in &self.terms {
            for b in &other.terms {
                let degree = a.degree.iter().zip(&b.degree).map(|(x, y)| x + y).collect();
                terms.push(Term::new(degree, a.coeff + b.coeff));
            }
        }
        Self::new(self.dim, terms)
    }

    /// Adds `value` to every coefficient.
    pub fn shifted(&self, value: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term::new(t.degree.clone(), t.coeff + value))
            .collect();
        Self { dim: self.dim, terms }
    }

    /// Integer degree vectors, in term order. Fails if any coordinate is further
    /// than `tol` from an integer.
    pub fn lattice_degrees(&self, tol: f64) -> Result<Vec<Degree>> {
        self.terms.iter().map(|t| to_lattice(&t.degree, tol)).collect()
    }

    pub fn is_lattice(&self, tol: f64) -> bool {
        self.lattice_degrees(tol).is_ok()
    }

    pub fn extended_points(&self) -> Vec<ExtendedPoint> {
        self.terms
            .iter()
            .map(|t| ExtendedPoint::new(t.degree.clone(), t.coeff))
            .collect()
    }

    /// Dense canonical form: every lattice point of the Newton polytope, valued
    /// at the upper-hull height.
    pub fn canonicalize(&self) -> Result<LatticePolynomial> {
        let degrees = self.lattice_degrees(DEFAULT_TOL)?;
        let mut coeffs = BTreeMap::new();
        if degrees.is_empty() {
            return LatticePolynomial::new(self.dim, coeffs);
        }
        // Rounded degrees, so that hull queries at lattice points hit exactly.
        let points: Vec<ExtendedPoint> = degrees
            .iter()
            .zip(&self.terms)
            .map(|(j, t)| ExtendedPoint::new(j.iter().map(|&v| v as f64).collect(), t.coeff))
            .collect();
        if points.len() == 1 {
            coeffs.insert(degrees[0].clone(), points[0].height);
            return LatticePolynomial::new(self.dim, coeffs);
        }
        let (lo, hi) = bounding_box(&degrees);
        for j in polytope::lattice_box(&lo, &hi) {
            let jf: Vec<f64> = j.iter().map(|&v| v as f64).collect();
            if let Some(h) = polytope::upper_hull_height(&points, &jf)? {
                coeffs.insert(j, h);
            }
        }
        // n_p(a_i) >= b_i always; snap LP round-off back onto input coefficients.
        for (j, p) in degrees.iter().zip(&points) {
            if let Some(v) = coeffs.get_mut(j) {
                *v = if (*v - p.height).abs() <= DEFAULT_TOL { p.height } else { v.max(p.height) };
            }
        }
        LatticePolynomial::new(self.dim, coeffs)
    }

    /// Coefficient-wise comparison of two polynomials with identical degree sets.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim == other.dim
            && self.terms.len() == other.terms.len()
            && self.terms.iter().zip(&other.terms).all(|(a, b)| {
                a.degree == b.degree && (a.coeff - b.coeff).abs() <= tol
            })
    }
}

/// Canonical integer-degree polynomial: a coefficient per lattice degree.
///
/// An empty map is the bottom polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePolynomial {
    dim: usize,
    coeffs: BTreeMap<Degree, f64>,
}

impl LatticePolynomial {
    pub fn new(dim: usize, coeffs: BTreeMap<Degree, f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("polynomial dimension must be positive".into()));
        }
        for (j, v) in &coeffs {
            check_dim(dim, j.len())?;
            if !v.is_finite() {
                return Err(Error::NonFinite("lattice coefficient"));
            }
        }
        Ok(Self { dim, coeffs })
    }

    pub fn from_pairs<I>(dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Degree, f64)>,
    {
        let mut coeffs = BTreeMap::new();
        for (j, v) in pairs {
            let slot = coeffs.entry(j).or_insert(f64::NEG_INFINITY);
            *slot = f64::max(*slot, v);
        }
        Self::new(dim, coeffs)
    }

    /// Univariate shorthand keyed by the single degree.
    pub fn from_univariate(pairs: &[(i64, f64)]) -> Self {
        Self::from_pairs(1, pairs.iter().map(|&(j, v)| (vec![j], v))).expect("finite coefficients")
    }

    pub fn bottom(dim: usize) -> Self {
        Self { dim, coeffs: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, j: &[i64]) -> Option<f64> {
        self.coeffs.get(j).copied()
    }

    pub fn contains_degree(&self, j: &[i64]) -> bool {
        self.coeffs.contains_key(j)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Degree, f64)> {
        self.coeffs.iter().map(|(j, &v)| (j, v))
    }

    pub fn degrees(&self) -> impl Iterator<Item = &Degree> {
        self.coeffs.keys()
    }

    pub fn coeffs(&self) -> &BTreeMap<Degree, f64> {
        &self.coeffs
    }

    pub fn min_coeff(&self) -> Option<f64> {
        self.coeffs.values().copied().reduce(f64::min)
    }

    pub fn max_coeff(&self) -> Option<f64> {
        self.coeffs.values().copied().reduce(f64::max)
    }

    pub fn shifted(&self, value: f64) -> Self {
        let coeffs = self.coeffs.iter().map(|(j, v)| (j.clone(), v + value)).collect();
        Self { dim: self.dim, coeffs }
    }

    pub fn to_polynomial(&self) -> TropicalPolynomial {
        let terms = self
            .coeffs
            .iter()
            .map(|(j, &v)| Term::new(j.iter().map(|&x| x as f64).collect(), v))
            .collect();
        TropicalPolynomial::new(self.dim, terms).expect("lattice polynomial is well formed")
    }

    pub fn eval_or_bottom(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .map(|(j, v)| j.iter().zip(x).map(|(&a, b)| a as f64 * b).sum::<f64>() + v)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn maxplus_convolution(&self, other: &Self) -> Result<Self> {
        maxplus_convolution(self, other)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim == other.dim
            && self.coeffs.len() == other.coeffs.len()
            && self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .all(|((ja, va), (jb, vb))| ja == jb && (va - vb).abs() <= tol)
    }
}

/// `(q ⊕ d)_j = max_{c + i = j} (q_c + d_i)`: the coefficient rule of the
/// tropical product. Keys are the Minkowski sum of the two key sets.
pub fn maxplus_convolution(q: &LatticePolynomial, d: &LatticePolynomial) -> Result<LatticePolynomial> {
    check_dim(q.dim, d.dim)?;
    let mut out: BTreeMap<Degree, f64> = BTreeMap::new();
    for (c, qc) in &q.coeffs {
        for (i, di) in &d.coeffs {
            let j: Degree = c.iter().zip(i).map(|(a, b)| a + b).collect();
            let v = qc + di;
            out.entry(j).and_modify(|e| *e = e.max(v)).or_insert(v);
        }
    }
    LatticePolynomial::new(q.dim, out)
}

pub fn canonicalize(p: &TropicalPolynomial) -> Result<LatticePolynomial> {
    p.canonicalize()
}

pub(crate) fn to_lattice(degree: &[f64], tol: f64) -> Result<Degree> {
    degree
        .iter()
        .map(|&v| {
            let r = v.round();
            if (v - r).abs() <= tol {
                Ok(r as i64)
            } else {
                Err(Error::NonLattice { degree: degree.to_vec() })
            }
        })
        .collect()
}

pub(crate) fn bounding_box(points: &[Degree]) -> (Degree, Degree) {
    let dim = points[0].len();
    let mut lo = points[0].clone();
    let mut hi = points[0].clone();
    for p in &points[1..] {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cmp_degree(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Wire format: `{"dim": d, "terms": [{"a": [..], "b": real}, ...]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolynomialJson {
    dim: usize,
    terms: Vec<TermJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermJson {
    a: Vec<f64>,
    b: f64,
}

impl TryFrom<PolynomialJson> for TropicalPolynomial {
    type Error = Error;

    fn try_from(value: PolynomialJson) -> Result<Self> {
        let terms = value.terms.into_iter().map(|t| Term::new(t.a, t.b)).collect();
        TropicalPolynomial::new(value.dim, terms)
    }
}

impl From<TropicalPolynomial> for PolynomialJson {
    fn from(p: TropicalPolynomial) -> Self {
        Self {
            dim: p.dim,
            terms: p.terms.into_iter().map(|t| TermJson { a: t.degree, b: t.coeff }).collect(),
        }
    }
}

impl Serialize for LatticePolynomial {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_polynomial().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LatticePolynomial {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let p = TropicalPolynomial::deserialize(deserializer)?;
        let degrees = p.lattice_degrees(DEFAULT_TOL).map_err(serde::de::Error::custom)?;
        let pairs = degrees.into_iter().zip(p.terms.iter().map(|t| t.coeff));
        LatticePolynomial::from_pairs(p.dim, pairs).map_err(serde::de::Error::custom)
    }
}
