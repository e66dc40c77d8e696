//! Tropical polynomial division.
//!
//! For every valid shift `c` the quotient coefficient is the largest `q_c` with
//! `q_c + c·x + d(x) <= p(x)` everywhere. On canonical (hull-lifted) lattice
//! forms this is the erosion `q_c = min_i (n_p(c + i) - n_d(i))`, and the
//! product `q ⊕ d` is the matching dilation, so the whole division is a
//! morphological opening of `n_p` by `n_d`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::poly::{maxplus_convolution, Degree, LatticePolynomial, Term, TropicalPolynomial, DEFAULT_TOL};
use crate::polytope::{self, valid_shifts, ExtendedPoint, NewtonPolytope};

/// Half-width of the box `[-5, 5]^dim` that [`verify_inequality`] samples.
pub const SAMPLE_RADIUS: f64 = 5.0;

#[derive(Debug, Clone, Copy)]
pub struct DivideOptions {
    /// Coefficient tolerance for the exactness check.
    pub tol: f64,
    /// Compute shift coefficients on the rayon pool.
    pub parallel: bool,
}

impl Default for DivideOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, parallel: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivisionResult {
    /// Coefficients `q_c`, keyed by the valid shifts `C`.
    pub quotient: LatticePolynomial,
    /// Hull-vertex terms of `p` not covered by any shifted divisor.
    pub remainder: TropicalPolynomial,
    /// `q ⊕ d` reproduces `p` at every upper-hull vertex.
    pub exact: bool,
    /// For each shift, a degree `j` where `q_c + d_{j-c} = n_p(j)`.
    pub tight_witnesses: BTreeMap<Degree, Degree>,
}

impl DivisionResult {
    pub fn quotient_polynomial(&self) -> TropicalPolynomial {
        self.quotient.to_polynomial()
    }

    pub fn to_json(&self) -> DivisionJson {
        DivisionJson {
            quotient: self.quotient.to_polynomial(),
            remainder: self.remainder.clone(),
            exact: self.exact,
        }
    }
}

/// Serialized division result: `{"quotient": poly, "remainder": poly, "exact": bool}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisionJson {
    pub quotient: TropicalPolynomial,
    pub remainder: TropicalPolynomial,
    pub exact: bool,
}

pub fn divide(p: &TropicalPolynomial, d: &TropicalPolynomial) -> Result<DivisionResult> {
    divide_with(p, d, &DivideOptions::default())
}

pub fn divide_with(p: &TropicalPolynomial, d: &TropicalPolynomial, opts: &DivideOptions) -> Result<DivisionResult> {
    check_dim(p.dim(), d.dim())?;
    if p.is_bottom() || d.is_bottom() {
        return Err(Error::Bottom);
    }
    let np = p.canonicalize()?;
    let nd = d.canonicalize()?;
    let shifts = valid_shifts(&lattice_newton(&nd)?, &lattice_newton(&np)?)?;

    let compute = |c: &Degree| -> Result<(Degree, f64, Degree)> {
        let (q, witness) = quotient_coefficient(&np, &nd, c).ok_or_else(|| {
            Error::InvalidArgument(format!("shift {c:?} leaves the dividend's lattice support"))
        })?;
        Ok((c.clone(), q, witness))
    };
    let computed: Vec<(Degree, f64, Degree)> = if opts.parallel {
        shifts.par_iter().map(compute).collect::<Result<_>>()?
    } else {
        shifts.iter().map(compute).collect::<Result<_>>()?
    };

    let mut witnesses = BTreeMap::new();
    let mut coeffs = BTreeMap::new();
    for (c, q, j) in computed {
        coeffs.insert(c.clone(), q);
        witnesses.insert(c, j);
    }
    let quotient = LatticePolynomial::new(p.dim(), coeffs)?;

    let vertices = hull_vertex_terms(p)?;
    let covered = |j: &Degree| {
        shifts.iter().any(|c| {
            let offset: Degree = j.iter().zip(c).map(|(a, b)| a - b).collect();
            nd.contains_degree(&offset)
        })
    };
    let remainder_terms: Vec<Term> = vertices
        .iter()
        .filter(|(j, _)| !covered(j))
        .map(|(j, b)| Term::new(j.iter().map(|&v| v as f64).collect(), *b))
        .collect();
    let remainder = TropicalPolynomial::new(p.dim(), remainder_terms)?;

    let product = maxplus_convolution(&quotient, &nd)?;
    let exact = vertices.iter().all(|(j, b)| match product.get(j) {
        Some(v) => (v - b).abs() <= opts.tol,
        None => false,
    });

    Ok(DivisionResult { quotient, remainder, exact, tight_witnesses: witnesses })
}

/// Erosion value at shift `c`: `min_i (n_p(c + i) - n_d(i))` and its argmin
/// degree `c + i`. `None` if some `c + i` is outside the dividend's support.
pub fn quotient_coefficient(np: &LatticePolynomial, nd: &LatticePolynomial, c: &[i64]) -> Option<(f64, Degree)> {
    let mut best: Option<(f64, Degree)> = None;
    for (i, di) in nd.iter() {
        let j: Degree = c.iter().zip(i).map(|(a, b)| a + b).collect();
        let v = np.get(&j)? - di;
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, j));
        }
    }
    best
}

/// Upper-hull vertex terms of `p` as `(lattice degree, coefficient)`.
pub fn hull_vertex_terms(p: &TropicalPolynomial) -> Result<Vec<(Degree, f64)>> {
    let degrees = p.lattice_degrees(DEFAULT_TOL)?;
    let points: Vec<ExtendedPoint> = degrees
        .iter()
        .zip(p.terms())
        .map(|(j, t)| ExtendedPoint::new(j.iter().map(|&v| v as f64).collect(), t.coeff))
        .collect();
    let idx = polytope::upper_hull_vertices(&points, DEFAULT_TOL)?;
    Ok(idx.into_iter().map(|k| (degrees[k].clone(), points[k].height)).collect())
}

fn lattice_newton(p: &LatticePolynomial) -> Result<NewtonPolytope> {
    NewtonPolytope::new(p.dim(), p.degrees().map(|j| j.iter().map(|&v| v as f64).collect()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiDivisionResult {
    pub quotients: Vec<DivisionResult>,
    /// Terms present in every per-divisor remainder.
    pub remainder: TropicalPolynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiDivisionJson {
    pub quotients: Vec<TropicalPolynomial>,
    pub remainder: TropicalPolynomial,
}

impl MultiDivisionResult {
    pub fn to_json(&self) -> MultiDivisionJson {
        MultiDivisionJson {
            quotients: self.quotients.iter().map(|r| r.quotient.to_polynomial()).collect(),
            remainder: self.remainder.clone(),
        }
    }
}

pub fn divide_multi(p: &TropicalPolynomial, divisors: &[TropicalPolynomial]) -> Result<MultiDivisionResult> {
    if divisors.is_empty() {
        return Err(Error::InvalidArgument("at least one divisor is required".into()));
    }
    let quotients = divisors.iter().map(|d| divide(p, d)).collect::<Result<Vec<_>>>()?;
    let mut kept: Vec<Term> = quotients[0].remainder.terms().to_vec();
    for r in &quotients[1..] {
        kept.retain(|t| r.remainder.terms().iter().any(|u| u.degree == t.degree));
    }
    let remainder = TropicalPolynomial::new(p.dim(), kept)?;
    Ok(MultiDivisionResult { quotients, remainder })
}

/// Brute-force erosion of `n_p` by `n_d` over the integer box that can hold
/// any shift. Degrees whose shifted divisor leaves the support are dropped.
pub fn erosion(np: &LatticePolynomial, nd: &LatticePolynomial) -> LatticePolynomial {
    let mut out = BTreeMap::new();
    if np.is_empty() || nd.is_empty() {
        return LatticePolynomial::bottom(np.dim());
    }
    let (plo, phi) = key_box(np);
    let (dlo, dhi) = key_box(nd);
    let lo: Degree = plo.iter().zip(&dhi).map(|(a, b)| a - b).collect();
    let hi: Degree = phi.iter().zip(&dlo).map(|(a, b)| a - b).collect();
    for x in polytope::lattice_box(&lo, &hi) {
        let mut inf = f64::INFINITY;
        for (c, nc) in nd.iter() {
            let at: Degree = x.iter().zip(c).map(|(a, b)| a + b).collect();
            let v = np.get(&at).map_or(f64::NEG_INFINITY, |h| h - nc);
            inf = inf.min(v);
        }
        if inf.is_finite() {
            out.insert(x, inf);
        }
    }
    LatticePolynomial::new(np.dim(), out).expect("finite erosion values")
}

/// Morphological opening `δ(ε(n_p))` by brute force over all lattice shifts.
pub fn opening_oracle(np: &LatticePolynomial, nd: &LatticePolynomial) -> LatticePolynomial {
    let eroded = erosion(np, nd);
    if eroded.is_empty() {
        return eroded;
    }
    let (elo, ehi) = key_box(&eroded);
    let (dlo, dhi) = key_box(nd);
    let lo: Degree = elo.iter().zip(&dlo).map(|(a, b)| a + b).collect();
    let hi: Degree = ehi.iter().zip(&dhi).map(|(a, b)| a + b).collect();
    let mut out = BTreeMap::new();
    for j in polytope::lattice_box(&lo, &hi) {
        let mut sup = f64::NEG_INFINITY;
        for (c, nc) in nd.iter() {
            let from: Degree = j.iter().zip(c).map(|(a, b)| a - b).collect();
            if let Some(e) = eroded.get(&from) {
                sup = sup.max(e + nc);
            }
        }
        if sup.is_finite() {
            out.insert(j, sup);
        }
    }
    LatticePolynomial::new(np.dim(), out).expect("finite opening values")
}

fn key_box(p: &LatticePolynomial) -> (Degree, Degree) {
    let keys: Vec<Degree> = p.degrees().cloned().collect();
    crate::poly::bounding_box(&keys)
}

/// Samples `samples` points of `[-5, 5]^dim` and checks
/// `p(x) >= max(q(x) + d(x), r(x)) - 1e-9` at each.
pub fn verify_inequality(
    p: &TropicalPolynomial,
    q: &TropicalPolynomial,
    d: &TropicalPolynomial,
    r: &TropicalPolynomial,
    samples: usize,
    seed: u64,
) -> Result<bool> {
    let dim = p.dim();
    for other in [q, d, r] {
        check_dim(dim, other.dim())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; dim];
    for _ in 0..samples {
        for v in x.iter_mut() {
            *v = rng.random_range(-SAMPLE_RADIUS..=SAMPLE_RADIUS);
        }
        if !inequality_holds_at(p, q, d, r, &x)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub(crate) fn inequality_holds_at(
    p: &TropicalPolynomial,
    q: &TropicalPolynomial,
    d: &TropicalPolynomial,
    r: &TropicalPolynomial,
    x: &[f64],
) -> Result<bool> {
    let lhs = p.eval_or_bottom(x)?;
    let rhs = (q.eval_or_bottom(x)? + d.eval_or_bottom(x)?).max(r.eval_or_bottom(x)?);
    Ok(lhs >= rhs - DEFAULT_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn exact_cubic_division_is_exact() {
        let (p, d) = fixtures::exact_cubic();
        let res = divide(&p, &d).unwrap();
        assert_eq!(res.quotient, LatticePolynomial::from_univariate(&[(0, 0.0), (1, 0.5), (2, -1.0)]));
        assert!(res.exact);
        assert!(res.remainder.is_bottom());
        assert_eq!(res.tight_witnesses.len(), 3);
    }

    #[test]
    fn inexact_cubic_division_is_approximate() {
        let (p, d) = fixtures::inexact_cubic();
        let res = divide(&p, &d).unwrap();
        assert_eq!(res.quotient, LatticePolynomial::from_univariate(&[(0, 0.0), (1, 1.0), (2, 0.0)]));
        assert!(!res.exact);
        assert!(res.remainder.is_bottom());
    }

    #[test]
    fn planar_division() {
        let (p, d) = fixtures::planar();
        let res = divide(&p, &d).unwrap();
        let expected = LatticePolynomial::from_pairs(2, [(vec![0, 0], 1.0), (vec![0, 1], 1.0), (vec![1, 0], 0.0)]).unwrap();
        assert_eq!(res.quotient, expected);
        assert!(res.exact);
        assert!(res.remainder.is_bottom());
    }

    #[test]
    fn self_division() {
        let (p, _) = fixtures::exact_cubic();
        let res = divide(&p, &p).unwrap();
        assert_eq!(res.quotient, LatticePolynomial::from_univariate(&[(0, 0.0)]));
        assert!(res.exact);
    }

    #[test]
    fn oversized_divisor_gives_full_remainder() {
        let p = TropicalPolynomial::from_univariate(&[(2, 0.0), (1, 1.0), (0, 0.0)]);
        let d = TropicalPolynomial::from_univariate(&[(3, 0.0), (0, 0.0)]);
        let res = divide(&p, &d).unwrap();
        assert!(res.quotient.is_empty());
        assert_eq!(res.remainder, p);
        assert!(!res.exact);
    }

    #[test]
    fn remainder_takes_uncovered_vertices() {
        // d spans [0, 2]; the dividend's vertex at degree 1 of a 2-D polytope
        // can be uncovered when the shifts do not reach it.
        let p = TropicalPolynomial::from_pairs(2, [(vec![0.0, 0.0], 0.0), (vec![2.0, 0.0], 0.0), (vec![0.0, 1.0], 3.0)]).unwrap();
        let d = TropicalPolynomial::from_pairs(2, [(vec![0.0, 0.0], 0.0), (vec![2.0, 0.0], 0.0)]).unwrap();
        let res = divide(&p, &d).unwrap();
        assert_eq!(res.quotient.len(), 1);
        assert_eq!(res.remainder.terms(), &[Term::new(vec![0.0, 1.0], 3.0)]);
        assert!(verify_inequality(&p, &res.quotient_polynomial(), &d, &res.remainder, 500, 1).unwrap());
    }

    #[test]
    fn opening_examples() {
        let (p, d) = fixtures::exact_cubic();
        let np = p.canonicalize().unwrap();
        assert_eq!(opening_oracle(&np, &d.canonicalize().unwrap()), np);
        let (_, d2) = fixtures::inexact_cubic();
        assert_eq!(
            opening_oracle(&np, &d2.canonicalize().unwrap()),
            LatticePolynomial::from_univariate(&[(0, 0.0), (1, 1.0), (2, 1.0), (3, 0.0)])
        );
        let unit = LatticePolynomial::from_univariate(&[(0, 0.0)]);
        assert_eq!(opening_oracle(&np, &unit), np);
    }

    #[test]
    fn inequality_checks() {
        let (p, d) = fixtures::exact_cubic();
        let res = divide(&p, &d).unwrap();
        let q = res.quotient_polynomial();
        assert!(verify_inequality(&p, &q, &d, &res.remainder, 1000, 0).unwrap());

        let mut bumped = res.quotient.coeffs().clone();
        *bumped.get_mut(&vec![1]).unwrap() += 1e-3;
        let q_up = LatticePolynomial::new(1, bumped).unwrap().to_polynomial();
        assert!(!verify_inequality(&p, &q_up, &d, &res.remainder, 1000, 0).unwrap());

        let bottom = TropicalPolynomial::bottom(1);
        assert!(verify_inequality(&p, &bottom, &d, &p, 1000, 0).unwrap());
    }

    #[test]
    fn multi_divisor() {
        let (p, d1) = fixtures::exact_cubic();
        let (_, d2) = fixtures::inexact_cubic();
        let single = divide_multi(&p, std::slice::from_ref(&d1)).unwrap();
        assert_eq!(single.quotients[0], divide(&p, &d1).unwrap());
        let both = divide_multi(&p, &[d1.clone(), d2.clone()]).unwrap();
        assert!(both.remainder.is_bottom());
        let swapped = divide_multi(&p, &[d2, d1]).unwrap();
        assert_eq!(both.remainder, swapped.remainder);
        assert!(divide_multi(&p, &[]).is_err());
    }

    #[test]
    fn parallel_and_serial_agree() {
        let (p, d) = fixtures::planar();
        let a = divide_with(&p, &d, &DivideOptions { parallel: true, ..Default::default() }).unwrap();
        let b = divide_with(&p, &d, &DivideOptions { parallel: false, ..Default::default() }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_shape() {
        let (p, d) = fixtures::exact_cubic();
        let json = serde_json::to_value(divide(&p, &d).unwrap().to_json()).unwrap();
        assert_eq!(json["exact"], serde_json::Value::Bool(true));
        assert_eq!(json["quotient"]["terms"][0]["a"][0], 2.0);
        assert_eq!(json["quotient"]["terms"][0]["b"], -1.0);
        assert_eq!(json["remainder"]["terms"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn non_lattice_inputs_are_rejected() {
        let p = TropicalPolynomial::from_pairs(1, [(vec![1.5], 0.0), (vec![0.0], 0.0)]).unwrap();
        let (_, d) = fixtures::exact_cubic();
        assert!(matches!(divide(&p, &d), Err(Error::NonLattice { .. })));
    }
}
