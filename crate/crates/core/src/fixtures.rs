//! Worked examples and seeded random instance generators shared by tests
//! and the acceptance suite.

use rand::Rng;

use crate::network::TwoLayerNet;
use crate::poly::{Term, TropicalPolynomial};

/// `p = max(3x, 2x + 1.5, x + 1, 0)` and `d = max(x + 1, 0)`.
pub fn exact_cubic() -> (TropicalPolynomial, TropicalPolynomial) {
    (dividend_1d(), TropicalPolynomial::from_univariate(&[(1, 1.0), (0, 0.0)]))
}

/// Same dividend as [`exact_cubic`], divided by `d = max(x, 0)`.
pub fn inexact_cubic() -> (TropicalPolynomial, TropicalPolynomial) {
    (dividend_1d(), TropicalPolynomial::from_univariate(&[(1, 0.0), (0, 0.0)]))
}

/// `p = max(2x, x + y + 1, x + 1, y + 1, 1)` and `d = max(x, 0)`.
pub fn planar() -> (TropicalPolynomial, TropicalPolynomial) {
    let p = TropicalPolynomial::from_pairs(
        2,
        [
            (vec![2.0, 0.0], 0.0),
            (vec![1.0, 1.0], 1.0),
            (vec![1.0, 0.0], 1.0),
            (vec![0.0, 1.0], 1.0),
            (vec![0.0, 0.0], 1.0),
        ],
    )
    .expect("valid fixture");
    let d = TropicalPolynomial::from_pairs(2, [(vec![1.0, 0.0], 0.0), (vec![0.0, 0.0], 0.0)]).expect("valid fixture");
    (p, d)
}

fn dividend_1d() -> TropicalPolynomial {
    TropicalPolynomial::from_univariate(&[(3, 0.0), (2, 1.5), (1, 1.0), (0, 0.0)])
}

/// Integer degrees uniform in `0..=max_degree`, coefficients uniform in `[-5, 5]`.
pub fn random_lattice_polynomial<R: Rng>(rng: &mut R, dim: usize, max_degree: i64, terms: usize) -> TropicalPolynomial {
    let terms = (0..terms.max(1))
        .map(|_| {
            let degree = (0..dim).map(|_| rng.random_range(0..=max_degree) as f64).collect();
            Term::new(degree, rng.random_range(-5.0..=5.0))
        })
        .collect();
    TropicalPolynomial::new(dim, terms).expect("finite random terms")
}

/// A dividend with degrees up to 6 and a smaller divisor with degrees up to 3.
pub fn random_division_instance<R: Rng>(rng: &mut R, dim: usize) -> (TropicalPolynomial, TropicalPolynomial) {
    let np = rng.random_range(2..=7);
    let nd = rng.random_range(1..=3);
    let p = random_lattice_polynomial(rng, dim, 6, np);
    let d = random_lattice_polynomial(rng, dim, 3, nd);
    (p, d)
}

/// Weights and biases uniform in `[-1, 1]`.
pub fn random_net<R: Rng>(rng: &mut R, dim: usize, hidden: usize) -> TwoLayerNet {
    let mut u = |_| rng.random_range(-1.0..=1.0);
    let w1 = (0..hidden * dim).map(&mut u).collect();
    let b1 = (0..hidden).map(&mut u).collect();
    let w2 = (0..hidden).map(&mut u).collect();
    let b2 = u(0);
    TwoLayerNet::new(dim, w1, b1, w2, b2).expect("consistent shapes")
}

/// The two-unit network `relu(x) + relu(x - 1)`.
pub fn two_neuron_net() -> TwoLayerNet {
    TwoLayerNet::new(1, vec![1.0, 1.0], vec![0.0, -1.0], vec![1.0, 1.0], 0.0).expect("consistent shapes")
}
