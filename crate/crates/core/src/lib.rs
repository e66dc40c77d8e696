//! Max-plus polynomial arithmetic, Newton-polytope division and tropical
//! compression of two-layer ReLU classifiers.
//!
//! ```
//! use maxplus::{divide, TropicalPolynomial};
//!
//! let p = TropicalPolynomial::from_univariate(&[(3, 0.0), (2, 1.5), (1, 1.0), (0, 0.0)]);
//! let d = TropicalPolynomial::from_univariate(&[(1, 1.0), (0, 0.0)]);
//! let res = divide(&p, &d).unwrap();
//! assert!(res.exact);
//! assert_eq!(res.quotient.get(&[1]), Some(0.5));
//! ```

pub mod compress;
pub mod data;
pub mod division;
pub mod error;
pub mod fixtures;
pub mod ggp;
pub mod lp;
pub mod maxlinear;
pub mod network;
pub mod poly;
pub mod polytope;
pub mod train;

pub use compress::{compress, harvest_vertices, iterative_compress, mean_quotient, phase1, phase2, CompressionReport, VertexStats};
pub use data::{load_csv, load_idx, synth_gaussians, Dataset, Labeling};
pub use division::{
    divide, divide_multi, divide_with, erosion, opening_oracle, verify_inequality, DivideOptions, DivisionResult,
    MultiDivisionResult,
};
pub use error::{Error, Result};
pub use ggp::{
    eval_goal0, positivity_shift, solve_direct_approx, solve_division_ggp, DirectApproxProblem, GgpDivisionProblem,
};
pub use lp::{LpProblem, LpSolution, LpStatus};
pub use maxlinear::{maxlinear_fit, MaxLinearFit};
pub use network::{activated_vertex, check_divisibility, decompose, ActivatedVertex, Pattern, TropicalPart, TwoLayerNet};
pub use poly::{canonicalize, maxplus_convolution, Degree, LatticePolynomial, Term, TropicalPolynomial, DEFAULT_TOL};
pub use polytope::{upper_hull_height, valid_shifts, ExtendedPoint, NewtonPolytope};
pub use train::{accuracy, init_net, train, TrainConfig};
