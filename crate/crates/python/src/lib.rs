//! Python bindings: polynomials and division, two-layer networks, training
//! and compression.

use maxplus::compress::CompressionReport;
use maxplus::{Labeling, Term};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "TropicalPolynomial", module = "pymaxplus", frozen, from_py_object)]
#[derive(Clone)]
struct PyPolynomial(maxplus::TropicalPolynomial);

#[pymethods]
impl PyPolynomial {
    /// `terms` is a list of `(degree, coefficient)` pairs.
    #[new]
    fn new(dim: usize, terms: Vec<(Vec<f64>, f64)>) -> PyResult<Self> {
        let terms = terms.into_iter().map(|(a, b)| Term::new(a, b)).collect();
        maxplus::TropicalPolynomial::new(dim, terms).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("polynomials always serialize")
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn terms(&self) -> Vec<(Vec<f64>, f64)> {
        self.0.terms().iter().map(|t| (t.degree.clone(), t.coeff)).collect()
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.eval(&x).map_err(err)
    }

    fn __add__(&self, other: &Self) -> PyResult<Self> {
        self.0.tropical_sum(&other.0).map(Self).map_err(err)
    }

    fn __mul__(&self, other: &Self) -> PyResult<Self> {
        self.0.tropical_product(&other.0).map(Self).map_err(err)
    }

    /// Lattice form filled with upper-hull heights.
    fn canonicalize(&self) -> PyResult<Self> {
        self.0.canonicalize().map(|c| Self(c.to_polynomial())).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("TropicalPolynomial({})", self.to_json())
    }
}

#[pyclass(name = "DivisionResult", module = "pymaxplus", frozen, get_all)]
struct PyDivision {
    quotient: PyPolynomial,
    remainder: PyPolynomial,
    exact: bool,
}

#[pymethods]
impl PyDivision {
    fn __repr__(&self) -> String {
        format!("DivisionResult(exact={}, quotient_terms={})", self.exact, self.quotient.0.len())
    }
}

#[pyfunction]
fn divide(p: &PyPolynomial, d: &PyPolynomial) -> PyResult<PyDivision> {
    let res = maxplus::divide(&p.0, &d.0).map_err(err)?;
    Ok(PyDivision {
        quotient: PyPolynomial(res.quotient_polynomial()),
        remainder: PyPolynomial(res.remainder.clone()),
        exact: res.exact,
    })
}

/// Returns `(quotients, remainder)`.
#[pyfunction]
fn divide_multi(p: &PyPolynomial, divisors: Vec<PyPolynomial>) -> PyResult<(Vec<PyPolynomial>, PyPolynomial)> {
    let divisors: Vec<_> = divisors.into_iter().map(|d| d.0).collect();
    let res = maxplus::divide_multi(&p.0, &divisors).map_err(err)?;
    let quotients = res.quotients.iter().map(|q| PyPolynomial(q.quotient_polynomial())).collect();
    Ok((quotients, PyPolynomial(res.remainder)))
}

#[pyclass(name = "Dataset", module = "pymaxplus", frozen)]
struct PyDataset(maxplus::Dataset);

#[pymethods]
impl PyDataset {
    #[new]
    fn new(dim: usize, features: Vec<f64>, labels: Vec<u8>) -> PyResult<Self> {
        maxplus::Dataset::new(dim, features, labels).map(Self).map_err(err)
    }

    /// Two shuffled Gaussian classes.
    #[staticmethod]
    #[pyo3(signature = (n, dim, separation=2.0, seed=0))]
    fn synth(n: usize, dim: usize, separation: f64, seed: u64) -> PyResult<Self> {
        maxplus::synth_gaussians(n, dim, separation, seed).map(Self).map_err(err)
    }

    /// IDX image and label files; `digits=(a, b)` keeps two classes.
    #[staticmethod]
    #[pyo3(signature = (images, labels, digits=None))]
    fn load_idx(images: &str, labels: &str, digits: Option<(u8, u8)>) -> PyResult<Self> {
        let labeling = digits.map(|(a, b)| Labeling::Pair(a, b));
        maxplus::load_idx(images.as_ref(), labels.as_ref(), labeling).map(Self).map_err(err)
    }

    fn subsample(&self, n: usize, seed: u64) -> PyResult<Self> {
        self.0.subsample(n, seed).map(Self).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn labels(&self) -> Vec<u8> {
        self.0.labels().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// `(scale, weights, bias, neuron)` rows of one tropical part.
type PartRows = Vec<(f64, Vec<f64>, f64, usize)>;

#[pyclass(name = "TwoLayerNet", module = "pymaxplus", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNet(maxplus::TwoLayerNet);

#[pymethods]
impl PyNet {
    /// `w1` is row-major with `hidden` rows of length `dim`.
    #[new]
    fn new(dim: usize, w1: Vec<f64>, b1: Vec<f64>, w2: Vec<f64>, b2: f64) -> PyResult<Self> {
        maxplus::TwoLayerNet::new(dim, w1, b1, w2, b2).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        maxplus::TwoLayerNet::from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn hidden(&self) -> usize {
        self.0.hidden()
    }

    fn preactivation(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.preactivation(&x).map_err(err)
    }

    fn accuracy(&self, data: &PyDataset) -> PyResult<f64> {
        maxplus::accuracy(&self.0, &data.0).map_err(err)
    }

    /// Returns the positive part, the negative part and the output bias.
    fn decompose(&self) -> (PartRows, PartRows, f64) {
        let (plus, minus, b) = maxplus::decompose(&self.0);
        let rows = |part: &maxplus::TropicalPart| {
            (0..part.len())
                .map(|k| (part.scales()[k], part.weights(k).to_vec(), part.biases()[k], part.neurons()[k]))
                .collect()
        };
        (rows(&plus), rows(&minus), b)
    }

    fn __repr__(&self) -> String {
        format!("TwoLayerNet(dim={}, hidden={})", self.0.dim(), self.0.hidden())
    }
}

#[pyfunction]
#[pyo3(signature = (data, hidden, epochs=20, batch_size=32, learning_rate=0.05, seed=0))]
fn train(data: &PyDataset, hidden: usize, epochs: usize, batch_size: usize, learning_rate: f64, seed: u64) -> PyResult<PyNet> {
    let cfg = maxplus::TrainConfig { epochs, batch_size, learning_rate, seed, patience: None };
    let init = maxplus::init_net(data.0.dim(), hidden, seed).map_err(err)?;
    maxplus::train(&init, &data.0, &cfg).map(PyNet).map_err(err)
}

/// Returns the compressed network and the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (net, data, fraction, seed=0))]
fn compress(net: &PyNet, data: &PyDataset, fraction: f64, seed: u64) -> PyResult<(PyNet, String)> {
    let (small, report): (_, CompressionReport) = maxplus::compress(&net.0, &data.0, fraction, seed).map_err(err)?;
    Ok((PyNet(small), serde_json::to_string(&report).map_err(err)?))
}

#[pymodule]
fn pymaxplus(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPolynomial>()?;
    m.add_class::<PyDivision>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyNet>()?;
    m.add_function(wrap_pyfunction!(divide, m)?)?;
    m.add_function(wrap_pyfunction!(divide_multi, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(compress, m)?)?;
    Ok(())
}
