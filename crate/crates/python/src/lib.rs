//! Python bindings for `ptrans`. Grids come back as lists of rows (`y`
//! outer, `x` inner) with `nan` on the boundary ring.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ptrans::harness::{run_error_comparison, run_table1, ExperimentConfig};
use ptrans::{density, Complex64, ComplexMeasure, EstimateParams, GridField, Lattice, MomentSequence, NoiseSpec};

fn err(e: ptrans::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

type Rows = Vec<Vec<f64>>;

fn rows(field: &GridField) -> Rows {
    let lat = &field.lattice;
    (0..lat.ny)
        .map(|j| {
            (0..lat.nx)
                .map(|i| if field.is_valid(i, j) { field.get(i, j) } else { f64::NAN })
                .collect()
        })
        .collect()
}

fn sequence(moments: Vec<Complex64>, sigma: f64) -> PyResult<MomentSequence> {
    MomentSequence::new(moments, sigma).map_err(err)
}

#[pyclass(name = "Measure", module = "ptrans_py", frozen)]
struct PyMeasure {
    inner: ComplexMeasure,
}

#[pymethods]
impl PyMeasure {
    #[new]
    fn new(nodes: Vec<Complex64>, weights: Vec<Complex64>) -> PyResult<Self> {
        Ok(Self {
            inner: ComplexMeasure::new(nodes, weights).map_err(err)?,
        })
    }

    /// The five node model used in the simulations.
    #[staticmethod]
    fn reference_model() -> Self {
        Self {
            inner: ComplexMeasure::reference_model(),
        }
    }

    #[getter]
    fn nodes(&self) -> Vec<Complex64> {
        self.inner.nodes().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<Complex64> {
        self.inner.weights().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn min_node_distance(&self) -> f64 {
        self.inner.min_node_distance()
    }

    fn snr(&self, sigma: f64) -> PyResult<f64> {
        self.inner.snr(sigma).map_err(err)
    }

    /// Clean moments `s_0 .. s_{n-1}`.
    fn moments(&self, n: usize) -> PyResult<Vec<Complex64>> {
        Ok(self.inner.moments(n).map_err(err)?.into_values())
    }

    #[pyo3(signature = (n, sigma, seed, stream = 0))]
    fn noisy_moments(&self, n: usize, sigma: f64, seed: u64, stream: u64) -> PyResult<Vec<Complex64>> {
        let noise = NoiseSpec::new(sigma, seed, stream).map_err(err)?;
        let data = self.inner.moments(n).and_then(|m| m.with_noise(&noise)).map_err(err)?;
        Ok(data.into_values())
    }

    fn __repr__(&self) -> String {
        format!("Measure(p={})", self.inner.len())
    }
}

#[pyclass(name = "Lattice", module = "ptrans_py", frozen)]
struct PyLattice {
    inner: Lattice,
}

#[pymethods]
impl PyLattice {
    #[new]
    fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Lattice::new(x_min, x_max, y_min, y_max, nx, ny).map_err(err)?,
        })
    }

    /// `n × n` points on `[-half, half]²`.
    #[staticmethod]
    fn square(half: f64, n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Lattice::square(half, n).map_err(err)?,
        })
    }

    /// `(ny, nx)`, matching the row layout of returned grids.
    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.ny, self.inner.nx)
    }

    #[getter]
    fn spacing(&self) -> (f64, f64) {
        (self.inner.hx(), self.inner.hy())
    }

    fn xs(&self) -> Vec<f64> {
        (0..self.inner.nx).map(|i| self.inner.x(i)).collect()
    }

    fn ys(&self) -> Vec<f64> {
        (0..self.inner.ny).map(|j| self.inner.y(j)).collect()
    }

    fn __repr__(&self) -> String {
        let l = &self.inner;
        format!("Lattice([{}, {}] x [{}, {}], {} x {})", l.x_min, l.x_max, l.y_min, l.y_max, l.nx, l.ny)
    }
}

/// Adds complex Gaussian noise with `E|ν|² = sigma²`.
#[pyfunction]
#[pyo3(signature = (moments, sigma, seed, stream = 0))]
fn add_noise(moments: Vec<Complex64>, sigma: f64, seed: u64, stream: u64) -> PyResult<Vec<Complex64>> {
    let noise = NoiseSpec::new(sigma, seed, stream).map_err(err)?;
    Ok(sequence(moments, 0.0)?.with_noise(&noise).map_err(err)?.into_values())
}

/// Padé poles and residues of an even number of moments, strongest
/// residue first. Returns `(poles, residues, condition)`.
#[pyfunction]
fn interpolate(moments: Vec<Complex64>) -> PyResult<(Vec<Complex64>, Vec<Complex64>, f64)> {
    let sol = ptrans::interpolate(&sequence(moments, 0.0)?).map_err(err)?;
    Ok((sol.poles, sol.residues, sol.condition))
}

#[pyclass(name = "PTransform", module = "ptrans_py", frozen)]
struct PyPTransform {
    inner: ptrans::PTransform,
}

#[pymethods]
impl PyPTransform {
    fn grid(&self) -> Rows {
        rows(&self.inner.grid)
    }

    fn modulus(&self) -> Rows {
        rows(&self.inner.modulus)
    }

    fn mass(&self) -> f64 {
        self.inner.mass()
    }

    /// `(r, pole, residue)` for every pseudosample solution.
    fn poles(&self) -> Vec<(usize, Complex64, Complex64)> {
        self.inner.pool.iter_poles().collect()
    }

    /// Pseudosamples that had to be redrawn.
    #[getter]
    fn redrawn(&self) -> usize {
        self.inner.pool.failed
    }

    #[getter]
    fn lattice(&self) -> PyLattice {
        PyLattice {
            inner: *self.inner.lattice(),
        }
    }
}

/// P-transform of noisy moments. `sigma_prime` defaults to `0.01 * sigma`.
#[pyfunction]
#[pyo3(signature = (moments, sigma, lattice, count = 100, sigma_prime = None, seed = 0))]
fn ptransform(
    py: Python<'_>,
    moments: Vec<Complex64>,
    sigma: f64,
    lattice: &PyLattice,
    count: usize,
    sigma_prime: Option<f64>,
    seed: u64,
) -> PyResult<PyPTransform> {
    let data = sequence(moments, sigma)?;
    let noise = NoiseSpec::new(sigma_prime.unwrap_or(0.01 * sigma), seed, 0).map_err(err)?;
    let lat = lattice.inner;
    let inner = py.detach(|| ptrans::ptransform(&data, &lat, count, &noise)).map_err(err)?;
    Ok(PyPTransform { inner })
}

#[pyclass(name = "Estimate", module = "ptrans_py", frozen, get_all)]
struct PyEstimate {
    p_hat: usize,
    nodes: Vec<Complex64>,
    weights: Vec<Complex64>,
    /// Share of pseudosamples represented in each cluster.
    fractions: Vec<f64>,
    candidates: usize,
    residual_amplitude: Option<f64>,
}

/// Cluster the P-transform maxima. `radius` defaults to five lattice
/// spacings.
#[pyfunction]
#[pyo3(signature = (transform, tau = EstimateParams::DEFAULT_TAU, radius = None, min_height = EstimateParams::DEFAULT_MIN_HEIGHT, reference_order = None))]
fn estimate(
    transform: &PyPTransform,
    tau: f64,
    radius: Option<f64>,
    min_height: f64,
    reference_order: Option<usize>,
) -> PyEstimate {
    let mut params = EstimateParams::for_lattice(transform.inner.lattice());
    params.tau = tau;
    params.min_height_fraction = min_height;
    if let Some(r) = radius {
        params.radius = r;
    }
    let mut est = ptrans::estimate_params(&transform.inner, &params);
    if let Some(p) = reference_order {
        est = est.with_reference_order(p);
    }
    PyEstimate {
        fractions: est.clusters.iter().map(|c| c.cardinality_fraction).collect(),
        p_hat: est.p_hat,
        nodes: est.nodes_hat,
        weights: est.weights_hat,
        candidates: est.candidates,
        residual_amplitude: est.residual_amplitude,
    }
}

/// Analytic approximation of the condensed density of the noisy poles.
#[pyfunction]
fn analytic_density(py: Python<'_>, clean: Vec<Complex64>, sigma: f64, lattice: &PyLattice) -> PyResult<Rows> {
    let lat = lattice.inner;
    let field = py.detach(|| density::analytic_density_from_moments(&clean, sigma, &lat)).map_err(err)?;
    Ok(rows(&field))
}

/// Monte Carlo condensed density. Returns `(density, standard_error)`.
#[pyfunction]
#[pyo3(signature = (clean, sigma, lattice, trials = 1000, seed = 0))]
fn mc_density(
    py: Python<'_>,
    clean: Vec<Complex64>,
    sigma: f64,
    lattice: &PyLattice,
    trials: usize,
    seed: u64,
) -> PyResult<(Rows, Rows)> {
    let noise = NoiseSpec::new(sigma, seed, 0).map_err(err)?;
    let lat = lattice.inner;
    let mc = py
        .detach(|| density::mc_condensed_density_from_moments(&clean, sigma, &lat, trials, &noise))
        .map_err(err)?;
    Ok((rows(&mc.density), rows(&mc.std_error)))
}

#[pyfunction]
fn h2_closed_form(s0: Complex64, s1: Complex64, sigma: f64, z: Complex64) -> f64 {
    density::h2_closed_form(s0, s1, sigma, z)
}

#[pyfunction]
fn pure_noise_density(n: usize, z: Complex64) -> f64 {
    density::pure_noise_density(n, z)
}

/// Repeated estimation on the reference model at reduced size.
#[pyfunction]
#[pyo3(signature = (seed = 0, replications = 50, pseudosamples = 100))]
fn table1<'py>(py: Python<'py>, seed: u64, replications: usize, pseudosamples: usize) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = ExperimentConfig::table1(seed);
    cfg.replications = replications;
    cfg.pseudosamples = pseudosamples;
    let stats = py.detach(|| run_table1(&cfg)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("accepted", stats.accepted)?;
    out.set_item("acceptance_rate", stats.acceptance_rate)?;
    out.set_item("a_res", stats.a_res)?;
    out.set_item("p_hat_bias", stats.order.bias.re)?;
    out.set_item("p_hat_sd", stats.order.sd)?;
    out.set_item("node_bias", stats.nodes.iter().map(|s| s.bias).collect::<Vec<_>>())?;
    out.set_item("node_sd", stats.nodes.iter().map(|s| s.sd).collect::<Vec<_>>())?;
    out.set_item("node_mse", stats.nodes.iter().map(|s| s.mse).collect::<Vec<_>>())?;
    Ok(out)
}

/// Single-solve against pseudosample-averaged squared errors, one
/// `(e0, eR)` pair per data set.
#[pyfunction]
#[pyo3(signature = (seed = 0, replications = 30, pseudosamples = 100))]
fn error_comparison(py: Python<'_>, seed: u64, replications: usize, pseudosamples: usize) -> PyResult<Vec<(f64, f64)>> {
    let mut cfg = ExperimentConfig::fig2(seed);
    cfg.replications = replications;
    cfg.pseudosamples = pseudosamples;
    let cmp = py.detach(|| run_error_comparison(&cfg)).map_err(err)?;
    Ok(cmp.pairs.iter().map(|p| (p.e0, p.e_r)).collect())
}

#[pymodule]
fn ptrans_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyLattice>()?;
    m.add_class::<PyPTransform>()?;
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(interpolate, m)?)?;
    m.add_function(wrap_pyfunction!(ptransform, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_density, m)?)?;
    m.add_function(wrap_pyfunction!(mc_density, m)?)?;
    m.add_function(wrap_pyfunction!(h2_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(pure_noise_density, m)?)?;
    m.add_function(wrap_pyfunction!(table1, m)?)?;
    m.add_function(wrap_pyfunction!(error_comparison, m)?)?;
    Ok(())
}
