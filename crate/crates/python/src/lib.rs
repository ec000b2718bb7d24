//! Python bindings: stream creation and persistence, the four generators,
//! the Monte Carlo Fisher test and Matérn random-field simulation.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use streamforge::dist::{fill_exponential, fill_normal, fill_uniform, fill_uniform_int};
use streamforge::fisher::{fisher_sim as run_fisher, logfact_sum as run_logfact_sum, ContingencyTable};
use streamforge::grf::{self, GridSpec, Matern, MaternParams};
use streamforge::rng::{load_streams, save_streams};
use streamforge::{Error, Executor, MatrixBuffer, Shape, WorkGrid};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::NotPositiveDefinite { .. } => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for streamforge::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// An ordered set of streams; generators advance it in place.
#[pyclass(name = "Streams", module = "streamforge", from_py_object)]
#[derive(Clone)]
struct PyStreams {
    inner: streamforge::StreamSet,
}

#[pymethods]
impl PyStreams {
    /// `n` streams from a fresh creator seeded with `seed` (default 12345 x 6).
    #[new]
    #[pyo3(signature = (n, seed=None))]
    fn new(n: usize, seed: Option<[u32; 6]>) -> PyResult<Self> {
        let mut creator =
            streamforge::Creator::with_seed(seed.unwrap_or(streamforge::rng::DEFAULT_SEED)).py()?;
        Ok(PyStreams { inner: creator.create_streams(n).py()? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyStreams { inner: load_streams(path).py()? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_streams(&self.inner, path).py()
    }

    /// `(current, initial)` state arrays of every stream.
    fn states(&self) -> Vec<([u32; 6], [u32; 6])> {
        self.inner.iter().map(|s| (s.current().to_array(), s.initial().to_array())).collect()
    }

    fn copy(&self) -> Self {
        self.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.count()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Streams(count={})", self.inner.count())
    }
}

/// Hands out consecutive streams, each 2^134 steps after the previous one.
#[pyclass(name = "Creator", module = "streamforge")]
struct PyCreator {
    inner: streamforge::Creator,
}

#[pymethods]
impl PyCreator {
    #[new]
    #[pyo3(signature = (seed=None))]
    fn new(seed: Option<[u32; 6]>) -> PyResult<Self> {
        Ok(PyCreator {
            inner: streamforge::Creator::with_seed(seed.unwrap_or(streamforge::rng::DEFAULT_SEED)).py()?,
        })
    }

    fn set_base_creator(&mut self, seed: [u32; 6]) -> PyResult<()> {
        self.inner.set_base_creator(seed).py()
    }

    fn create_streams(&mut self, n: usize) -> PyResult<PyStreams> {
        Ok(PyStreams { inner: self.inner.create_streams(n).py()? })
    }

    #[getter]
    fn next_seed(&self) -> [u32; 6] {
        self.inner.next_seed().to_array()
    }
}

fn shape_of(n: &Bound<'_, PyAny>) -> PyResult<Shape> {
    if let Ok(len) = n.extract::<usize>() {
        return Ok(Shape::Vector(len));
    }
    let (r, c): (usize, usize) =
        n.extract().map_err(|_| PyValueError::new_err("n must be an int or a (nrow, ncol) pair"))?;
    Ok(Shape::matrix(r, c))
}

fn to_python<'py, T>(py: Python<'py>, shape: Shape, m: &MatrixBuffer<T>) -> PyResult<Bound<'py, PyAny>>
where
    T: Copy + Default + for<'a> IntoPyObject<'a>,
{
    match shape {
        Shape::Vector(_) => m.to_vec().into_pyobject(py).map(|o| o.into_any()),
        Shape::Matrix { .. } => {
            let rows: Vec<Vec<T>> = m.rows().map(|r| r.to_vec()).collect();
            rows.into_pyobject(py).map(|o| o.into_any())
        }
    }
}

fn setup(grid: (usize, usize), threads: usize) -> PyResult<(WorkGrid, Executor)> {
    Ok((WorkGrid::new(grid.0, grid.1).py()?, Executor::new(threads).py()?))
}

/// Uniform doubles in (0, 1). `n` is a length or a `(nrow, ncol)` pair.
#[pyfunction]
#[pyo3(signature = (n, streams, grid=(64, 8), threads=1))]
fn runif<'py>(
    py: Python<'py>,
    n: &Bound<'py, PyAny>,
    streams: &mut PyStreams,
    grid: (usize, usize),
    threads: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let shape = shape_of(n)?;
    let (grid, exec) = setup(grid, threads)?;
    let m = fill_uniform(&exec, &mut streams.inner, &grid, shape, None).py()?;
    to_python(py, shape, &m)
}

/// Raw generator integers in [1, 2^31 - 1].
#[pyfunction]
#[pyo3(signature = (n, streams, grid=(64, 8), threads=1))]
fn rint<'py>(
    py: Python<'py>,
    n: &Bound<'py, PyAny>,
    streams: &mut PyStreams,
    grid: (usize, usize),
    threads: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let shape = shape_of(n)?;
    let (grid, exec) = setup(grid, threads)?;
    let m = fill_uniform_int(&exec, &mut streams.inner, &grid, shape, None).py()?;
    to_python(py, shape, &m)
}

/// Standard normals by Box-Muller on paired streams; `grid[1]` must be even.
#[pyfunction]
#[pyo3(signature = (n, streams, grid=(64, 8), threads=1))]
fn rnorm<'py>(
    py: Python<'py>,
    n: &Bound<'py, PyAny>,
    streams: &mut PyStreams,
    grid: (usize, usize),
    threads: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let shape = shape_of(n)?;
    let (grid, exec) = setup(grid, threads)?;
    let m = fill_normal(&exec, &mut streams.inner, &grid, shape, None).py()?;
    to_python(py, shape, &m)
}

#[pyfunction]
#[pyo3(signature = (n, streams, rate=1.0, grid=(64, 8), threads=1))]
fn rexp<'py>(
    py: Python<'py>,
    n: &Bound<'py, PyAny>,
    streams: &mut PyStreams,
    rate: f64,
    grid: (usize, usize),
    threads: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let shape = shape_of(n)?;
    let (grid, exec) = setup(grid, threads)?;
    let m = fill_exponential(&exec, &mut streams.inner, &grid, shape, None, rate).py()?;
    to_python(py, shape, &m)
}

/// Minus the sum of log factorials of the table entries.
#[pyfunction]
fn logfact_sum(table: Vec<Vec<u32>>) -> PyResult<f64> {
    Ok(run_logfact_sum(&ContingencyTable::new(table).py()?))
}

/// Monte Carlo Fisher exact test. Returns a dict with `threshold`,
/// `sim_num`, `counts`, `p_value` and optionally `statistics`.
#[pyfunction]
#[pyo3(signature = (table, n, streams, grid=(64, 16), return_statistics=false, threads=1))]
fn fisher_sim<'py>(
    py: Python<'py>,
    table: Vec<Vec<u32>>,
    n: u64,
    streams: &mut PyStreams,
    grid: (usize, usize),
    return_statistics: bool,
    threads: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let table = ContingencyTable::new(table).py()?;
    let (grid, exec) = setup(grid, threads)?;
    let set = &mut streams.inner;
    let res = py.detach(|| run_fisher(&exec, &table, n, set, &grid, return_statistics)).py()?;
    let d = PyDict::new(py);
    d.set_item("threshold", res.threshold)?;
    d.set_item("sim_num", res.sim_num)?;
    d.set_item("counts", res.counts)?;
    d.set_item("p_value", res.p_value)?;
    if let Some(stats) = res.statistics {
        d.set_item("statistics", stats)?;
    }
    Ok(d)
}

type ParamRow = (f64, f64, f64, f64, f64);

fn matern_params(rows: &[ParamRow]) -> PyResult<Vec<MaternParams>> {
    rows.iter().map(|&(k, r, v, w, t)| MaternParams::new(k, r, v, w, t).py()).collect()
}

/// Matérn covariance at lag `(dx, dy)` for one parameter row
/// `(shape, range, variance, aniso_ratio, aniso_angle)`.
#[pyfunction]
fn matern_cov(params: ParamRow, dx: f64, dy: f64) -> PyResult<f64> {
    let m = Matern::new(matern_params(&[params])?[0]).py()?;
    Ok(m.cov(dx, dy))
}

/// Modified Bessel function of the second kind.
#[pyfunction]
fn bessel_k(nu: f64, x: f64) -> PyResult<f64> {
    grf::bessel_k(nu, x).py()
}

/// Simulates `realizations` fields for every parameter row on an
/// `ny x nx` grid. Returns a list of dicts, batch-major.
#[pyfunction]
#[pyo3(signature = (params, nx, ny, cell_size, realizations, streams, grid=(128, 64), origin=(0.0, 0.0), threads=1))]
#[allow(clippy::too_many_arguments)]
fn simulate_grf<'py>(
    py: Python<'py>,
    params: Vec<ParamRow>,
    nx: usize,
    ny: usize,
    cell_size: f64,
    realizations: usize,
    streams: &mut PyStreams,
    grid: (usize, usize),
    origin: (f64, f64),
    threads: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let params = matern_params(&params)?;
    let spec = GridSpec::new(nx, ny, cell_size, origin).py()?;
    let (grid, exec) = setup(grid, threads)?;
    let set = &mut streams.inner;
    let sim = py.detach(|| grf::simulate_grf(&exec, &params, &spec, realizations, set, &grid)).py()?;
    sim.fields
        .into_iter()
        .map(|f| {
            let d = PyDict::new(py);
            d.set_item("batch", f.batch)?;
            d.set_item("realization", f.realization)?;
            let rows: Vec<Vec<f64>> = f.values.chunks(f.ncol).map(<[f64]>::to_vec).collect();
            d.set_item("values", rows)?;
            Ok(d)
        })
        .collect()
}

#[pymodule(name = "streamforge")]
fn streamforge_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStreams>()?;
    m.add_class::<PyCreator>()?;
    m.add_function(wrap_pyfunction!(runif, m)?)?;
    m.add_function(wrap_pyfunction!(rint, m)?)?;
    m.add_function(wrap_pyfunction!(rnorm, m)?)?;
    m.add_function(wrap_pyfunction!(rexp, m)?)?;
    m.add_function(wrap_pyfunction!(logfact_sum, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_sim, m)?)?;
    m.add_function(wrap_pyfunction!(matern_cov, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_k, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_grf, m)?)?;
    Ok(())
}
