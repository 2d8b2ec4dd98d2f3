//! Python bindings for `fracdelaunay`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fracdelaunay::classical::{self, Fowler};
use fracdelaunay::delaunay::{self, SolveOptions};
use fracdelaunay::{kernel, spectrum, Error, KernelSpec};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Parameter(_) | Error::Domain(_) | Error::Singularity(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Constants of the problem at one `(n, s)`.
#[pyclass(frozen, module = "fracdelaunay_py")]
struct Params {
    inner: fracdelaunay::Params,
}

#[pymethods]
impl Params {
    #[new]
    fn new(n: u32, s: f64) -> PyResult<Self> {
        fracdelaunay::make_params(n, s)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.n
    }

    #[getter]
    fn s(&self) -> f64 {
        self.inner.s
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }

    #[getter]
    fn c_hat(&self) -> f64 {
        self.inner.c_hat
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }

    /// `ĉ cosh(t)^{(2s-n)/2}`.
    fn bubble(&self, t: f64) -> f64 {
        self.inner.bubble(t)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("Params(n={}, s={}, c={}, c_hat={})", p.n, p.s, p.c, p.c_hat)
    }
}

#[pyclass(frozen, module = "fracdelaunay_py")]
struct Kernel {
    inner: fracdelaunay::Kernel,
}

#[pymethods]
impl Kernel {
    #[new]
    fn new(n: u32, s: f64) -> PyResult<Self> {
        let params = fracdelaunay::make_params(n, s).map_err(to_py)?;
        let spec = KernelSpec::new(params).map_err(to_py)?;
        fracdelaunay::Kernel::new(spec)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    fn value(&self, xi: f64) -> PyResult<f64> {
        self.inner.value(xi).map_err(to_py)
    }

    fn periodized(&self, xi: f64, period: f64) -> PyResult<f64> {
        self.inner.periodized(xi, period).map(|p| p.value).map_err(to_py)
    }

    fn near_origin_constant(&self) -> f64 {
        self.inner.near_origin_constant()
    }

    /// The normalization integral; equals `c` when the kernel is consistent.
    fn check_a(&self) -> PyResult<f64> {
        kernel::check_a(self.inner.spec()).map_err(to_py)
    }
}

#[pyclass(frozen, module = "fracdelaunay_py")]
struct Solution {
    #[pyo3(get)]
    period: f64,
    #[pyo3(get)]
    m: usize,
    #[pyo3(get)]
    epsilon: f64,
    #[pyo3(get)]
    vmax: f64,
    #[pyo3(get)]
    energy: f64,
    #[pyo3(get)]
    residual_norm: f64,
    #[pyo3(get)]
    branch: String,
    #[pyo3(get)]
    l_star: f64,
    #[pyo3(get)]
    t: Vec<f64>,
    #[pyo3(get)]
    v: Vec<f64>,
}

#[pymethods]
impl Solution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(L={}, branch={}, epsilon={}, vmax={}, residual={:e})",
            self.period, self.branch, self.epsilon, self.vmax, self.residual_norm
        )
    }
}

impl From<delaunay::Solution> for Solution {
    fn from(s: delaunay::Solution) -> Self {
        let r = s.report;
        Self {
            period: r.period,
            m: r.m,
            epsilon: r.epsilon,
            vmax: r.vmax,
            energy: r.energy,
            residual_norm: r.residual_norm,
            branch: match r.branch {
                delaunay::Branch::Constant => "constant".into(),
                delaunay::Branch::Delaunay => "delaunay".into(),
            },
            l_star: r.l_star,
            t: s.field.grid.nodes(),
            v: s.field.samples,
        }
    }
}

#[pyclass(frozen, module = "fracdelaunay_py")]
struct Solver {
    inner: delaunay::Solver,
}

#[pymethods]
impl Solver {
    #[new]
    #[pyo3(signature = (n, s, grid=None))]
    fn new(n: u32, s: f64, grid: Option<usize>) -> PyResult<Self> {
        let params = fracdelaunay::make_params(n, s).map_err(to_py)?;
        let options = SolveOptions {
            m: grid,
            ..SolveOptions::default()
        };
        delaunay::Solver::new(params, options)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn l_star(&self) -> f64 {
        self.inner.l_star()
    }

    fn solve(&self, py: Python<'_>, period: f64) -> PyResult<Solution> {
        py.detach(|| self.inner.solve(period, None))
            .map(Solution::from)
            .map_err(to_py)
    }

    /// Solutions along increasing periods, each warm-started from the last.
    fn branch(&self, py: Python<'_>, periods: Vec<f64>) -> PyResult<Vec<Solution>> {
        let sols = py
            .detach(|| self.inner.continue_branch(&periods))
            .map_err(to_py)?;
        Ok(sols.into_iter().map(Solution::from).collect())
    }
}

#[pyfunction]
fn bifurcation_threshold(n: u32, s: f64) -> PyResult<f64> {
    let p = fracdelaunay::make_params(n, s).map_err(to_py)?;
    delaunay::bifurcation_threshold(&p).map_err(to_py)
}

/// Morse index report of the bubble on the box `[-l_box/2, l_box/2]`.
#[pyfunction]
#[pyo3(signature = (n, s, l_box=40.0, m=2048))]
fn bubble_morse_index<'py>(
    py: Python<'py>,
    n: u32,
    s: f64,
    l_box: f64,
    m: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let p = fracdelaunay::make_params(n, s).map_err(to_py)?;
    let r = py
        .detach(|| spectrum::bubble_morse_index(&p, l_box, m))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("morse_index", r.summary.morse_index)?;
    d.set_item("kernel_dim", r.summary.kernel_dim)?;
    d.set_item("kernel_correlation", r.kernel_correlation)?;
    d.set_item("tol", r.summary.tol)?;
    d.set_item("warnings", r.warnings)?;
    Ok(d)
}

/// First Dirichlet eigenvalue of `P_s` on `[-L, L]`.
#[pyfunction]
#[pyo3(signature = (n, s, half_width, m=256))]
fn dirichlet_lambda1(py: Python<'_>, n: u32, s: f64, half_width: f64, m: usize) -> PyResult<(f64, bool)> {
    let spec = KernelSpec::new(fracdelaunay::make_params(n, s).map_err(to_py)?).map_err(to_py)?;
    let e = py
        .detach(|| spectrum::dirichlet_lambda1(half_width, &spec, m))
        .map_err(to_py)?;
    Ok((e.lambda1, e.is_positive()))
}

/// Period of the classical orbit with neck `v_min`.
#[pyfunction]
fn classical_period(n: u32, v_min: f64) -> PyResult<f64> {
    let f = Fowler::new(n).map_err(to_py)?;
    classical::classical_period(v_min, &f).map_err(to_py)
}

/// `(s, sup_distance)` pairs against the classical profile with the same neck.
#[pyfunction]
#[pyo3(signature = (n, s_list, window=5.0, epsilon=0.8))]
fn limit_comparison(
    py: Python<'_>,
    n: u32,
    s_list: Vec<f64>,
    window: f64,
    epsilon: f64,
) -> PyResult<Vec<(f64, f64)>> {
    let rows = py
        .detach(|| classical::limit_comparison(n, &s_list, window, epsilon))
        .map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.s, r.sup_distance)).collect())
}

#[pymodule]
fn fracdelaunay_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Params>()?;
    m.add_class::<Kernel>()?;
    m.add_class::<Solver>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(bifurcation_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(bubble_morse_index, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_lambda1, m)?)?;
    m.add_function(wrap_pyfunction!(classical_period, m)?)?;
    m.add_function(wrap_pyfunction!(limit_comparison, m)?)?;
    Ok(())
}
