//! Python bindings: Lagrangian frames, the unitary intersection test, Maslov
//! indices of sampled paths and Morse indices of Schrodinger problems.
//! Reports come back as plain dicts with the same layout as the CLI's JSON.

use maslov::interval::{morse_index_interval, IntervalOptions, IntervalProblem};
use maslov::line::{morse_index_line, LineOptions, LineProblem};
use maslov::spectral_flow::{maslov_index_with, unit_eigenvalue_phases, MaslovOptions};
use maslov::{oracle, report, unitary, LagrangianPairPath, Tolerances};
use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(maslov, MaslovError, PyException);

fn err(e: maslov::Error) -> PyErr {
    MaslovError::new_err(e.to_string())
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err(format!("{what} must be a non-empty square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = report::to_json_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse<T: for<'de> serde::Deserialize<'de>>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("cannot parse problem: {e}")))
}

/// A Lagrangian subspace spanned by the columns of `(X; Y)`.
#[pyclass(name = "LagrangianFrame", module = "maslov", frozen)]
struct PyFrame {
    inner: maslov::LagrangianFrame,
}

#[pymethods]
impl PyFrame {
    #[new]
    #[pyo3(signature = (x, y, tol_frame=1e-9))]
    fn new(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, tol_frame: f64) -> PyResult<Self> {
        let tol = Tolerances {
            frame: tol_frame,
            ..Tolerances::default()
        };
        let inner = maslov::LagrangianFrame::with_tolerances(rows_to_matrix(&x, "x")?, rows_to_matrix(&y, "y")?, &tol)
            .map_err(err)?;
        Ok(PyFrame { inner })
    }

    /// Line through the origin at angle `t` in the plane.
    #[staticmethod]
    fn line(t: f64) -> PyResult<Self> {
        let inner = maslov::LagrangianFrame::new(DMatrix::from_element(1, 1, t.cos()), DMatrix::from_element(1, 1, t.sin()))
            .map_err(err)?;
        Ok(PyFrame { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.x())
    }

    #[getter]
    fn y(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.y())
    }

    /// Orthogonal projection onto the subspace, a `2n x 2n` matrix.
    fn projection(&self) -> PyResult<Vec<Vec<f64>>> {
        Ok(matrix_to_rows(&self.inner.projection().map_err(err)?))
    }

    /// Equivalent frame with orthonormal columns.
    fn normalized(&self) -> PyResult<Self> {
        Ok(PyFrame {
            inner: self.inner.normalize().map_err(err)?.into_frame(),
        })
    }

    fn __repr__(&self) -> String {
        format!("LagrangianFrame(n={})", self.inner.n())
    }
}

/// Eigenvalue phases of the pair unitary, sorted in `[0, 2 pi)`.
#[pyfunction]
fn w_tilde_phases(l1: PyRef<'_, PyFrame>, l2: PyRef<'_, PyFrame>) -> PyResult<Vec<f64>> {
    let w = unitary::w_tilde(&l1.inner, &l2.inner).map_err(err)?;
    unit_eigenvalue_phases(&w).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (l1, l2, tol_phase=1e-6))]
fn intersection_dim(l1: PyRef<'_, PyFrame>, l2: PyRef<'_, PyFrame>, tol_phase: f64) -> PyResult<usize> {
    unitary::intersection_dim(&l1.inner, &l2.inner, tol_phase).map_err(err)
}

/// Intersection dimension from a rank computation, independent of the
/// unitary construction.
#[pyfunction]
#[pyo3(signature = (l1, l2, tol_rank=1e-10))]
fn brute_intersection_dim(l1: PyRef<'_, PyFrame>, l2: PyRef<'_, PyFrame>, tol_rank: f64) -> PyResult<usize> {
    oracle::brute_intersection_dim(&l1.inner, &l2.inner, tol_rank).map_err(err)
}

/// Maslov index of a sampled pair path. `l1` and `l2` hold one frame per
/// grid point.
#[pyfunction]
#[pyo3(signature = (grid, l1, l2, tol_phase=1e-6))]
fn maslov_index<'py>(
    py: Python<'py>,
    grid: Vec<f64>,
    l1: Vec<PyRef<'py, PyFrame>>,
    l2: Vec<PyRef<'py, PyFrame>>,
    tol_phase: f64,
) -> PyResult<Bound<'py, PyAny>> {
    if l1.len() != l2.len() {
        return Err(PyValueError::new_err("l1 and l2 must have the same length"));
    }
    let frames = l1.iter().zip(&l2).map(|(a, b)| (a.inner.clone(), b.inner.clone())).collect();
    let mut opts = MaslovOptions::default();
    opts.tol.phase = tol_phase;
    let result = py.detach(|| {
        let path = LagrangianPairPath::from_samples(grid, frames)?;
        maslov_index_with(&path, &opts)
    });
    to_py(py, &result.map_err(err)?)
}

/// Morse index of a problem on `[0, 1]` given as JSON text.
#[pyfunction]
#[pyo3(signature = (problem, verify=false, s0=0.05, lambda_inf=None))]
fn morse_index_interval_json<'py>(
    py: Python<'py>,
    problem: &str,
    verify: bool,
    s0: f64,
    lambda_inf: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let p: IntervalProblem = parse(problem)?;
    let opts = IntervalOptions {
        s0,
        lambda_inf,
        verify,
        ..IntervalOptions::default()
    };
    let r = py.detach(|| morse_index_interval(&p, &opts)).map_err(err)?;
    to_py(py, &r)
}

/// Morse index of a problem on the real line given as JSON text.
#[pyfunction]
#[pyo3(signature = (problem, verify=false, full_box=false, delta=1e-4))]
fn morse_index_line_json<'py>(
    py: Python<'py>,
    problem: &str,
    verify: bool,
    full_box: bool,
    delta: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let p: LineProblem = parse(problem)?;
    let opts = LineOptions {
        verify,
        full_box,
        delta,
        ..LineOptions::default()
    };
    let r = py.detach(|| morse_index_line(&p, &opts)).map_err(err)?;
    to_py(py, &r)
}

/// Finite-difference count of negative eigenvalues on `[0, 1]`.
#[pyfunction]
#[pyo3(signature = (problem, points=800))]
fn fd_morse_interval(py: Python<'_>, problem: &str, points: usize) -> PyResult<usize> {
    let p: IntervalProblem = parse(problem)?;
    py.detach(|| oracle::fd_morse_interval(&p, points, None)).map_err(err)
}

/// Finite-difference count of negative eigenvalues on `[-half_width, half_width]`.
#[pyfunction]
#[pyo3(signature = (problem, half_width=None, points=2000))]
fn fd_morse_line(py: Python<'_>, problem: &str, half_width: Option<f64>, points: usize) -> PyResult<usize> {
    let p: LineProblem = parse(problem)?;
    let l = half_width.unwrap_or_else(|| p.half_width());
    py.detach(|| oracle::fd_morse_line(&p, l, points, None)).map_err(err)
}

#[pymodule]
#[pyo3(name = "maslov")]
fn maslov_module<'py>(py: Python<'py>, m: &Bound<'py, PyModule>) -> PyResult<()> {
    m.add_class::<PyFrame>()?;
    m.add("MaslovError", py.get_type::<MaslovError>())?;
    m.add_function(wrap_pyfunction!(w_tilde_phases, m)?)?;
    m.add_function(wrap_pyfunction!(intersection_dim, m)?)?;
    m.add_function(wrap_pyfunction!(brute_intersection_dim, m)?)?;
    m.add_function(wrap_pyfunction!(maslov_index, m)?)?;
    m.add_function(wrap_pyfunction!(morse_index_interval_json, m)?)?;
    m.add_function(wrap_pyfunction!(morse_index_line_json, m)?)?;
    m.add_function(wrap_pyfunction!(fd_morse_interval, m)?)?;
    m.add_function(wrap_pyfunction!(fd_morse_line, m)?)?;
    Ok(())
}
