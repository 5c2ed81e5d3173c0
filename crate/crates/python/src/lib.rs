use num_complex::Complex64 as C64;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qschro::conditions::{check_a, WeightFunction};
use qschro::lagrange_forms::{bump, quadratic_form};
use qschro::propagate::{integrate_span, Trajectory};
use qschro::quasi::{domain_function, QuasiState, ShinZettlSystem, Side};
use qschro::report::ConditionReport;
use qschro::spectral::{default_windows, eigenvalues, null_probe, BoundaryCondition, SearchMode};
use qschro::{CoefficientField, Error, PiecewisePoly, Tolerances};

fn err(e: Error) -> PyErr {
    match e {
        Error::StepUnderflow { .. } | Error::NoConvergence { .. } | Error::OverflowUnrecoverable { .. } => {
            PyArithmeticError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn side(name: &str) -> PyResult<Side> {
    match name {
        "direct" => Ok(Side::Direct),
        "adjoint" => Ok(Side::Adjoint),
        _ => Err(PyValueError::new_err(format!("side must be 'direct' or 'adjoint', got {name:?}"))),
    }
}

fn tolerances(atol: Option<f64>, rtol: Option<f64>) -> PyResult<Tolerances> {
    let d = Tolerances::default();
    Tolerances::new(atol.unwrap_or(d.atol), rtol.unwrap_or(d.rtol)).map_err(err)
}

/// Piecewise polynomial; `pieces[k]` holds the coefficients of powers of
/// the global `x` on the k-th piece.
#[pyclass(name = "Piecewise", from_py_object)]
#[derive(Clone)]
pub struct PyPiecewise {
    inner: PiecewisePoly,
}

#[pymethods]
impl PyPiecewise {
    #[new]
    #[pyo3(signature = (pieces, breakpoints = Vec::new()))]
    fn new(pieces: Vec<Vec<C64>>, breakpoints: Vec<f64>) -> PyResult<Self> {
        Ok(PyPiecewise { inner: PiecewisePoly::from_global(breakpoints, pieces).map_err(err)? })
    }

    #[staticmethod]
    fn constant(value: C64) -> Self {
        PyPiecewise { inner: PiecewisePoly::constant(value) }
    }

    fn __call__(&self, x: f64) -> C64 {
        self.inner.at(x)
    }

    fn integrate(&self, a: f64, b: f64) -> C64 {
        self.inner.integrate(a, b)
    }

    fn jumps(&self) -> Vec<(f64, C64)> {
        self.inner.jumps()
    }

    #[getter]
    fn breakpoints(&self) -> Vec<f64> {
        self.inner.breakpoints().to_vec()
    }
}

/// Coefficients `s`, `Q`, `r` of `-u'' + (s + Q')u + i[(ru)' + ru']`.
#[pyclass(name = "Coefficients", from_py_object)]
#[derive(Clone)]
pub struct PyCoefficients {
    inner: CoefficientField,
}

#[pymethods]
impl PyCoefficients {
    #[new]
    #[pyo3(signature = (s = None, q = None, r = None))]
    fn new(s: Option<PyPiecewise>, q: Option<PyPiecewise>, r: Option<PyPiecewise>) -> PyResult<Self> {
        let get = |p: Option<PyPiecewise>| p.map(|p| p.inner).unwrap_or_else(PiecewisePoly::zero);
        Ok(PyCoefficients { inner: CoefficientField::new(get(s), get(q), get(r)).map_err(err)? })
    }

    #[staticmethod]
    fn free() -> Self {
        PyCoefficients { inner: CoefficientField::free() }
    }

    /// `Q = c H(x - at)`, i.e. the potential `c delta(x - at)`.
    #[staticmethod]
    fn delta_well(at: f64, c: f64) -> Self {
        PyCoefficients { inner: CoefficientField::delta_well(at, c) }
    }

    /// Quadratic form of the domain function built from a bump.
    #[pyo3(signature = (center, plateau = 1.0, ramp = 1.0))]
    fn form(&self, center: f64, plateau: f64, ramp: f64) -> PyResult<C64> {
        let u = domain_function(&self.inner, Side::Direct, &bump(center, plateau, ramp));
        let half = 0.5 * plateau + ramp;
        Ok(quadratic_form(&self.inner, &u, center - half - 1.0, center + half + 1.0).map_err(err)?.value)
    }
}

#[pyclass(name = "Trajectory")]
pub struct PyTrajectory {
    inner: Trajectory,
}

#[pymethods]
impl PyTrajectory {
    /// `(u, u^[1])` at `x`.
    fn __call__(&self, x: f64) -> (C64, C64) {
        let q = self.inner.eval(x);
        let f = q.logscale.exp();
        (q.y0 * f, q.y1 * f)
    }

    #[getter]
    fn interval(&self) -> (f64, f64) {
        self.inner.interval()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.len()
    }
}

/// Solves `l[u] = lam u` (or the adjoint) over `span` from data at `x0`.
#[pyfunction]
#[pyo3(signature = (coeffs, lam, x0, y0, y1, span, side = "direct", atol = None, rtol = None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    coeffs: &PyCoefficients,
    lam: C64,
    x0: f64,
    y0: C64,
    y1: C64,
    span: (f64, f64),
    side: &str,
    atol: Option<f64>,
    rtol: Option<f64>,
) -> PyResult<PyTrajectory> {
    let s = self::side(side)?;
    let sys = ShinZettlSystem::assemble(&coeffs.inner, s, lam);
    let t = integrate_span(&sys, QuasiState::new(x0, y0, y1, s), span.0, span.1, tolerances(atol, rtol)?)
        .map_err(err)?;
    Ok(PyTrajectory { inner: t })
}

/// Dirichlet eigenvalues on `[a, b]`, by a real scan of `[lo, hi]` or by
/// Newton from complex `seeds`.
#[pyfunction]
#[pyo3(signature = (coeffs, a, b, lo = None, hi = None, points = 400, seeds = None))]
fn eigen(
    coeffs: &PyCoefficients,
    a: f64,
    b: f64,
    lo: Option<f64>,
    hi: Option<f64>,
    points: usize,
    seeds: Option<Vec<C64>>,
) -> PyResult<Vec<C64>> {
    let mode = match (lo, hi, seeds) {
        (_, _, Some(seeds)) => SearchMode::Newton { seeds },
        (Some(lo), Some(hi), None) => SearchMode::Scan { lo, hi, points },
        _ => return Err(PyValueError::new_err("give either lo and hi or seeds")),
    };
    let s = eigenvalues(&coeffs.inner, a, b, &BoundaryCondition::dirichlet(), &mode, Tolerances::default())
        .map_err(err)?;
    Ok(s.found.iter().map(|r| r.lambda).collect())
}

/// Gram-matrix probe for an adjoint null solution in L2.
#[pyfunction]
#[pyo3(signature = (coeffs, lam, tmax = 40.0))]
fn probe<'py>(py: Python<'py>, coeffs: &PyCoefficients, lam: C64, tmax: f64) -> PyResult<Bound<'py, PyDict>> {
    let rep = null_probe(&coeffs.inner, lam, &default_windows(tmax), Tolerances::default()).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("class", rep.class.label())?;
    d.set_item("windows", rep.windows)?;
    d.set_item("ln_n", rep.ln_n)?;
    d.set_item("resolved", rep.resolved)?;
    d.set_item("nested", rep.nested)?;
    d.set_item("exploratory", rep.exploratory)?;
    Ok(d)
}

fn condition_dict<'py>(py: Python<'py>, rep: &ConditionReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("verdict", rep.verdict.to_string())?;
    let constants = PyDict::new(py);
    for (k, v) in &rep.constants {
        constants.set_item(k, v)?;
    }
    d.set_item("constants", constants)?;
    d.set_item("witness", rep.witness.as_ref().map(|w| (w.x, w.value, w.note.clone())))?;
    Ok(d)
}

/// Weight and growth conditions for `r1 = Im r` with weight `m`.
#[pyfunction]
#[pyo3(signature = (coeffs, m, horizon = 50.0))]
fn condition_a<'py>(
    py: Python<'py>,
    coeffs: &PyCoefficients,
    m: &PyPiecewise,
    horizon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let w = WeightFunction::new(m.inner.clone(), horizon).map_err(err)?;
    condition_dict(py, &check_a(&coeffs.inner.r1(), &w).map_err(err)?)
}

#[pymodule]
fn qschro_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPiecewise>()?;
    m.add_class::<PyCoefficients>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(eigen, m)?)?;
    m.add_function(wrap_pyfunction!(probe, m)?)?;
    m.add_function(wrap_pyfunction!(condition_a, m)?)?;
    Ok(())
}
