//! Python bindings for the limit-circle spectral solver. Exposes the
//! coefficient field, Jost/connection machinery, eigenvalue search, and the
//! spectral transform with plain Python types (floats, complex, dicts).

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use lcspec_core::connection::ConnectionEvaluator;
use lcspec_core::extensions::{
    eigenvalues as core_eigenvalues, omega_from_t as core_omega_from_t, resolvent_apply,
    spectral_transform as core_spectral_transform, t_from_omega as core_t_from_omega,
    ExtensionPoint, TParam,
};
use lcspec_core::field::{check_lc_conditions, Alpha, ConditionConfig, Verdict};
use lcspec_core::quasiresolvent::{ode_residual_l2, SampledFunction};
use lcspec_core::{CoefficientField, LcError};

fn err(e: LcError) -> PyErr {
    match e {
        LcError::Config(msg) => PyValueError::new_err(msg),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn alpha_of(a: f64) -> Alpha {
    if a.is_infinite() {
        Alpha::Infinite
    } else {
        Alpha::Finite(a)
    }
}

/// Coefficient pair (p, q) on the half-line, with the boundary condition
/// slope alpha at the left endpoint (pass float('inf') for the u(0) = 0
/// condition being replaced by pu'(0) = 0 pairing).
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Field {
    inner: CoefficientField,
}

#[pymethods]
impl Field {
    /// p = x^beta, q = x^gamma for x >= x0 (smooth positive continuation
    /// below x0).
    #[staticmethod]
    #[pyo3(signature = (beta, gamma, alpha = 0.0, x0 = None))]
    fn power_law(beta: f64, gamma: f64, alpha: f64, x0: Option<f64>) -> PyResult<Self> {
        let mut f = CoefficientField::power_law(beta, gamma).with_alpha(alpha_of(alpha));
        if let Some(x0) = x0 {
            if x0 <= 0.0 {
                return Err(PyValueError::new_err("x0 must be positive"));
            }
            f = f.with_x0(x0);
        }
        Ok(Field { inner: f })
    }

    /// p = 1, q = exp(2 kappa x).
    #[staticmethod]
    #[pyo3(signature = (kappa, alpha = 0.0))]
    fn exponential(kappa: f64, alpha: f64) -> PyResult<Self> {
        Ok(Field {
            inner: CoefficientField::exponential(kappa).with_alpha(alpha_of(alpha)),
        })
    }

    /// Tabulated coefficients, interpolated by cubic splines.
    #[staticmethod]
    #[pyo3(signature = (xs, ps, qs, alpha = 0.0))]
    fn tabulated(xs: Vec<f64>, ps: Vec<f64>, qs: Vec<f64>, alpha: f64) -> PyResult<Self> {
        let f = CoefficientField::tabulated(xs, ps, qs).map_err(err)?;
        Ok(Field {
            inner: f.with_alpha(alpha_of(alpha)),
        })
    }

    #[getter]
    fn x0(&self) -> f64 {
        self.inner.x0
    }

    /// (p, q) at a point.
    fn eval(&self, x: f64) -> PyResult<(f64, f64)> {
        let (p, _, q) = self.inner.eval(x).map_err(err)?;
        Ok((p, q))
    }

    fn __repr__(&self) -> String {
        format!("Field(x0={})", self.inner.x0)
    }
}

fn evaluator(field: &Field, z_scale: Complex64) -> PyResult<ConnectionEvaluator> {
    ConnectionEvaluator::new(&field.inner, z_scale).map_err(err)
}

/// Check the limit-circle hypotheses; returns a dict with the tail
/// diagnostics and a verdict string.
#[pyfunction]
#[pyo3(signature = (field, far_cutoff = None))]
fn classify<'py>(
    py: Python<'py>,
    field: &Field,
    far_cutoff: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let cutoff = far_cutoff.unwrap_or(field.inner.x0 + 30.0);
    let rep = check_lc_conditions(&field.inner, cutoff, ConditionConfig::default()).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("a_l2_tail", rep.a_l2_tail)?;
    d.set_item("drift_l1_tail", rep.drift_l1_tail)?;
    d.set_item("boundary_decay", rep.boundary_decay)?;
    let verdict = match rep.verdict {
        Verdict::LimitCircleConfirmed => "limit_circle_confirmed".to_string(),
        other => format!("{other:?}"),
    };
    d.set_item("verdict", verdict)?;
    Ok(d)
}

/// Connection coefficients of the regular pair against the Jost pair at z.
#[pyfunction]
fn connect<'py>(py: Python<'py>, field: &Field, z: Complex64) -> PyResult<Bound<'py, PyDict>> {
    let ev = evaluator(field, z)?;
    let c = ev.connect(z).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("sigma_plus", c.sigma_plus)?;
    d.set_item("sigma_minus", c.sigma_minus)?;
    d.set_item("tau_plus", c.tau_plus)?;
    d.set_item("tau_minus", c.tau_minus)?;
    d.set_item("wro_residual", c.normalization_gap())?;
    Ok(d)
}

/// Jost solution at z: (x, f, pf') as parallel lists.
#[pyfunction]
fn jost(
    field: &Field,
    z: Complex64,
) -> PyResult<(Vec<f64>, Vec<Complex64>, Vec<Complex64>)> {
    let ev = evaluator(field, z)?;
    let (f, _) = ev.jost_pair(z).map_err(err)?;
    Ok((f.sol.grid.xs.clone(), f.sol.u.clone(), f.sol.v.clone()))
}

/// Eigenvalues of the realization with boundary parameter omega (|omega| = 1)
/// on [lo, hi]; returns a list of dicts with residual diagnostics.
#[pyfunction]
#[pyo3(signature = (field, omega, lo, hi, tol = 1e-8))]
fn eigenvalues<'py>(
    py: Python<'py>,
    field: &Field,
    omega: Complex64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let om = ExtensionPoint::new(omega).map_err(err)?;
    let scale = Complex64::new(lo.abs().max(hi.abs()).max(1.0), 0.0);
    let ev = ConnectionEvaluator::with_tail_threshold(&field.inner, scale, 1e-7).map_err(err)?;
    let rep = core_eigenvalues(&ev, &om, (lo, hi), tol).map_err(err)?;
    let mut out = Vec::new();
    for (k, &lam) in rep.lambdas.iter().enumerate() {
        let d = PyDict::new(py);
        d.set_item("lambda", lam)?;
        d.set_item("phase_residual", rep.phase_residuals[k])?;
        d.set_item("ode_residual", rep.ode_residuals[k])?;
        out.push(d);
    }
    Ok(out)
}

/// Resolvent of the omega-realization applied to a Gaussian right-hand side;
/// returns (x, u, pu', residual).
#[pyfunction]
#[pyo3(signature = (field, omega, z, h_center = 2.0, h_width = 0.4))]
fn resolve(
    field: &Field,
    omega: Complex64,
    z: Complex64,
    h_center: f64,
    h_width: f64,
) -> PyResult<(Vec<f64>, Vec<Complex64>, Vec<Complex64>, f64)> {
    let om = ExtensionPoint::new(omega).map_err(err)?;
    let ev = evaluator(field, z)?;
    let h = SampledFunction::gaussian(ev.grid(), h_center, h_width);
    let u = resolvent_apply(&ev, &om, z, &h).map_err(err)?;
    let residual = ode_residual_l2(&u, &h).map_err(err)?;
    Ok((u.grid.xs.clone(), u.u.clone(), u.v.clone(), residual))
}

/// Cauchy transform of the spectral measure of a Gaussian element at z
/// (Im z != 0); a Herglotz function of z.
#[pyfunction]
#[pyo3(signature = (field, omega, z, h_center = 2.0, h_width = 0.4))]
fn spectral_transform(
    field: &Field,
    omega: Complex64,
    z: Complex64,
    h_center: f64,
    h_width: f64,
) -> PyResult<Complex64> {
    if z.im == 0.0 {
        return Err(PyValueError::new_err("spectral_transform needs Im z != 0"));
    }
    let om = ExtensionPoint::new(omega).map_err(err)?;
    let ev = evaluator(field, z)?;
    let h = SampledFunction::gaussian(ev.grid(), h_center, h_width);
    core_spectral_transform(&ev, &om, z, &h).map_err(err)
}

/// Map the deficiency parameter t (float, or None for the point at infinity)
/// to the unimodular boundary parameter omega.
#[pyfunction]
#[pyo3(signature = (field, t = None))]
fn omega_from_t(field: &Field, t: Option<f64>) -> PyResult<Complex64> {
    let ev = evaluator(field, Complex64::new(1.0, 0.0))?;
    let c0 = ev.connect(Complex64::ZERO).map_err(err)?;
    let tp = match t {
        Some(t) => TParam::Real(t),
        None => TParam::Infinity,
    };
    Ok(core_omega_from_t(&c0, tp).map_err(err)?.omega)
}

/// Inverse of omega_from_t; returns None at the point at infinity.
#[pyfunction]
fn t_from_omega(field: &Field, omega: Complex64) -> PyResult<Option<f64>> {
    let om = ExtensionPoint::new(omega).map_err(err)?;
    let ev = evaluator(field, Complex64::new(1.0, 0.0))?;
    let c0 = ev.connect(Complex64::ZERO).map_err(err)?;
    match core_t_from_omega(&c0, &om).map_err(err)? {
        TParam::Real(t) => Ok(Some(t)),
        TParam::Infinity => Ok(None),
    }
}

#[pymodule]
fn lcspec_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Field>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(connect, m)?)?;
    m.add_function(wrap_pyfunction!(jost, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(resolve, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_transform, m)?)?;
    m.add_function(wrap_pyfunction!(omega_from_t, m)?)?;
    m.add_function(wrap_pyfunction!(t_from_omega, m)?)?;
    Ok(())
}
