//! Python bindings. Structured results come back as plain dicts built from
//! the same serialization the CLI reports use.

use mvgamma::factorial::{cdf_mixture_mc, cdf_one_factorial_default, decompose as decompose_repr, detect_one_factorial};
use mvgamma::infdiv::{infdiv_check, Criterion};
use mvgamma::lab::{default_tau_grid, sample_mvgamma, verify_theorem, Method, TheoremInput, VerifyOptions};
use mvgamma::linalg::{block4, Matrix};
use mvgamma::series::{cdf_from_table, expand_adaptive, SeriesOptions, Variant, DEFAULT_MAX_DEGREE, DEFAULT_TOL};
use mvgamma::tail::{
    approx_equicorrelated_product, lambda_condition as lambda_cond, normal_case_coefficients as normal_coeffs,
    taylor_t2 as t2, EquicorrelatedSummary, PerturbationH,
};
use mvgamma::{CorrMatrix, Partition, Shape};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;
use serde_json::json;

create_exception!(mvgamma, MvgammaError, PyValueError, "Raised for invalid input or a failed numerical precondition.");

fn err(e: mvgamma::Error) -> PyErr {
    MvgammaError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| MvgammaError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn shape(alpha: f64) -> PyResult<Shape> {
    Shape::new(alpha).map_err(err)
}

/// Scalars broadcast to every coordinate.
fn point(x: &Bound<'_, PyAny>, n: usize) -> PyResult<Vec<f64>> {
    if let Ok(v) = x.extract::<f64>() {
        return Ok(vec![v; n]);
    }
    let v: Vec<f64> = x.extract()?;
    if v.len() != n {
        return Err(MvgammaError::new_err(format!("x has {} values, matrix has dimension {n}", v.len())));
    }
    Ok(v)
}

/// A validated correlation matrix.
#[pyclass(name = "CorrMatrix", module = "mvgamma", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyCorrMatrix {
    inner: CorrMatrix,
}

#[pymethods]
impl PyCorrMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let m = Matrix::from_rows(&rows).map_err(err)?;
        Ok(PyCorrMatrix { inner: CorrMatrix::new(m).map_err(err)? })
    }

    #[staticmethod]
    fn identity(n: usize) -> Self {
        PyCorrMatrix { inner: CorrMatrix::identity(n) }
    }

    #[staticmethod]
    fn equicorrelated(n: usize, r: f64) -> PyResult<Self> {
        Ok(PyCorrMatrix { inner: CorrMatrix::equicorrelated(n, r).map_err(err)? })
    }

    #[staticmethod]
    fn one_factorial(a: Vec<f64>) -> PyResult<Self> {
        Ok(PyCorrMatrix { inner: CorrMatrix::one_factorial(&a).map_err(err)? })
    }

    /// The 4×4 block family.
    #[staticmethod]
    #[pyo3(signature = (tau = 1.0))]
    fn block4(tau: f64) -> PyResult<Self> {
        Ok(PyCorrMatrix { inner: CorrMatrix::new(block4(tau)).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn min_eigenvalue(&self) -> f64 {
        self.inner.min_eigenvalue()
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.inner.matrix().to_rows()
    }

    fn __getitem__(&self, ij: (usize, usize)) -> PyResult<f64> {
        let n = self.inner.n();
        if ij.0 >= n || ij.1 >= n {
            return Err(pyo3::exceptions::PyIndexError::new_err("index out of range"));
        }
        Ok(self.inner.get(ij.0, ij.1))
    }

    fn __repr__(&self) -> String {
        format!("CorrMatrix({:?})", self.inner.matrix().to_rows())
    }
}

/// Lower-orthant probability `P(Y_j ≤ x_j ∀j)`.
#[pyfunction]
#[pyo3(signature = (r, alpha, x, method = "series", tol = DEFAULT_TOL, max_degree = DEFAULT_MAX_DEGREE, samples = 100_000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn cdf<'py>(
    py: Python<'py>,
    r: &PyCorrMatrix,
    alpha: f64,
    x: &Bound<'py, PyAny>,
    method: &str,
    tol: f64,
    max_degree: usize,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let r = r.inner.clone();
    let al = shape(alpha)?;
    let x = point(x, r.n())?;
    let out = py.detach(move || -> mvgamma::Result<serde_json::Value> {
        match method {
            "series" | "series-q" => {
                let variant = if method == "series" { Variant::UniformC } else { Variant::NormalizedQ };
                let opts = SeriesOptions { variant, tol, max_degree, ..SeriesOptions::default() };
                let table = expand_adaptive(&r, al, &opts)?;
                let v = cdf_from_table(&table, &x)?;
                Ok(json!({
                    "method": method, "value": v.value, "error": v.error, "rigorous": v.rigorous,
                    "converged": v.converged, "max_degree": table.max_degree(), "tail_mass": table.tail_mass(),
                }))
            }
            "one-factorial" => {
                let a = detect_one_factorial(&r).ok_or_else(|| {
                    mvgamma::Error::InvalidArgument("matrix has no one-factorial representation r_ij = a_i a_j".into())
                })?;
                let q = cdf_one_factorial_default(&a, al, &x)?;
                Ok(json!({ "method": method, "value": q.value, "error": q.error, "converged": q.converged, "a": a }))
            }
            "mixture-mc" => {
                let repr = decompose_repr(&r)?;
                let mc = cdf_mixture_mc(&repr, al, &x, samples, seed)?;
                Ok(json!({ "method": method, "value": mc.value, "std_error": mc.std_error, "samples": mc.samples, "seed": seed }))
            }
            other => Err(mvgamma::Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    });
    to_py(py, &out.map_err(err)?)
}

/// Infinite divisibility by the cycle criterion, the signature criterion, or both.
#[pyfunction]
#[pyo3(signature = (r, criteria = "both"))]
fn infdiv<'py>(py: Python<'py>, r: &PyCorrMatrix, criteria: &str) -> PyResult<Bound<'py, PyAny>> {
    let c = match criteria {
        "griffiths" => vec![Criterion::Griffiths],
        "bapat" => vec![Criterion::Bapat],
        "both" => vec![Criterion::Griffiths, Criterion::Bapat],
        other => return Err(MvgammaError::new_err(format!("unknown criteria {other:?}"))),
    };
    to_py(py, &infdiv_check(&r.inner, &c).map_err(err)?)
}

/// Factor representation `R = D + A Aᵀ`.
#[pyfunction]
fn decompose<'py>(py: Python<'py>, r: &PyCorrMatrix) -> PyResult<Bound<'py, PyAny>> {
    let rep = decompose_repr(&r.inner).map_err(err)?;
    let v = json!({
        "m": rep.m(),
        "d": rep.d(),
        "a": rep.a().to_rows(),
        "one_factorial": detect_one_factorial(&r.inner),
        "reconstruction_error": rep.reconstruction_error(&r.inner),
    });
    to_py(py, &v)
}

/// Theorem check along its matrix path; returns the verification report.
#[pyfunction]
#[pyo3(signature = (theorem, r, alpha, x, partition = None, r0 = None, tau_grid = None, method = "series", samples = 100_000, seed = 0, derivative = true))]
#[allow(clippy::too_many_arguments)]
fn verify<'py>(
    py: Python<'py>,
    theorem: u8,
    r: &PyCorrMatrix,
    alpha: f64,
    x: &Bound<'py, PyAny>,
    partition: Option<usize>,
    r0: Option<PyCorrMatrix>,
    tau_grid: Option<Vec<f64>>,
    method: &str,
    samples: usize,
    seed: u64,
    derivative: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let rr = r.inner.clone();
    let n = rr.n();
    let part = |p: Option<usize>| -> PyResult<Partition> {
        let n1 = p.ok_or_else(|| MvgammaError::new_err("partition is required for this theorem"))?;
        Partition::new(n, n1).map_err(err)
    };
    let input = match theorem {
        1 => TheoremInput::Thm1 { part: part(partition)?, r: rr },
        2 => TheoremInput::Thm2 { r: rr },
        3 => TheoremInput::Thm3 { part: part(partition)?, r: rr, repr: None, r22_repr: None },
        4 => {
            let r0 = r0.ok_or_else(|| MvgammaError::new_err("r0 is required with theorem=4"))?;
            TheoremInput::Thm4 { r0: r0.inner, r: rr }
        }
        t => return Err(MvgammaError::new_err(format!("theorem must be 1..4, got {t}"))),
    };
    let method: Method = method.parse().map_err(err)?;
    let opts = VerifyOptions {
        method,
        samples,
        seed,
        derivative,
        tau_grid: tau_grid.unwrap_or_else(default_tau_grid),
        ..VerifyOptions::default()
    };
    let x = point(x, n)?;
    let al = shape(alpha)?;
    let rep = py.detach(move || verify_theorem(&input, al, &x, &opts)).map_err(err)?;
    to_py(py, &rep)
}

/// Coefficients and sign of the tail condition for the equicorrelated case.
#[pyfunction]
fn lambda_condition<'py>(py: Python<'py>, alpha: f64, n: usize, r: f64, x: f64) -> PyResult<Bound<'py, PyAny>> {
    let c = lambda_cond(shape(alpha)?, n, r, x).map_err(err)?;
    to_py(py, &c)
}

/// The same coefficients in the normal case through the closed one-dimensional integrals.
#[pyfunction]
fn normal_case_coefficients<'py>(py: Python<'py>, z: f64, r: f64, n: usize) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &normal_coeffs(z, r, n).map_err(err)?)
}

/// Second-order expansion around the equicorrelated matrix with the same mean.
/// With no matrix, uses `H = O` at dimension `n` and correlation `r`.
#[pyfunction]
#[pyo3(signature = (alpha, x, matrix = None, n = None, r = None))]
fn taylor_t2<'py>(
    py: Python<'py>,
    alpha: f64,
    x: f64,
    matrix: Option<PyCorrMatrix>,
    n: Option<usize>,
    r: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let (h, rbar) = match (matrix, n, r) {
        (Some(m), _, _) => PerturbationH::from_matrix(&m.inner).map_err(err)?,
        (None, Some(n), Some(r)) => (PerturbationH::new(Matrix::zeros(n, n)).map_err(err)?, r),
        _ => return Err(MvgammaError::new_err("pass a matrix, or n and r for H = O")),
    };
    let t = t2(shape(alpha)?, h.n(), rbar, x, &h).map_err(err)?;
    to_py(py, &t)
}

/// Two-block product approximation with up to `kmax` correction terms.
#[pyfunction]
#[pyo3(signature = (x, alpha, n1, n2, rbar1, rbar2, rbar_sq, kmax = 8))]
#[allow(clippy::too_many_arguments)]
fn block_product<'py>(
    py: Python<'py>,
    x: f64,
    alpha: f64,
    n1: usize,
    n2: usize,
    rbar1: f64,
    rbar2: f64,
    rbar_sq: f64,
    kmax: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let s = EquicorrelatedSummary::new(n1, n2, rbar1, rbar2, rbar_sq).map_err(err)?;
    to_py(py, &approx_equicorrelated_product(x, shape(alpha)?, &s, kmax).map_err(err)?)
}

/// `count` draws of `Y = (Σ_k Z_k²/2)` with `nu` Gaussian vectors `Z_k ~ N(0, R)`.
#[pyfunction]
#[pyo3(signature = (r, nu, count, seed = 0))]
fn sample(py: Python<'_>, r: &PyCorrMatrix, nu: u32, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let r = r.inner.clone();
    let s = py.detach(move || sample_mvgamma(&r, nu, count, seed)).map_err(err)?;
    Ok(s.draws().map(|d| d.to_vec()).collect())
}

#[pymodule]
#[pyo3(name = "mvgamma")]
pub fn mvgamma_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", mvgamma::VERSION)?;
    m.add("MvgammaError", m.py().get_type::<MvgammaError>())?;
    m.add_class::<PyCorrMatrix>()?;
    m.add_function(wrap_pyfunction!(cdf, m)?)?;
    m.add_function(wrap_pyfunction!(infdiv, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_condition, m)?)?;
    m.add_function(wrap_pyfunction!(normal_case_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(taylor_t2, m)?)?;
    m.add_function(wrap_pyfunction!(block_product, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_points_broadcast() {
        Python::initialize();
        Python::attach(|py| {
            let x = 1.5f64.into_pyobject(py).unwrap().into_any();
            assert_eq!(point(&x, 3).unwrap(), vec![1.5; 3]);
            let v = vec![1.0, 2.0].into_pyobject(py).unwrap().into_any();
            assert_eq!(point(&v, 2).unwrap(), vec![1.0, 2.0]);
            assert!(point(&v, 3).is_err());
        });
    }
}
