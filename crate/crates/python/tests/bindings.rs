use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<R>(f: impl FnOnce(Python<'_>, &Bound<'_, PyDict>) -> R) -> R {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "mvgamma").unwrap();
        mvgamma_py::mvgamma_module(&m).unwrap();
        let g = PyDict::new(py);
        g.set_item("mvgamma", m).unwrap();
        f(py, &g)
    })
}

fn eval_f64(py: Python<'_>, g: &Bound<'_, PyDict>, expr: &std::ffi::CStr) -> f64 {
    py.eval(expr, Some(g), None).unwrap().extract().unwrap()
}

#[test]
fn cdf_through_python() {
    with_module(|py, g| {
        let v = eval_f64(py, g, c"mvgamma.cdf(mvgamma.CorrMatrix.identity(3), 1.0, 1.0)['value']");
        assert!((v - (1.0 - (-1f64).exp()).powi(3)).abs() < 1e-12);
        let s = eval_f64(py, g, c"mvgamma.cdf(mvgamma.CorrMatrix.equicorrelated(3, 0.4), 0.5, [0.8, 1.0, 1.2])['value']");
        let q = eval_f64(
            py,
            g,
            c"mvgamma.cdf(mvgamma.CorrMatrix.equicorrelated(3, 0.4), 0.5, [0.8, 1.0, 1.2], method='one-factorial')['value']",
        );
        assert!((s - q).abs() < 1e-8);
    });
}

#[test]
fn errors_become_python_exceptions() {
    with_module(|py, g| {
        let e = py.eval(c"mvgamma.CorrMatrix([[1.0, 0.5], [0.4, 1.0]])", Some(g), None).unwrap_err();
        assert!(e.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        assert!(py.eval(c"mvgamma.cdf(mvgamma.CorrMatrix.identity(2), 1.0, [1.0, 2.0, 3.0])", Some(g), None).is_err());
        assert!(py.eval(c"mvgamma.cdf(mvgamma.CorrMatrix.block4(), 1.0, 1.0, method='one-factorial')", Some(g), None).is_err());
    });
}

#[test]
fn dict_results() {
    with_module(|py, g| {
        let verdict: bool = py.eval(c"mvgamma.infdiv(mvgamma.CorrMatrix.block4(1.0))['verdict']", Some(g), None).unwrap().extract().unwrap();
        assert!(verdict);
        let m: usize = py.eval(c"mvgamma.decompose(mvgamma.CorrMatrix.identity(4))['m']", Some(g), None).unwrap().extract().unwrap();
        assert_eq!(m, 0);
        let d = eval_f64(
            py,
            g,
            c"mvgamma.lambda_condition(0.5, 5, 0.4, 1.125)['lambda'] - mvgamma.normal_case_coefficients(1.5, 0.4, 5)['lambda']",
        );
        assert!(d.abs() < 1e-6);
        let n: usize = py.eval(c"len(mvgamma.sample(mvgamma.CorrMatrix.block4(), 1, 50, seed=2))", Some(g), None).unwrap().extract().unwrap();
        assert_eq!(n, 50);
    });
}
