use std::path::PathBuf;

use clap::{Args, ValueEnum};
use mvgamma::factorial::{cdf_mixture_mc, cdf_one_factorial_default, decompose, detect_one_factorial};
use mvgamma::infdiv::{infdiv_check, Criterion};
use mvgamma::lab::{default_tau_grid, verify_theorem, Method, Status, TheoremInput, VerifyOptions};
use mvgamma::linalg::{sym_eigen, CorrMatrix, Matrix, Partition};
use mvgamma::series::{cdf_from_table, expand_adaptive, SeriesOptions, Variant, DEFAULT_MAX_DEGREE, DEFAULT_TOL};
use mvgamma::tail::{
    approx_equicorrelated_product, lambda_condition, lambda_integrand, normal_case_coefficients, taylor_t2,
    EquicorrelatedSummary, PerturbationH,
};
use mvgamma::{Error, Shape};
use serde_json::{json, Value};

use crate::error::{CliError, EXIT_HYPOTHESIS, EXIT_INCONCLUSIVE, EXIT_INPUT, EXIT_OK, EXIT_UNCONVERGED};
use crate::matrix::{digest, read_matrix, MatrixArgs};
use crate::report::{plot_data, write_atomic};

/// Result of one command before it is wrapped into a report.
pub struct Outcome {
    pub results: Value,
    pub exit: i32,
    pub digest: Option<String>,
    pub seed: Option<u64>,
    pub error: Option<Value>,
}

impl Outcome {
    fn ok(results: Value, digest: Option<String>) -> Self {
        Outcome { results, exit: EXIT_OK, digest, seed: None, error: None }
    }

    fn converged(mut self, converged: bool) -> Self {
        if !converged && self.exit == EXIT_OK {
            self.exit = EXIT_UNCONVERGED;
        }
        self
    }
}

fn shape(alpha: f64) -> Result<Shape, CliError> {
    Ok(Shape::new(alpha)?)
}

/// A single value is repeated for every coordinate.
fn broadcast(x: &[f64], n: usize) -> Result<Vec<f64>, CliError> {
    match x.len() {
        1 => Ok(vec![x[0]; n]),
        k if k == n => Ok(x.to_vec()),
        k => Err(CliError::Usage(format!("--x has {k} values, matrix has dimension {n}"))),
    }
}

#[derive(Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
}

pub fn validate(a: &ValidateArgs) -> Result<Outcome, CliError> {
    let raw = a.matrix.raw()?;
    let d = Some(digest(&raw));
    if !raw.is_square() {
        return Err(CliError::Usage(format!("matrix is {}x{}", raw.rows(), raw.cols())));
    }
    let n = raw.rows();
    let (asym, _, _) = raw.asymmetry();
    let unit = (0..n).all(|i| (raw[(i, i)] - 1.0).abs() <= mvgamma::linalg::SYMMETRY_TOL);
    let eig = sym_eigen(&raw.symmetrize())?;
    let (lo, hi) = (eig.min(), eig.max());
    let mut results = json!({
        "n": n,
        "symmetric": asym <= mvgamma::linalg::SYMMETRY_TOL,
        "max_asymmetry": asym,
        "unit_diagonal": unit,
        "min_eigenvalue": lo,
        "max_eigenvalue": hi,
        "condition": if lo > 0.0 { hi / lo } else { f64::INFINITY },
    });
    match CorrMatrix::new(raw) {
        Ok(_) => {
            results["valid"] = true.into();
            results["positive_definite"] = true.into();
            Ok(Outcome::ok(results, d))
        }
        Err(e) => {
            results["valid"] = false.into();
            results["positive_definite"] = (lo > mvgamma::linalg::PD_TOL).into();
            if !lo.is_finite() || lo <= 0.0 {
                results["condition"] = Value::Null;
            }
            let e = CliError::Core(e);
            Ok(Outcome { results, exit: EXIT_INPUT, digest: d, seed: None, error: Some(e.to_json()) })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CdfMethod {
    Series,
    SeriesQ,
    OneFactorial,
    MixtureMc,
}

#[derive(Args)]
pub struct CdfArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long)]
    pub alpha: f64,
    /// Comma-separated upper limits; one value is used for every coordinate.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    pub x: Vec<f64>,
    #[arg(long, value_enum, default_value = "series")]
    pub method: CdfMethod,
    /// Series truncation target for the omitted coefficient mass.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_DEGREE)]
    pub max_degree: usize,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn cdf(a: &CdfArgs) -> Result<Outcome, CliError> {
    let r = a.matrix.load()?;
    let d = Some(digest(r.matrix()));
    let alpha = shape(a.alpha)?;
    let x = broadcast(&a.x, r.n())?;
    match a.method {
        CdfMethod::Series | CdfMethod::SeriesQ => {
            let variant = if a.method == CdfMethod::Series { Variant::UniformC } else { Variant::NormalizedQ };
            let opts = SeriesOptions { variant, tol: a.tol, max_degree: a.max_degree, ..SeriesOptions::default() };
            let table = expand_adaptive(&r, alpha, &opts)?;
            let v = cdf_from_table(&table, &x)?;
            let (lo, hi) = if v.rigorous { v.bracket() } else { (v.value - v.error, (v.value + v.error).min(1.0)) };
            let results = json!({
                "method": if a.method == CdfMethod::Series { "series" } else { "series-q" },
                "value": v.value,
                "error": v.error,
                "bracket": [lo, hi],
                "bracket_kind": if v.rigorous { "rigorous" } else { "estimate" },
                "converged": v.converged,
                "max_degree": table.max_degree(),
                "tail_mass": table.tail_mass(),
                "coefficients": table.len(),
                "min_coefficient": table.min_coefficient(),
                "c": table.c(),
                "x": x,
                "alpha": a.alpha,
            });
            Ok(Outcome::ok(results, d).converged(v.converged))
        }
        CdfMethod::OneFactorial => {
            let load = detect_one_factorial(&r)
                .ok_or_else(|| Error::InvalidArgument("matrix has no one-factorial representation r_ij = a_i a_j".into()))?;
            let q = cdf_one_factorial_default(&load, alpha, &x)?;
            let results = json!({
                "method": "one-factorial",
                "value": q.value,
                "error": q.error,
                "bracket": [q.value - q.error, q.value + q.error],
                "bracket_kind": "quadrature",
                "converged": q.converged,
                "a": load,
                "x": x,
                "alpha": a.alpha,
            });
            Ok(Outcome::ok(results, d).converged(q.converged))
        }
        CdfMethod::MixtureMc => {
            let repr = decompose(&r)?;
            let mc = cdf_mixture_mc(&repr, alpha, &x, a.samples, a.seed)?;
            let results = json!({
                "method": "mixture-mc",
                "value": mc.value,
                "std_error": mc.std_error,
                "bracket": [mc.value - 3.0 * mc.std_error, mc.value + 3.0 * mc.std_error],
                "bracket_kind": "3-sigma",
                "samples": mc.samples,
                "factors": repr.m(),
                "x": x,
                "alpha": a.alpha,
            });
            Ok(Outcome { seed: Some(a.seed), ..Outcome::ok(results, d) })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Criteria {
    Griffiths,
    Bapat,
    Both,
}

#[derive(Args)]
pub struct InfdivArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long, value_enum, default_value = "both")]
    pub criteria: Criteria,
}

pub fn infdiv(a: &InfdivArgs) -> Result<Outcome, CliError> {
    let r = a.matrix.load()?;
    let c = match a.criteria {
        Criteria::Griffiths => vec![Criterion::Griffiths],
        Criteria::Bapat => vec![Criterion::Bapat],
        Criteria::Both => vec![Criterion::Griffiths, Criterion::Bapat],
    };
    let rep = infdiv_check(&r, &c)?;
    let mut results = serde_json::to_value(&rep).expect("serializable");
    results["consistent"] = rep.consistent().into();
    results["griffiths_witness_one_based"] =
        json!(rep.griffiths_witness.as_ref().map(|w| w.iter().map(|i| i + 1).collect::<Vec<_>>()));
    let inv = r.inverse()?;
    results["inverse"] = json!(inv.to_rows());
    Ok(Outcome::ok(results, Some(digest(r.matrix()))))
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub theorem: u8,
    /// Target matrix `R`.
    #[command(flatten)]
    pub matrix: MatrixArgs,
    /// Starting matrix for the convex path.
    #[arg(long)]
    pub r0: Option<PathBuf>,
    /// Size of the first block.
    #[arg(long)]
    pub partition: Option<usize>,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub tau_grid: Option<Vec<f64>>,
    #[arg(long, default_value = "series")]
    pub method: Method,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Where to evaluate the derivative identity.
    #[arg(long, value_delimiter = ',')]
    pub identity_points: Option<Vec<f64>>,
    /// Skip the derivative identity.
    #[arg(long)]
    pub no_derivative: bool,
    /// Two-column dump of the first curve (tau, value).
    #[arg(long)]
    pub dump_curve: Option<PathBuf>,
}

fn partition(n: usize, p: Option<usize>) -> Result<Partition, CliError> {
    let n1 = p.ok_or_else(|| CliError::Usage("--partition is required for this theorem".into()))?;
    Ok(Partition::new(n, n1)?)
}

pub fn verify(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let r = a.matrix.load()?;
    let n = r.n();
    let mut d = digest(r.matrix());
    let input = match a.theorem {
        1 => TheoremInput::Thm1 { part: partition(n, a.partition)?, r },
        2 => TheoremInput::Thm2 { r },
        3 => TheoremInput::Thm3 { part: partition(n, a.partition)?, r, repr: None, r22_repr: None },
        _ => {
            let path = a.r0.as_ref().ok_or_else(|| CliError::Usage("--r0 is required with --theorem 4".into()))?;
            let raw = read_matrix(path)?;
            d = format!("{d}+{}", digest(&raw));
            TheoremInput::Thm4 { r0: CorrMatrix::new(raw)?, r }
        }
    };
    let x = broadcast(&a.x, n)?;
    let mut opts = VerifyOptions {
        method: a.method,
        series: SeriesOptions { tol: a.tol, ..SeriesOptions::default() },
        samples: a.samples,
        seed: a.seed,
        derivative: !a.no_derivative,
        ..VerifyOptions::default()
    };
    opts.tau_grid = a.tau_grid.clone().unwrap_or_else(default_tau_grid);
    if let Some(p) = &a.identity_points {
        opts.identity_points = p.clone();
    }
    let rep = verify_theorem(&input, shape(a.alpha)?, &x, &opts)?;
    if let (Some(path), Some(c)) = (&a.dump_curve, rep.curves.first()) {
        let header = vec![
            format!("theorem {} method {} alpha {}", rep.theorem, c.method, rep.alpha),
            "columns: tau cdf".to_string(),
        ];
        let rows: Vec<(f64, f64)> = c.points.iter().map(|p| (p.tau, p.value)).collect();
        write_atomic(path, &plot_data(&header, &rows))?;
    }
    let exit = match rep.status {
        Status::Pass => EXIT_OK,
        Status::HypothesisFailure => EXIT_HYPOTHESIS,
        Status::Inconclusive => EXIT_INCONCLUSIVE,
        Status::Unconverged => EXIT_UNCONVERGED,
    };
    let results = serde_json::to_value(&rep).expect("serializable");
    Ok(Outcome { results, exit, digest: Some(d), seed: Some(a.seed), error: None })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ApproxKind {
    BlockProduct,
    Lambda,
    T2,
    NormalCoeffs,
}

#[derive(Args)]
pub struct ApproxArgs {
    #[arg(long, value_enum)]
    pub kind: ApproxKind,
    /// Optional matrix: block means for block-product, `H` for t2.
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Common upper limit.
    #[arg(long)]
    pub x: Option<f64>,
    /// Normal-case half-width.
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Mean correlation.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, default_value_t = 8)]
    pub kmax: usize,
    #[arg(long)]
    pub partition: Option<usize>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    #[arg(long)]
    pub rbar1: Option<f64>,
    #[arg(long)]
    pub rbar2: Option<f64>,
    #[arg(long)]
    pub rbar_sq: Option<f64>,
    /// t2 at H = O; needs --n and --r.
    #[arg(long)]
    pub zero_h: bool,
    /// Two-column dump (y, weighted lambda integrand).
    #[arg(long)]
    pub dump_integrand: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    pub y_max: f64,
    #[arg(long, default_value_t = 400)]
    pub points: usize,
}

fn need<T: Copy>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for this kind")))
}

fn has_matrix(m: &MatrixArgs) -> bool {
    m.matrix.is_some() || m.family.is_some()
}

pub fn approx(a: &ApproxArgs) -> Result<Outcome, CliError> {
    let alpha = shape(a.alpha)?;
    let mut d = None;
    let mut dump: Option<(usize, f64, f64, Shape)> = None;
    let out = match a.kind {
        ApproxKind::BlockProduct => {
            let x = need(a.x, "x")?;
            let s = if has_matrix(&a.matrix) {
                let r = a.matrix.load()?;
                d = Some(digest(r.matrix()));
                EquicorrelatedSummary::from_matrix(&r, &partition(r.n(), a.partition)?)?
            } else {
                EquicorrelatedSummary::new(
                    need(a.n1, "n1")?,
                    need(a.n2, "n2")?,
                    need(a.rbar1, "rbar1")?,
                    need(a.rbar2, "rbar2")?,
                    need(a.rbar_sq, "rbar-sq")?,
                )?
            };
            let v = approx_equicorrelated_product(x, alpha, &s, a.kmax)?;
            let conv = v.converged;
            Outcome::ok(json!({ "kind": "block-product", "summary": s, "ratio": s.ratio(), "approximation": v }), d)
                .converged(conv)
        }
        ApproxKind::Lambda => {
            let (n, r, x) = (need(a.n, "n")?, need(a.r, "r")?, need(a.x, "x")?);
            let c = lambda_condition(alpha, n, r, x)?;
            dump = Some((n, r, x, alpha));
            let mut o = Outcome::ok(json!({ "kind": "lambda", "n": n, "r": r, "x": x, "coefficients": c }), d);
            if !c.tail_ok {
                o.exit = EXIT_INCONCLUSIVE;
            }
            o.converged(c.converged)
        }
        ApproxKind::T2 => {
            let x = need(a.x, "x")?;
            let (h, r) = if a.zero_h {
                let n = need(a.n, "n")?;
                (PerturbationH::new(Matrix::zeros(n, n))?, need(a.r, "r")?)
            } else if has_matrix(&a.matrix) {
                let m = a.matrix.load()?;
                d = Some(digest(m.matrix()));
                PerturbationH::from_matrix(&m)?
            } else {
                return Err(CliError::Usage("t2 needs a matrix or --zero-h".into()));
            };
            let n = h.n();
            let t = taylor_t2(alpha, n, r, x, &h)?;
            dump = Some((n, r, x, alpha));
            let conv = t.converged;
            Outcome::ok(json!({ "kind": "t2", "n": n, "r": r, "x": x, "taylor": t }), d).converged(conv)
        }
        ApproxKind::NormalCoeffs => {
            let (z, r, n) = (need(a.z, "z")?, need(a.r, "r")?, need(a.n, "n")?);
            let c = normal_case_coefficients(z, r, n)?;
            dump = Some((n, r, z * z / 2.0, shape(0.5)?));
            let conv = c.converged;
            Outcome::ok(json!({ "kind": "normal-coeffs", "n": n, "r": r, "z": z, "coefficients": c }), d).converged(conv)
        }
    };
    if let Some(path) = &a.dump_integrand {
        let (n, r, x, al) = dump.ok_or_else(|| CliError::Usage("--dump-integrand applies to lambda, t2 and normal-coeffs".into()))?;
        let rows = lambda_integrand(al, n, r, x, a.y_max, a.points)?;
        let header = vec![
            format!("lambda integrand alpha {} n {n} r {r} x {x}", al.alpha()),
            "columns: y integrand".to_string(),
        ];
        write_atomic(path, &plot_data(&header, &rows))?;
    }
    Ok(out)
}

#[derive(Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
}

pub fn decompose_cmd(a: &DecomposeArgs) -> Result<Outcome, CliError> {
    let r = a.matrix.load()?;
    let rep = decompose(&r)?;
    let one = detect_one_factorial(&r);
    let kind = match (&one, rep.m()) {
        (_, 0) => "independent",
        (Some(_), _) => "one-factorial",
        (None, _) => "generic",
    };
    let results = json!({
        "kind": kind,
        "m": rep.m(),
        "d": rep.d(),
        "a": rep.a().to_rows(),
        "one_factorial": one,
        "reconstruction_error": rep.reconstruction_error(&r),
        "min_eigenvalue": r.min_eigenvalue(),
    });
    Ok(Outcome::ok(results, Some(digest(r.matrix()))))
}
