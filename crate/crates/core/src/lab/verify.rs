//! Numerical checks of the four τ-path monotonicity results.
//!
//! A report never claims a result is false. Margins or grid steps that fall
//! outside their error brackets give [`Status::Inconclusive`].

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::factorial::{cdf_mixture_mc, decompose, FactorialRepr};
use crate::infdiv::{infdiv_check, Criterion};
use crate::linalg::{submatrix, sym_eigen, CorrMatrix, IndexSet, Matrix, Partition};
use crate::series::{
    cdf_from_table, choose_c, expand_adaptive, expand_adaptive_with_scale, expand_with_scale, mixed_partial_from_table,
    SeriesOptions,
};
use crate::special::{gamma_cdf, Shape};

use super::coefficients::{convex_hypotheses, path_coefficients};
use super::path::{tau_evaluate, TauPath};
use super::sampler::mc_lower_orthant;

/// Slack added to series brackets for floating-point summation error.
pub const ROUNDOFF: f64 = 1e-12;
/// Monte Carlo brackets are this many standard errors wide on each side.
pub const MC_SIGMAS: f64 = 3.0;
/// Relative floor of the derivative-identity tolerance.
pub const IDENTITY_REL_TOL: f64 = 1e-4;
/// Proof coefficients below this count as negative.
pub const COEFFICIENT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Series,
    Mixture,
    Mc,
    All,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "series" => Ok(Method::Series),
            "mixture" => Ok(Method::Mixture),
            "mc" => Ok(Method::Mc),
            "all" => Ok(Method::All),
            _ => Err(invalid(format!("unknown method {s:?}; expected series, mixture, mc or all"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Series => "series",
            Method::Mixture => "mixture",
            Method::Mc => "mc",
            Method::All => "all",
        })
    }
}

/// `{0, 0.01, 0.1, 0.2, …, 0.9, 0.99, 1}`.
pub fn default_tau_grid() -> Vec<f64> {
    let mut g = vec![0.0, 0.01];
    g.extend((1..10).map(|i| i as f64 / 10.0));
    g.extend([0.99, 1.0]);
    g
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub method: Method,
    pub series: SeriesOptions,
    /// Draws per grid point for the Monte Carlo methods.
    pub samples: usize,
    pub seed: u64,
    pub tau_grid: Vec<f64>,
    /// Interior `τ` values where the derivative identity is checked.
    pub identity_points: Vec<f64>,
    pub fd_step: f64,
    pub derivative: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            method: Method::Series,
            series: SeriesOptions::default(),
            samples: 100_000,
            seed: 0,
            tau_grid: default_tau_grid(),
            identity_points: vec![0.3, 0.7],
            fd_step: 1e-4,
            derivative: true,
        }
    }
}

/// Data for one of the four results.
#[derive(Clone, Debug)]
pub enum TheoremInput {
    /// Block scaling of `R₁₂`.
    Thm1 { r: CorrMatrix, part: Partition },
    /// Block scaling of the last row and column; needs inf. div. `R`.
    Thm2 { r: CorrMatrix },
    /// Block scaling with `R = D + AAᵗ` and `R₂₂ = D_B + BBᵗ`; decompositions
    /// left out are computed.
    Thm3 { r: CorrMatrix, part: Partition, repr: Option<FactorialRepr>, r22_repr: Option<FactorialRepr> },
    /// Convex path `R₀ → R`.
    Thm4 { r0: CorrMatrix, r: CorrMatrix },
}

impl TheoremInput {
    pub fn theorem(&self) -> u8 {
        match self {
            TheoremInput::Thm1 { .. } => 1,
            TheoremInput::Thm2 { .. } => 2,
            TheoremInput::Thm3 { .. } => 3,
            TheoremInput::Thm4 { .. } => 4,
        }
    }

    fn target(&self) -> &CorrMatrix {
        match self {
            TheoremInput::Thm1 { r, .. }
            | TheoremInput::Thm2 { r }
            | TheoremInput::Thm3 { r, .. }
            | TheoremInput::Thm4 { r, .. } => r,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Inconclusive,
    HypothesisFailure,
    Unconverged,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

fn check(name: &str, holds: bool, detail: impl Into<String>) -> HypothesisCheck {
    HypothesisCheck { name: name.to_string(), holds, detail: detail.into() }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurvePoint {
    pub tau: f64,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Curve {
    pub method: Method,
    pub points: Vec<CurvePoint>,
    /// `min_i (upper_{i+1} − lower_i)`; non-negative means nondecreasing within brackets.
    pub worst_step: f64,
    pub monotone: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Margin {
    pub name: String,
    pub method: Method,
    pub value: f64,
    pub error: f64,
    pub holds: bool,
    /// Whether the shape parameter is in the range where the inequality is asserted.
    pub asserted: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub kind: String,
    pub tau: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub theorem: u8,
    pub status: Status,
    pub pass: bool,
    pub digest: String,
    pub alpha: f64,
    pub x: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub hypotheses: Vec<HypothesisCheck>,
    /// False when the path values are only known to be functions with the
    /// right Laplace transform, not distribution functions.
    pub probabilistic: bool,
    pub curves: Vec<Curve>,
    pub margins: Vec<Margin>,
    pub identities: Vec<IdentityCheck>,
    pub min_coefficient: Option<f64>,
    pub seed: u64,
    pub samples: usize,
    pub notes: Vec<String>,
}

/// One evaluated value with its bracket.
#[derive(Clone, Copy, Debug)]
struct Point {
    value: f64,
    lower: f64,
    upper: f64,
    converged: bool,
}

impl Point {
    fn exact(v: f64) -> Point {
        Point { value: v, lower: v - ROUNDOFF, upper: v + ROUNDOFF, converged: true }
    }
}

/// Path-specific factor data for the mixture method.
#[derive(Clone, Debug)]
enum MixtureSource {
    /// Decompose each `R_τ` from scratch.
    Generic,
    /// `A_τ = [[A₁, O], [τA₂, (1−τ²)^{1/2} B]]`, `D_τ = D₁ ⊕ (τ²D₂ + (1−τ²)D_B)`.
    Explicit { n1: usize, d: Vec<f64>, a: Matrix, db: Vec<f64>, b: Matrix },
}

impl MixtureSource {
    fn repr(&self, r: &CorrMatrix, tau: f64) -> Result<FactorialRepr> {
        match self {
            MixtureSource::Generic => decompose(r),
            MixtureSource::Explicit { n1, d, a, db, b } => {
                let n = d.len();
                let (m, k) = (a.cols(), b.cols());
                let t2 = tau * tau;
                let s = (1.0 - t2).max(0.0).sqrt();
                let dt: Vec<f64> =
                    (0..n).map(|i| if i < *n1 { d[i] } else { t2 * d[i] + (1.0 - t2) * db[i - n1] }).collect();
                let at = Matrix::from_fn(n, m + k, |i, j| match (i < *n1, j < m) {
                    (true, true) => a[(i, j)],
                    (true, false) => 0.0,
                    (false, true) => tau * a[(i, j)],
                    (false, false) => s * b[(i - n1, j - m)],
                });
                FactorialRepr::from_parts(dt, at)
            }
        }
    }
}

struct Evaluator<'a> {
    alpha: Shape,
    opts: &'a VerifyOptions,
    mixture: MixtureSource,
}

impl Evaluator<'_> {
    fn eval(&self, method: Method, r: &CorrMatrix, x: &[f64], tau: f64) -> Result<Point> {
        if r.n() == 1 {
            return Ok(Point::exact(gamma_cdf(self.alpha, x[0])?));
        }
        match method {
            Method::Series => {
                let t = expand_adaptive(r, self.alpha, &self.opts.series)?;
                let v = cdf_from_table(&t, x)?;
                let (lower, upper) = if v.rigorous {
                    (v.value - ROUNDOFF, v.value + v.error + ROUNDOFF)
                } else {
                    (v.value - v.error - ROUNDOFF, v.value + v.error + ROUNDOFF)
                };
                Ok(Point { value: v.value, lower, upper, converged: v.converged })
            }
            Method::Mixture => {
                let repr = self.mixture.repr(r, tau)?;
                let e = cdf_mixture_mc(&repr, self.alpha, x, self.opts.samples, self.opts.seed)?;
                Ok(mc_point(e.value, e.std_error))
            }
            Method::Mc => {
                let nu = self.alpha.integer_dof().ok_or_else(|| invalid("direct sampling needs an integer 2 alpha"))?;
                let e = mc_lower_orthant(r, nu, x, self.opts.samples, self.opts.seed)?;
                Ok(mc_point(e.value, e.std_error))
            }
            Method::All => Err(invalid("evaluate one method at a time")),
        }
    }

    /// Block marginal: the mixture uses a fresh decomposition.
    fn eval_marginal(&self, method: Method, r: &CorrMatrix, x: &[f64]) -> Result<Point> {
        let generic = Evaluator { alpha: self.alpha, opts: self.opts, mixture: MixtureSource::Generic };
        generic.eval(method, r, x, 1.0)
    }
}

fn mc_point(value: f64, se: f64) -> Point {
    Point { value, lower: value - MC_SIGMAS * se, upper: value + MC_SIGMAS * se, converged: true }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn digest(input: &TheoremInput, alpha: Shape, x: &[f64], opts: &VerifyOptions) -> String {
    let mut buf = vec![input.theorem()];
    let mut put = |v: f64| buf.extend_from_slice(&v.to_le_bytes());
    let mats: Vec<&CorrMatrix> = match input {
        TheoremInput::Thm4 { r0, r } => vec![r0, r],
        _ => vec![input.target()],
    };
    for m in mats {
        put(m.n() as f64);
        m.matrix().as_slice().iter().for_each(|&v| put(v));
    }
    if let TheoremInput::Thm1 { part, .. } | TheoremInput::Thm3 { part, .. } = input {
        put(part.n1() as f64);
    }
    put(alpha.alpha());
    x.iter().for_each(|&v| put(v));
    opts.tau_grid.iter().for_each(|&v| put(v));
    put(opts.seed as f64);
    put(opts.samples as f64);
    buf.extend_from_slice(opts.method.to_string().as_bytes());
    format!("{:016x}", fnv1a(&buf))
}

fn integer_dof(alpha: Shape) -> bool {
    alpha.integer_dof().is_some()
}

fn shape_check(alpha: Shape, bound: f64, label: &str) -> HypothesisCheck {
    let nu = alpha.nu();
    let holds = integer_dof(alpha) || nu > bound;
    check("shape", holds, format!("2 alpha = {nu}; needs an integer or a value above {bound} ({label})"))
}

fn numeric_rank(a: &Matrix) -> usize {
    if a.rows() == 0 || a.cols() == 0 {
        return 0;
    }
    let g = a.transpose().matmul(a);
    match sym_eigen(&g) {
        Ok(e) => {
            let top = e.max().max(0.0);
            e.values.iter().filter(|&&v| v > 1e-20f64.max(1e-20 * top)).count()
        }
        Err(_) => 0,
    }
}

struct Setup {
    path: TauPath,
    part: Option<Partition>,
    hypotheses: Vec<HypothesisCheck>,
    probabilistic: bool,
    inequality_asserted: bool,
    mixture: MixtureSource,
    notes: Vec<String>,
}

fn setup(input: &TheoremInput, alpha: Shape) -> Result<Setup> {
    let mut notes = Vec::new();
    let nu = alpha.nu();
    match input {
        TheoremInput::Thm1 { r, part } => {
            let n = r.n();
            let r12 = submatrix(r.matrix(), &part.first(), &part.second())?;
            let shape = shape_check(alpha, n as f64 - 2.0, "n - 2");
            let probabilistic = shape.holds;
            let hyps = vec![shape, check("cross-block", r12.max_abs() > 0.0, format!("max |R12| = {}", r12.max_abs()))];
            Ok(Setup {
                path: TauPath::block_scale(r.clone(), *part)?,
                part: Some(*part),
                hypotheses: hyps,
                probabilistic,
                inequality_asserted: true,
                mixture: MixtureSource::Generic,
                notes,
            })
        }
        TheoremInput::Thm2 { r } => {
            let n = r.n();
            if n < 2 {
                return Err(invalid("the last-coordinate path needs n >= 2"));
            }
            let part = Partition::new(n, n - 1)?;
            let rep = infdiv_check(r, &[Criterion::Griffiths, Criterion::Bapat])?;
            let last = r.matrix().row(n - 1)[..n - 1].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let hyps = vec![
                check("infinitely-divisible", rep.verdict, format!("griffiths {:?}, bapat {:?}", rep.griffiths, rep.bapat)),
                check("last-column", last > 0.0, format!("max |r_jn| = {last}")),
            ];
            Ok(Setup {
                path: TauPath::block_scale(r.clone(), part)?,
                part: Some(part),
                probabilistic: rep.verdict,
                hypotheses: hyps,
                inequality_asserted: true,
                mixture: MixtureSource::Generic,
                notes,
            })
        }
        TheoremInput::Thm3 { r, part, repr, r22_repr } => {
            let n = r.n();
            let repr = match repr {
                Some(p) => p.clone(),
                None => decompose(r)?,
            };
            let r22 = r.marginal(&part.second())?;
            let r22_repr = match r22_repr {
                Some(p) => p.clone(),
                None => decompose(&r22)?,
            };
            let (m, k, n2) = (repr.m(), r22_repr.m(), part.n2());
            let r12 = submatrix(r.matrix(), &part.first(), &part.second())?;
            let lo = 0f64.max(((m + k) as f64 - 3.0).min(n as f64 - 4.0));
            let ineq = (m as f64 - 1.0).max(((m + k) as f64 - 3.0).min(n as f64 - 4.0));
            let rec_a = repr.reconstruction_error(r);
            let rec_b = r22_repr.reconstruction_error(&r22);
            let mut hyps = vec![
                check("dimension", n >= 4, format!("n = {n}")),
                check("cross-block", numeric_rank(&r12) > 0, format!("rank R12 = {}", numeric_rank(&r12))),
                check("factor-rank", m >= 1 && m + 2 <= n, format!("m = {m}, needs 1 <= m <= n - 2")),
                check("block-factor-rank", k <= m.min(n2.saturating_sub(1)), format!("k = {k}, needs k <= min(m, n2 - 1)")),
                check(
                    "reconstruction",
                    rec_a <= crate::factorial::RECONSTRUCTION_TOL && rec_b <= crate::factorial::RECONSTRUCTION_TOL,
                    format!("max errors {rec_a:.2e} and {rec_b:.2e}"),
                ),
            ];
            hyps.push(shape_check(alpha, lo, "max(0, min(m + k - 3, n - 4))"));
            let inequality_asserted = integer_dof(alpha) || nu > ineq;
            if !inequality_asserted {
                notes.push(format!(
                    "2 alpha = {nu} is at or below max(m - 1, min(m + k - 3, n - 4)) = {ineq}; the block-product margin is reported but not asserted"
                ));
            }
            let explicit = k + m < n;
            let probabilistic = integer_dof(alpha) || nu > n as f64 - 2.0 || (explicit && nu > (m + k) as f64 - 1.0);
            if !probabilistic {
                notes.push("intermediate path values are functions with the stated Laplace transform, not known to be distribution functions".into());
            }
            let mixture = if explicit {
                MixtureSource::Explicit {
                    n1: part.n1(),
                    d: repr.d().to_vec(),
                    a: repr.a().clone(),
                    db: r22_repr.d().to_vec(),
                    b: r22_repr.a().clone(),
                }
            } else {
                notes.push(format!("k = {k} > n - m - 1; the mixture decomposes each path matrix with D = lambda_min I"));
                MixtureSource::Generic
            };
            Ok(Setup {
                path: TauPath::block_scale(r.clone(), *part)?,
                part: Some(*part),
                hypotheses: hyps,
                probabilistic,
                inequality_asserted,
                mixture,
                notes,
            })
        }
        TheoremInput::Thm4 { r0, r } => {
            let n = r.n();
            let h = convex_hypotheses(r0, r)?;
            if h.holds() && h.signature.signs().iter().any(|&s| s < 0) {
                notes.push(format!("conditions hold after conjugation by the signature {:?}", h.signature.signs()));
            }
            let shape = shape_check(alpha, n as f64 - 2.0, "n - 2");
            let probabilistic = shape.holds;
            let hyps = vec![
                check("base-positive", h.base_positive, "all off-diagonal r0_ij > 0"),
                check("base-inverse", h.base_inverse_nonpositive, "all off-diagonal elements of R0^-1 <= 0"),
                check("dominance", h.dominates, "R >= R0 off the diagonal, strictly somewhere"),
                shape,
            ];
            Ok(Setup {
                path: TauPath::convex(r0.clone(), r.clone())?,
                part: None,
                hypotheses: hyps,
                probabilistic,
                inequality_asserted: true,
                mixture: MixtureSource::Generic,
                notes,
            })
        }
    }
}

fn methods(requested: Method, alpha: Shape) -> Result<Vec<Method>> {
    match requested {
        Method::All => {
            let mut v = vec![Method::Series, Method::Mixture];
            if integer_dof(alpha) {
                v.push(Method::Mc);
            }
            Ok(v)
        }
        Method::Mc if !integer_dof(alpha) => Err(invalid("direct sampling needs an integer 2 alpha")),
        m => Ok(vec![m]),
    }
}

fn validate_inputs(n: usize, x: &[f64], opts: &VerifyOptions) -> Result<()> {
    if x.len() != n {
        return Err(invalid(format!("point has {} coordinates, matrix has dimension {n}", x.len())));
    }
    if let Some(v) = x.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("coordinates must be positive and finite, got {v}")));
    }
    if opts.tau_grid.is_empty() {
        return Err(invalid("tau grid is empty"));
    }
    if opts.tau_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(invalid("tau grid values must lie in [0, 1]"));
    }
    if opts.tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("tau grid must be strictly increasing"));
    }
    if !(opts.fd_step > 0.0 && opts.fd_step < 0.1) {
        return Err(invalid(format!("finite-difference step must lie in (0, 0.1), got {}", opts.fd_step)));
    }
    if opts.samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    Ok(())
}

fn curve(method: Method, tau: &[f64], pts: &[Point]) -> Curve {
    let points: Vec<CurvePoint> =
        tau.iter().zip(pts).map(|(&t, p)| CurvePoint { tau: t, value: p.value, lower: p.lower, upper: p.upper }).collect();
    let worst_step = pts.windows(2).map(|w| w[1].upper - w[0].lower).fold(f64::INFINITY, f64::min);
    Curve { method, points, worst_step, monotone: !(worst_step < 0.0) }
}

/// `G(x) − ∏ G(block)` with an interval error bound.
fn product_margin(name: &str, method: Method, full: Point, parts: &[Point], asserted: bool) -> Margin {
    let lo = parts.iter().map(|p| p.lower.max(0.0)).product::<f64>();
    let hi = parts.iter().map(|p| p.upper.min(1.0)).product::<f64>();
    let mid = parts.iter().map(|p| p.value).product::<f64>();
    let value = full.value - mid;
    let error = (value - (full.lower - hi)).max((full.upper - lo) - value).max(0.0);
    Margin { name: name.into(), method, value, error, holds: value >= -error, asserted }
}

/// `∂G_α/∂τ` by a Richardson-extrapolated centered difference against `Σ_M c_M ∂^M G_{α+1}`.
fn derivative_identity(
    path: &TauPath,
    alpha: Shape,
    x: &[f64],
    tau: f64,
    opts: &VerifyOptions,
    unconverged: &mut bool,
) -> Result<IdentityCheck> {
    let h = opts.fd_step;
    let stencil = [tau - 2.0 * h, tau - h, tau + h, tau + 2.0 * h];
    let mats: Vec<CorrMatrix> = stencil.iter().map(|&t| tau_evaluate(path, t)).collect::<Result<_>>()?;
    let center = tau_evaluate(path, tau)?;
    let mut c = choose_c(&center)?;
    for m in &mats {
        c = c.max(choose_c(m)?);
    }
    let base = expand_adaptive_with_scale(&center, alpha, c, &opts.series)?;
    *unconverged |= !base.converged();
    let k = base.max_degree();
    let g: Vec<f64> = mats
        .iter()
        .map(|m| Ok(cdf_from_table(&expand_with_scale(m, alpha, c, k)?, x)?.value))
        .collect::<Result<_>>()?;
    let d_h = (g[2] - g[1]) / (2.0 * h);
    let d_2h = (g[3] - g[0]) / (4.0 * h);
    let lhs = (4.0 * d_h - d_2h) / 3.0;
    let trunc = (d_h - d_2h).abs() / 3.0;

    let up = alpha.shifted(1.0);
    let table = expand_adaptive(&center, up, &opts.series)?;
    *unconverged |= !table.converged();
    let mut rhs = 0.0;
    for (set, cm) in path_coefficients(path, alpha, tau)? {
        if cm != 0.0 {
            rhs += cm * mixed_partial_from_table(&table, x, &set)?;
        }
    }
    let residual = (lhs - rhs).abs();
    let tolerance = (IDENTITY_REL_TOL * lhs.abs()).max(trunc);
    Ok(IdentityCheck { kind: "derivative".into(), tau, lhs, rhs, residual, tolerance, holds: residual <= tolerance })
}

/// Evaluates the selected result along its path and checks monotonicity,
/// the endpoint inequality and, for the series method, the derivative identity.
pub fn verify_theorem(input: &TheoremInput, alpha: Shape, x: &[f64], opts: &VerifyOptions) -> Result<VerificationReport> {
    let r = input.target();
    let n = r.n();
    validate_inputs(n, x, opts)?;
    let Setup { path, part, hypotheses, probabilistic, inequality_asserted, mixture, mut notes } = setup(input, alpha)?;
    let methods = methods(opts.method, alpha)?;
    let ev = Evaluator { alpha, opts, mixture };
    let grid = &opts.tau_grid;

    let mut curves = Vec::new();
    let mut unconverged = false;
    let mut primary: Option<Method> = None;
    for &method in &methods {
        let pts: Result<Vec<Point>> =
            grid.par_iter().map(|&t| ev.eval(method, &tau_evaluate(&path, t)?, x, t)).collect();
        match pts {
            Ok(pts) => {
                unconverged |= pts.iter().any(|p| !p.converged);
                curves.push(curve(method, grid, &pts));
                primary.get_or_insert(method);
            }
            Err(e) if opts.method == Method::All && method != Method::Series => {
                notes.push(format!("{method} skipped: {e}"));
            }
            Err(e) => return Err(e),
        }
    }
    let primary = primary.ok_or_else(|| invalid("no evaluation method applies"))?;

    let mut margins = Vec::new();
    let mut identities = Vec::new();
    let full = ev.eval(primary, r, x, 1.0)?;
    match (&path, part) {
        (TauPath::BlockScale { .. }, Some(part)) => {
            let (s1, s2) = (part.first(), part.second());
            let pick = |s: &IndexSet| s.members().iter().map(|&i| x[i]).collect::<Vec<f64>>();
            let p1 = ev.eval_marginal(primary, &r.marginal(&s1)?, &pick(&s1))?;
            let p2 = ev.eval_marginal(primary, &r.marginal(&s2)?, &pick(&s2))?;
            unconverged |= !(full.converged && p1.converged && p2.converged);
            let name = if input.theorem() == 2 { "last-coordinate-product" } else { "block-product" };
            margins.push(product_margin(name, primary, full, &[p1, p2], inequality_asserted));
            let zero = ev.eval(primary, &tau_evaluate(&path, 0.0)?, x, 0.0)?;
            let m = product_margin("endpoint", primary, zero, &[p1, p2], true);
            identities.push(IdentityCheck {
                kind: "endpoint-factorization".into(),
                tau: 0.0,
                lhs: zero.value,
                rhs: zero.value - m.value,
                residual: m.value.abs(),
                tolerance: m.error,
                holds: m.value.abs() <= m.error,
            });
        }
        (TauPath::Convex { r0, .. }, _) => {
            let base = ev.eval(primary, r0, x, 0.0)?;
            unconverged |= !(full.converged && base.converged);
            margins.push(product_margin("endpoint-increase", primary, full, &[base], true));
        }
        _ => {}
    }

    if opts.derivative && methods.contains(&Method::Series) {
        for &t in &opts.identity_points {
            if t - 2.0 * opts.fd_step < 0.0 || t + 2.0 * opts.fd_step > 1.0 {
                notes.push(format!("identity point {t} too close to the ends of [0, 1]; skipped"));
                continue;
            }
            identities.push(derivative_identity(&path, alpha, x, t, opts, &mut unconverged)?);
        }
    }

    let interior: Vec<f64> = grid.iter().copied().filter(|&t| t > 0.0 && t < 1.0).collect();
    let mins: Vec<f64> = interior
        .par_iter()
        .map(|&t| Ok(path_coefficients(&path, alpha, t)?.iter().map(|c| c.1).fold(f64::INFINITY, f64::min)))
        .collect::<Result<_>>()?;
    let min_coefficient = mins.into_iter().reduce(f64::min);

    let hypotheses_hold = hypotheses.iter().all(|h| h.holds);
    let confirmed = curves.iter().all(|c| c.monotone)
        && margins.iter().filter(|m| m.asserted).all(|m| m.holds)
        && identities.iter().all(|i| i.holds)
        && min_coefficient.is_none_or(|m| m >= -COEFFICIENT_TOL);
    let status = if !hypotheses_hold {
        Status::HypothesisFailure
    } else if unconverged {
        Status::Unconverged
    } else if confirmed {
        Status::Pass
    } else {
        notes.push("some check is numerically indistinguishable from a violation; no falsification is claimed".into());
        Status::Inconclusive
    };

    Ok(VerificationReport {
        theorem: input.theorem(),
        status,
        pass: status == Status::Pass,
        digest: digest(input, alpha, x, opts),
        alpha: alpha.alpha(),
        x: x.to_vec(),
        tau_grid: grid.clone(),
        hypotheses,
        probabilistic,
        curves,
        margins,
        identities,
        min_coefficient,
        seed: opts.seed,
        samples: opts.samples,
        notes,
    })
}
