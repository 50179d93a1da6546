//! Series expansion of the `Γₙ(α, R)` CDF into products of univariate gamma CDFs.
//!
//! With `Q` a rescaled `R⁻¹` and `Q̂ = Q − I`, the CDF is
//! `Σ_k q(α; k) ∏_j G_{α+k_j}(s_j x_j)` where the `q` are the power-series
//! coefficients of `|Q|^α det(I + Q̂Z)^{-α}` in the diagonal entries of `Z`.
//!
//! The coefficients are produced from the multi-affine expansion
//! `det(I + Q̂Z) = Σ_M det(Q̂_M) z^M` through the Euler-operator recursion
//! `d·E_d = −Σ_m ((d − m) + αm) D_m E_{d−m}` on homogeneous parts. The
//! trace-power route in [`poly`] computes the same numbers independently.

mod graded;
pub mod poly;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::infdiv;
use crate::linalg::{det, sym_eigen, CorrMatrix, IndexSet, Matrix};
use crate::special::{Shape, ShiftedGamma};
use graded::{Graded, MonomialIter};

pub use poly::{exp_series, trace_powers, MultiIndex, TruncatedPolynomial};

/// Default `c` margin over the lower bound.
pub const DEFAULT_MARGIN: f64 = 1.05;
/// Default target for the tail mass.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default cap on the total degree.
pub const DEFAULT_MAX_DEGREE: usize = 120;
/// Hard cap on the total degree.
pub const DEGREE_LIMIT: usize = 200;
/// Coefficients with smaller magnitude are dropped.
pub const PRUNE: f64 = 1e-18;
/// Coefficients above `-NONNEG_TOL` count as non-negative.
pub const NONNEG_TOL: f64 = 1e-12;
/// Largest supported dimension.
pub const MAX_DIM: usize = 8;
/// Default bound on the number of stored coefficients.
pub const DEFAULT_MAX_TERMS: usize = 40_000_000;

/// Which rescaling of `R⁻¹` is expanded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `Q = c⁻¹R⁻¹`, all scales equal to `c`.
    UniformC,
    /// `q_ij = r^ij / √(r^ii r^jj)`, scales `r^jj`.
    NormalizedQ,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-c" | "uniform" | "series" => Ok(Variant::UniformC),
            "normalized-q" | "normalized" | "series-q" => Ok(Variant::NormalizedQ),
            _ => Err(invalid(format!("unknown series variant {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub variant: Variant,
    pub margin: f64,
    pub tol: f64,
    pub initial_degree: usize,
    pub max_degree: usize,
    pub max_terms: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            variant: Variant::UniformC,
            margin: DEFAULT_MARGIN,
            tol: DEFAULT_TOL,
            initial_degree: 8,
            max_degree: DEFAULT_MAX_DEGREE,
            max_terms: DEFAULT_MAX_TERMS,
        }
    }
}

impl SeriesOptions {
    pub fn with_variant(variant: Variant) -> Self {
        SeriesOptions { variant, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.margin > 1.0) || !self.margin.is_finite() {
            return Err(invalid(format!("margin must exceed 1, got {}", self.margin)));
        }
        if !(self.tol > 0.0) {
            return Err(invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_degree > DEGREE_LIMIT {
            return Err(invalid(format!("max degree {} above limit {DEGREE_LIMIT}", self.max_degree)));
        }
        Ok(())
    }
}

/// `c = margin · max(max_j r^jj, 1/(2λ_min))`.
pub fn choose_c_with_margin(r: &CorrMatrix, margin: f64) -> Result<f64> {
    if !(margin > 1.0) {
        return Err(invalid(format!("margin must exceed 1, got {margin}")));
    }
    let inv = r.inverse()?;
    let max_diag = inv.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(margin * max_diag.max(0.5 / r.min_eigenvalue()))
}

pub fn choose_c(r: &CorrMatrix) -> Result<f64> {
    choose_c_with_margin(r, DEFAULT_MARGIN)
}

fn spectral_norm(a: &Matrix) -> Result<f64> {
    let e = sym_eigen(a)?;
    Ok(e.max().abs().max(e.min().abs()))
}

/// How the uniform scale is picked.
#[derive(Clone, Copy, Debug)]
enum Scale {
    Margin(f64),
    Fixed(f64),
}

/// `Q̂`, scales and `|Q|` for one variant.
fn rescale(r: &CorrMatrix, variant: Variant, scale: Scale) -> Result<(Matrix, Vec<f64>, Option<f64>, f64)> {
    let n = r.n();
    let inv = r.inverse()?;
    let det_inv = 1.0 / r.det()?;
    match variant {
        Variant::UniformC => {
            let c = match scale {
                Scale::Margin(m) => choose_c_with_margin(r, m)?,
                Scale::Fixed(c) => {
                    let lower = choose_c_with_margin(r, 1.0 + f64::EPSILON)?;
                    if !(c >= lower) || !c.is_finite() {
                        return Err(invalid(format!("scale {c} is below the admissible bound {lower}")));
                    }
                    c
                }
            };
            let qhat = Matrix::from_fn(n, n, |i, j| inv[(i, j)] / c - if i == j { 1.0 } else { 0.0 });
            let det_q = det_inv / c.powi(n as i32);
            Ok((qhat, vec![c; n], Some(c), det_q))
        }
        Variant::NormalizedQ => {
            let d = inv.diagonal();
            let qhat = Matrix::from_fn(n, n, |i, j| {
                if i == j {
                    0.0
                } else {
                    inv[(i, j)] / (d[i] * d[j]).sqrt()
                }
            });
            let det_q = det_inv / d.iter().product::<f64>();
            Ok((qhat, d, None, det_q))
        }
    }
}

/// Coefficients `q(α; k)` up to a total degree, with truncation metadata.
#[derive(Clone, Debug)]
pub struct CoeffTable {
    n: usize,
    alpha: Shape,
    variant: Variant,
    c: Option<f64>,
    scale: Vec<f64>,
    qhat: Matrix,
    qhat_norm: f64,
    det_q: f64,
    /// `degrees[d]` holds the degree-`d` coefficients in graded rank order.
    degrees: Vec<Vec<f64>>,
    graded: Graded,
    tail_mass: f64,
    min_coefficient: f64,
    stored: usize,
    converged: bool,
    inf_div: bool,
    tol: f64,
}

/// Serializable description of a table without the coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub n: usize,
    pub alpha: f64,
    pub variant: Variant,
    pub c: Option<f64>,
    pub scale: Vec<f64>,
    pub qhat_norm: f64,
    pub max_degree: usize,
    pub stored_coefficients: usize,
    pub tail_mass: f64,
    pub min_coefficient: f64,
    pub converged: bool,
    pub infinitely_divisible: bool,
    pub nonnegative: bool,
}

/// Series value with its truncation bracket.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfValue {
    pub value: f64,
    /// Upper bound on the omitted mass; a guarantee only when `rigorous`.
    pub error: f64,
    pub rigorous: bool,
    pub converged: bool,
}

impl CdfValue {
    /// Interval containing the true value when `rigorous` holds.
    pub fn bracket(&self) -> (f64, f64) {
        (self.value, (self.value + self.error).min(1.0))
    }
}

struct Builder {
    n: usize,
    alpha: f64,
    /// `det(Q̂_M)` indexed by bit mask.
    minors: Vec<f64>,
    graded: Graded,
    degrees: Vec<Vec<f64>>,
    sum: Neumaier,
    min_coefficient: f64,
    stored: usize,
}

#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Builder {
    fn new(qhat: &Matrix, alpha: f64, det_q: f64) -> Result<Self> {
        let n = qhat.rows();
        let mut minors = vec![0.0; 1 << n];
        minors[0] = 1.0;
        for (mask, slot) in minors.iter_mut().enumerate().skip(1) {
            let m = IndexSet::from_mask(mask as u64);
            let sub = crate::linalg::principal(qhat, &m)?;
            *slot = det(&sub)?;
        }
        let e0 = det_q.powf(alpha);
        let mut sum = Neumaier::default();
        sum.add(e0);
        Ok(Builder {
            n,
            alpha,
            minors,
            graded: Graded::new(n, 16),
            degrees: vec![vec![e0]],
            sum,
            min_coefficient: e0,
            stored: 1,
        })
    }

    fn degree(&self) -> usize {
        self.degrees.len() - 1
    }

    fn terms_through(&mut self, k: usize) -> usize {
        (0..=k).map(|d| self.graded.count(d)).sum()
    }

    fn extend_to(&mut self, k: usize) {
        let n = self.n;
        let mut weights = vec![0.0; self.minors.len()];
        while self.degree() < k {
            let d = self.degree() + 1;
            let len = self.graded.count(d);
            for (mask, w) in weights.iter_mut().enumerate() {
                let m = mask.count_ones() as usize;
                *w = if mask == 0 || m > d {
                    0.0
                } else {
                    ((d - m) as f64 + self.alpha * m as f64) * self.minors[mask]
                };
            }
            let mut out = Vec::with_capacity(len);
            let mut it = MonomialIter::new(n, d);
            while let Some(kvec) = it.next_monomial() {
                let mut supp = 0usize;
                for (i, &ki) in kvec.iter().enumerate() {
                    if ki > 0 {
                        supp |= 1 << i;
                    }
                }
                let s = it.prefix();
                let mut acc = 0.0;
                let mut sub = supp;
                while sub != 0 {
                    let w = weights[sub];
                    if w != 0.0 {
                        let m = sub.count_ones() as usize;
                        acc += w * self.degrees[d - m][self.graded.rank_minus(s, sub)];
                    }
                    sub = (sub - 1) & supp;
                }
                let mut v = -acc / d as f64;
                if v.abs() < PRUNE {
                    v = 0.0;
                } else {
                    self.stored += 1;
                    self.min_coefficient = self.min_coefficient.min(v);
                }
                self.sum.add(v);
                out.push(v);
            }
            self.degrees.push(out);
        }
    }
}

impl CoeffTable {
    fn assemble(
        r: &CorrMatrix,
        alpha: Shape,
        variant: Variant,
        scale: Scale,
        plan: impl FnOnce(&mut Builder) -> bool,
        tol: f64,
    ) -> Result<CoeffTable> {
        let n = r.n();
        if n == 0 || n > MAX_DIM {
            return Err(invalid(format!("dimension {n} outside 1..={MAX_DIM}")));
        }
        let (qhat, scale, c, det_q) = rescale(r, variant, scale)?;
        let qhat_norm = spectral_norm(&qhat)?;
        if qhat_norm >= 1.0 {
            return Err(Error::ConvergenceRisk { norm: qhat_norm });
        }
        let mut b = Builder::new(&qhat, alpha.alpha(), det_q)?;
        let converged = plan(&mut b);
        let tail_mass = 1.0 - b.sum.value();
        Ok(CoeffTable {
            n,
            alpha,
            variant,
            c,
            scale,
            qhat,
            qhat_norm,
            det_q,
            degrees: b.degrees,
            graded: b.graded,
            tail_mass,
            min_coefficient: b.min_coefficient,
            stored: b.stored,
            converged,
            inf_div: infdiv::is_infinitely_divisible(r),
            tol,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> Shape {
        self.alpha
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// The uniform scale `c`, if that variant was used.
    pub fn c(&self) -> Option<f64> {
        self.c
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn qhat(&self) -> &Matrix {
        &self.qhat
    }

    pub fn qhat_norm(&self) -> f64 {
        self.qhat_norm
    }

    /// `|Q|`, so that the degree-zero coefficient is `|Q|^α`.
    pub fn det_q(&self) -> f64 {
        self.det_q
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.len() - 1
    }

    /// `1 − Σ` stored coefficients.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn min_coefficient(&self) -> f64 {
        self.min_coefficient
    }

    /// Number of coefficients that survived pruning.
    pub fn len(&self) -> usize {
        self.stored
    }

    pub fn is_empty(&self) -> bool {
        self.stored == 0
    }

    /// Whether the tail mass dropped below the requested tolerance.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Whether `|I + RT|^{-1}` is infinitely divisible.
    pub fn infinitely_divisible(&self) -> bool {
        self.inf_div
    }

    pub fn nonnegative(&self) -> bool {
        self.min_coefficient >= -NONNEG_TOL
    }

    /// True when every coefficient, stored or not, is known to be non-negative.
    pub fn rigorous(&self) -> bool {
        self.inf_div && self.nonnegative()
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Coefficients of one total degree, in graded rank order.
    pub fn degree_slice(&self, d: usize) -> &[f64] {
        self.degrees.get(d).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn get(&self, k: &[u32]) -> f64 {
        if k.len() != self.n {
            return 0.0;
        }
        let d: usize = k.iter().map(|&v| v as usize).sum();
        match self.degrees.get(d) {
            Some(row) => row[self.graded.rank(k)],
            None => 0.0,
        }
    }

    /// Non-zero coefficients with their multi-indices, by degree.
    pub fn iter(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        self.degrees.iter().enumerate().flat_map(move |(d, row)| {
            let mut it = MonomialIter::new(self.n, d);
            let mut out = Vec::new();
            let mut idx = 0;
            while let Some(k) = it.next_monomial() {
                if row[idx] != 0.0 {
                    out.push((MultiIndex(k.to_vec()), row[idx]));
                }
                idx += 1;
            }
            out.into_iter()
        })
    }

    /// Sum of the degree-`d` coefficients.
    pub fn degree_mass(&self, d: usize) -> f64 {
        self.degree_slice(d).iter().sum()
    }

    pub fn summary(&self) -> TableSummary {
        TableSummary {
            n: self.n,
            alpha: self.alpha.alpha(),
            variant: self.variant,
            c: self.c,
            scale: self.scale.clone(),
            qhat_norm: self.qhat_norm,
            max_degree: self.max_degree(),
            stored_coefficients: self.stored,
            tail_mass: self.tail_mass,
            min_coefficient: self.min_coefficient,
            converged: self.converged,
            infinitely_divisible: self.inf_div,
            nonnegative: self.nonnegative(),
        }
    }

    /// `Σ_k q_k ∏_j f_j[k_j]`.
    fn contract(&self, factors: &[Vec<f64>]) -> f64 {
        let n = self.n;
        let mut total = Neumaier::default();
        for (d, row) in self.degrees.iter().enumerate() {
            let s = if n == 1 {
                row[0] * factors[0][d]
            } else {
                let mut pos = 0;
                contract_rec(row, &mut pos, factors, n - 1, d, 1.0)
            };
            total.add(s);
        }
        total.value()
    }
}

/// Walks one degree in rank order. `i` is the prefix sum being chosen and
/// `upper = s_{i+1}`, so `k_{i+1} = upper − s_i`.
fn contract_rec(row: &[f64], pos: &mut usize, f: &[Vec<f64>], i: usize, upper: usize, prefix: f64) -> f64 {
    let mut acc = 0.0;
    if i == 1 {
        let (f0, f1) = (&f[0], &f[1]);
        for s in 0..=upper {
            acc += row[*pos] * f1[upper - s] * f0[s];
            *pos += 1;
        }
        return acc * prefix;
    }
    for s in 0..=upper {
        let p = prefix * f[i][upper - s];
        acc += contract_rec(row, pos, f, i - 1, s, p);
    }
    acc
}

/// Coefficient table truncated at total degree `k`.
pub fn expand_coefficients(r: &CorrMatrix, alpha: Shape, variant: Variant, k: usize) -> Result<CoeffTable> {
    expand_coefficients_with_margin(r, alpha, variant, k, DEFAULT_MARGIN)
}

pub fn expand_coefficients_with_margin(
    r: &CorrMatrix,
    alpha: Shape,
    variant: Variant,
    k: usize,
    margin: f64,
) -> Result<CoeffTable> {
    if k > DEGREE_LIMIT {
        return Err(invalid(format!("degree {k} above limit {DEGREE_LIMIT}")));
    }
    CoeffTable::assemble(
        r,
        alpha,
        variant,
        Scale::Margin(margin),
        |b| {
            b.extend_to(k);
            1.0 - b.sum.value() < DEFAULT_TOL
        },
        DEFAULT_TOL,
    )
}

/// Uniform-c table with a caller-chosen `c` and degree `k`.
///
/// Tables sharing `c` and `k` are smooth in the entries of `R`, which is
/// what finite differences along a correlation path need.
pub fn expand_with_scale(r: &CorrMatrix, alpha: Shape, c: f64, k: usize) -> Result<CoeffTable> {
    if k > DEGREE_LIMIT {
        return Err(invalid(format!("degree {k} above limit {DEGREE_LIMIT}")));
    }
    CoeffTable::assemble(
        r,
        alpha,
        Variant::UniformC,
        Scale::Fixed(c),
        |b| {
            b.extend_to(k);
            1.0 - b.sum.value() < DEFAULT_TOL
        },
        DEFAULT_TOL,
    )
}

/// Doubles the degree from `initial_degree` until the tail mass is below `tol`.
///
/// Stops early when the next step would exceed `max_terms` coefficients;
/// the table is then marked unconverged.
pub fn expand_adaptive(r: &CorrMatrix, alpha: Shape, opts: &SeriesOptions) -> Result<CoeffTable> {
    opts.validate()?;
    CoeffTable::assemble(r, alpha, opts.variant, Scale::Margin(opts.margin), |b| doubling(b, opts), opts.tol)
}

/// Adaptive uniform-scale table with a caller-chosen `c`; `opts.variant` and `opts.margin` are ignored.
///
/// Tables that share `c` are smooth in `R`, which keeps finite differences across them clean.
pub fn expand_adaptive_with_scale(r: &CorrMatrix, alpha: Shape, c: f64, opts: &SeriesOptions) -> Result<CoeffTable> {
    opts.validate()?;
    CoeffTable::assemble(r, alpha, Variant::UniformC, Scale::Fixed(c), |b| doubling(b, opts), opts.tol)
}

fn doubling(b: &mut Builder, opts: &SeriesOptions) -> bool {
    let mut k = opts.initial_degree.clamp(1, opts.max_degree.max(1));
    loop {
        if b.terms_through(k) > opts.max_terms {
            return false;
        }
        b.extend_to(k);
        if 1.0 - b.sum.value() < opts.tol {
            return true;
        }
        if k >= opts.max_degree {
            return false;
        }
        k = (2 * k).min(opts.max_degree);
    }
}

fn check_point(table: &CoeffTable, x: &[f64]) -> Result<()> {
    if x.len() != table.n {
        return Err(invalid(format!("point has {} coordinates, table has dimension {}", x.len(), table.n)));
    }
    if let Some(v) = x.iter().find(|v| v.is_nan() || **v < 0.0) {
        return Err(Error::Domain(format!("coordinates must be non-negative, got {v}")));
    }
    Ok(())
}

/// `G_α(x; R) ≈ Σ_k q_k ∏_j G_{α+k_j}(s_j x_j)`.
pub fn cdf_from_table(table: &CoeffTable, x: &[f64]) -> Result<CdfValue> {
    check_point(table, x)?;
    let rigorous = table.rigorous();
    let error = table.tail_mass.max(0.0);
    if x.iter().any(|&v| v == 0.0) {
        return Ok(CdfValue { value: 0.0, error: 0.0, rigorous, converged: table.converged });
    }
    let k = table.max_degree();
    let a = table.alpha.alpha();
    let factors: Vec<Vec<f64>> = x
        .iter()
        .zip(&table.scale)
        .map(|(&xj, &sj)| ShiftedGamma::build(a, sj * xj, k).cdf().to_vec())
        .collect();
    let value = table.contract(&factors);
    Ok(CdfValue { value, error, rigorous, converged: table.converged })
}

/// `∏_{i∈M} ∂/∂x_i` of the series CDF, differentiated term by term.
pub fn mixed_partial_from_table(table: &CoeffTable, x: &[f64], m: &IndexSet) -> Result<f64> {
    check_point(table, x)?;
    if let Some(&i) = m.members().iter().find(|&&i| i >= table.n) {
        return Err(invalid(format!("index {i} outside dimension {}", table.n)));
    }
    if m.is_empty() {
        return Ok(cdf_from_table(table, x)?.value);
    }
    if let Some(&i) = m.members().iter().find(|&&i| x[i] <= 0.0 || !x[i].is_finite()) {
        return Err(Error::Domain(format!("coordinate {i} must be positive and finite, got {}", x[i])));
    }
    if x.iter().any(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let k = table.max_degree();
    let a = table.alpha.alpha();
    let factors: Vec<Vec<f64>> = (0..table.n)
        .map(|j| {
            let s = table.scale[j];
            let seq = ShiftedGamma::build(a, s * x[j], k);
            if m.contains(j) {
                seq.pdf().iter().map(|p| s * p).collect()
            } else {
                seq.cdf().to_vec()
            }
        })
        .collect();
    Ok(table.contract(&factors))
}

/// Adaptive table plus a single CDF evaluation.
pub fn series_cdf(r: &CorrMatrix, alpha: Shape, x: &[f64], opts: &SeriesOptions) -> Result<CdfValue> {
    let table = expand_adaptive(r, alpha, opts)?;
    cdf_from_table(&table, x)
}
