//! Approximations around equicorrelated matrices.
//!
//! Everything here is built from one kernel: for mean correlation `r`,
//! `F(y) = G_α(x/(1−r), ry/(1−r))` is the conditional CDF of one coordinate
//! given the common factor, and `∫ F^n g_α dy` is the equicorrelated CDF.
//!
//! `f_k` is the `k`-th derivative in `x` of `G_{α+k}(x/(1−r), ry/(1−r))`,
//! chain-rule factor `(1−r)^{-k}` included. That reading reproduces the
//! closed normal-case coefficients at `α = ½`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::factorial::cdf_one_factorial_default;
use crate::linalg::{CorrMatrix, Matrix, Partition};
use crate::quadrature::{gamma_weighted, LegendreRule, DEFAULT_NODES, DOUBLING_TOL};
use crate::special::{erf, laguerre, ln_gamma, NoncentralAt, Shape};

/// Integrand magnitude at the far end (relative to its peak) above which a tail is flagged.
pub const TAIL_DECAY_TOL: f64 = 1e-10;

/// Block means of a partitioned correlation matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EquicorrelatedSummary {
    pub n1: usize,
    pub n2: usize,
    pub rbar1: f64,
    pub rbar2: f64,
    /// Mean of the squared cross-block correlations.
    pub rbar_sq: f64,
}

impl EquicorrelatedSummary {
    pub fn new(n1: usize, n2: usize, rbar1: f64, rbar2: f64, rbar_sq: f64) -> Result<Self> {
        if n1 < 2 || n2 < 2 {
            return Err(invalid(format!("both blocks need at least two coordinates, got {n1} and {n2}")));
        }
        for (name, v) in [("rbar1", rbar1), ("rbar2", rbar2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(rbar_sq >= 0.0) {
            return Err(invalid(format!("rbar_sq must be non-negative, got {rbar_sq}")));
        }
        Ok(EquicorrelatedSummary { n1, n2, rbar1, rbar2, rbar_sq })
    }

    pub fn from_matrix(r: &CorrMatrix, part: &Partition) -> Result<Self> {
        if part.n() != r.n() {
            return Err(invalid(format!("partition covers {} indices, matrix has {}", part.n(), r.n())));
        }
        let a = r.matrix();
        let (n1, n) = (part.n1(), r.n());
        let mean = |lo: usize, hi: usize| {
            let mut s = 0.0;
            let mut c = 0usize;
            for i in lo..hi {
                for j in (i + 1)..hi {
                    s += a[(i, j)];
                    c += 1;
                }
            }
            if c == 0 {
                f64::NAN
            } else {
                s / c as f64
            }
        };
        let mut sq = 0.0;
        for i in 0..n1 {
            for j in n1..n {
                sq += a[(i, j)] * a[(i, j)];
            }
        }
        Self::new(n1, n - n1, mean(0, n1), mean(n1, n), sq / (n1 * (n - n1)) as f64)
    }

    /// `r̄² / (r̄₁r̄₂)`.
    pub fn ratio(&self) -> f64 {
        self.rbar_sq / (self.rbar1 * self.rbar2)
    }
}

/// Deviations `h_ij = r_ij − r` from an equicorrelated centre.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationH {
    h: Matrix,
}

impl PerturbationH {
    /// Symmetrizes `h` and zeroes its diagonal.
    pub fn new(h: Matrix) -> Result<Self> {
        if !h.is_square() {
            return Err(invalid("perturbation must be square"));
        }
        let mut h = h.symmetrize();
        for i in 0..h.rows() {
            h[(i, i)] = 0.0;
        }
        Ok(PerturbationH { h })
    }

    /// `h_ij = r_ij − r` against the mean off-diagonal correlation; returns `(H, r)`.
    pub fn from_matrix(r: &CorrMatrix) -> Result<(Self, f64)> {
        let n = r.n();
        if n < 2 {
            return Err(invalid("need n >= 2"));
        }
        let a = r.matrix();
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += a[(i, j)];
            }
        }
        let mean = s / (n * (n - 1) / 2) as f64;
        let h = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { a[(i, j)] - mean });
        Ok((PerturbationH { h }, mean))
    }

    pub fn n(&self) -> usize {
        self.h.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.h
    }

    /// `Σ_{i<j} h_ij²`.
    pub fn h2(&self) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += self.h[(i, j)] * self.h[(i, j)];
            }
        }
        s
    }

    /// `Σ h_ij h_km` over pairs `i < j`, `k < m` with `{i, j} ∩ {k, m} = ∅`.
    ///
    /// Ordered over the two pairs, so each unordered couple of disjoint pairs
    /// appears twice; this is the weighting under which `T₂` matches the
    /// second-order expansion.
    pub fn h4(&self) -> f64 {
        let n = self.n();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        let mut s = 0.0;
        for &(i, j) in &pairs {
            for &(k, m) in &pairs {
                if i != k && i != m && j != k && j != m {
                    s += self.h[(i, j)] * self.h[(k, m)];
                }
            }
        }
        s
    }

    /// [`PerturbationH::h4`] from `S = Σ_{i<j} h_ij` and row sums `ρ_i`:
    /// `S² + H₂ − Σ ρ_i²`.
    pub fn h4_from_sums(&self) -> f64 {
        let n = self.n();
        let mut total = 0.0;
        let mut rows = 0.0;
        for i in 0..n {
            let mut rho = 0.0;
            for j in 0..n {
                if j != i {
                    rho += self.h[(i, j)];
                }
                if j > i {
                    total += self.h[(i, j)];
                }
            }
            rows += rho * rho;
        }
        total * total + self.h2() - rows
    }
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(invalid(format!("mean correlation must lie in (0, 1), got {r}")));
    }
    Ok(())
}

fn check_x(x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("x must be positive and finite, got {x}")));
    }
    Ok(())
}

/// `F`, `f₁`, `f₂` at one common-factor value.
struct Kernel {
    nc: NoncentralAt,
    r: f64,
}

impl Kernel {
    fn new(alpha: Shape, r: f64, x: f64) -> Kernel {
        Kernel { nc: NoncentralAt::build(alpha.alpha(), x / (1.0 - r)), r }
    }

    fn f(&mut self, y: f64) -> f64 {
        self.nc.cdf(self.r * y / (1.0 - self.r))
    }

    fn all(&mut self, y: f64) -> (f64, f64, f64) {
        let yp = self.r * y / (1.0 - self.r);
        let s = 1.0 / (1.0 - self.r);
        let big_f = self.nc.cdf(yp);
        let p1 = self.nc.pdf_shifted(yp, 1);
        let p2 = self.nc.pdf_shifted(yp, 2);
        // d/dx g_{a}(x) = g_{a-1}(x) - g_a(x)
        (big_f, s * p1, s * s * (p1 - p2))
    }
}

/// Value and convergence of one quadrature.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

fn gamma_integral(alpha: Shape, f: impl FnMut(f64) -> f64) -> Result<Integral> {
    let q = gamma_weighted(alpha.alpha(), DEFAULT_NODES, DOUBLING_TOL, f)?;
    Ok(Integral { value: q.value, error: q.error, converged: q.converged })
}

/// `∫ F^n g_α dy`, the CDF at `x·1` of the equicorrelated matrix with correlation `r`.
pub fn equicorrelated_cdf(alpha: Shape, n: usize, r: f64, x: f64) -> Result<Integral> {
    check_r(r)?;
    check_x(x)?;
    let mut k = Kernel::new(alpha, r, x);
    gamma_integral(alpha, |y| k.f(y).powi(n as i32))
}

/// `Γ(α)k!/Γ(α+k) ∫ F^{n_i} L_k^{(α−1)} g_α dy`.
pub fn ck_integral(x: f64, alpha: Shape, ni: usize, rbar: f64, k: usize) -> Result<Integral> {
    check_r(rbar)?;
    check_x(x)?;
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let a = alpha.alpha();
    let norm = (ln_gamma(a) + ln_gamma(k as f64 + 1.0) - ln_gamma(a + k as f64)).exp();
    let mut kern = Kernel::new(alpha, rbar, x);
    let q = gamma_integral(alpha, |y| kern.f(y).powi(ni as i32) * laguerre(k, a - 1.0, y))?;
    Ok(Integral { value: norm * q.value, error: norm * q.error, converged: q.converged })
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockApproximation {
    pub value: f64,
    /// Product of the two equicorrelated block CDFs.
    pub head: f64,
    /// Correction terms for `k = 1, …, kmax`.
    pub terms: Vec<f64>,
    pub last_term: f64,
    /// Accumulated quadrature error estimate; truncation is measured by `last_term`.
    pub error: f64,
    pub converged: bool,
}

/// Product of the block CDFs plus the Laguerre correction series up to `kmax`.
pub fn approx_equicorrelated_product(
    x: f64,
    alpha: Shape,
    summary: &EquicorrelatedSummary,
    kmax: usize,
) -> Result<BlockApproximation> {
    check_x(x)?;
    if kmax == 0 {
        return Err(invalid("kmax must be at least 1"));
    }
    let ratio = summary.ratio();
    if ratio > 1.0 {
        return Err(invalid(format!(
            "mean squared cross correlation {} exceeds rbar1 * rbar2 = {}",
            summary.rbar_sq,
            summary.rbar1 * summary.rbar2
        )));
    }
    let block = |ni: usize, r: f64| cdf_one_factorial_default(&vec![r.sqrt(); ni], alpha, &vec![x; ni]);
    let g1 = block(summary.n1, summary.rbar1)?;
    let g2 = block(summary.n2, summary.rbar2)?;
    let mut converged = g1.converged && g2.converged;
    let head = g1.value * g2.value;
    let mut error = g1.error * g2.value + g2.error * g1.value;
    let a = alpha.alpha();
    let mut terms = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let kf = k as f64;
        let weight = (ln_gamma(a + kf) - ln_gamma(a) - ln_gamma(kf + 1.0)).exp();
        let c1 = ck_integral(x, alpha, summary.n1, summary.rbar1, k)?;
        let c2 = ck_integral(x, alpha, summary.n2, summary.rbar2, k)?;
        converged &= c1.converged && c2.converged;
        let w = weight * ratio.powi(k as i32);
        error += w * (c1.error * c2.value.abs() + c2.error * c1.value.abs());
        terms.push(w * c1.value * c2.value);
    }
    let value = head + terms.iter().sum::<f64>();
    Ok(BlockApproximation { value, head, last_term: *terms.last().unwrap_or(&0.0), terms, error, converged })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LambdaCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `c₁ + (n−4)c₂ − (n−3)c₃`.
    pub lambda: f64,
    /// Quadrature error estimates of `c₁, c₂, c₃`.
    pub errors: [f64; 3],
    /// Propagated error estimate of `lambda`.
    pub lambda_error: f64,
    pub positive: bool,
    pub converged: bool,
    /// False when an integrand did not decay at the far end of the range.
    pub tail_ok: bool,
}

impl LambdaCoefficients {
    fn assemble(n: usize, c: [Integral; 3], tail_ok: bool) -> Self {
        let nf = n as f64;
        let lambda = c[0].value + (nf - 4.0) * c[1].value - (nf - 3.0) * c[2].value;
        let lambda_error = c[0].error + (nf - 4.0).abs() * c[1].error + (nf - 3.0) * c[2].error;
        LambdaCoefficients {
            c1: c[0].value,
            c2: c[1].value,
            c3: c[2].value,
            lambda,
            errors: [c[0].error, c[1].error, c[2].error],
            lambda_error,
            positive: lambda > 0.0,
            converged: c.iter().all(|q| q.converged),
            tail_ok,
        }
    }
}

/// `F^p` that stays finite for negative `p` when `F` underflows.
///
/// Returns 0 when the companion factor already vanishes.
fn safe_pow(f: f64, p: i32, companion: f64) -> f64 {
    if p >= 0 {
        f.powi(p)
    } else if companion == 0.0 {
        0.0
    } else if f > 0.0 {
        f.powi(p)
    } else {
        f64::INFINITY
    }
}

/// The three integrands, without the weight `g_α`.
fn lambda_parts(k: &mut Kernel, alpha: f64, n: usize, y: f64) -> [f64; 3] {
    let r = k.r;
    let (big_f, f1, f2) = k.all(y);
    let d = 2.0 * r * y * f2 - f1;
    let n = n as i32;
    let c1 = ((alpha - 0.5) * f1 * f1 + 0.5 * d * d) * safe_pow(big_f, n - 2, f1 + d);
    let c2 = r * y * f1 * f1 * d * safe_pow(big_f, n - 3, f1);
    let c3 = 2.0 * r * r * y * y * f1.powi(4) * safe_pow(big_f, n - 4, f1);
    [c1, c2, c3]
}

/// `c₁, c₂, c₃` and `λ(α, n, r, x)`.
pub fn lambda_condition(alpha: Shape, n: usize, r: f64, x: f64) -> Result<LambdaCoefficients> {
    if n < 3 {
        return Err(invalid(format!("need n >= 3, got {n}")));
    }
    check_r(r)?;
    check_x(x)?;
    let a = alpha.alpha();
    let mut out = [Integral { value: 0.0, error: 0.0, converged: true }; 3];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut k = Kernel::new(alpha, r, x);
        *slot = gamma_integral(alpha, |y| lambda_parts(&mut k, a, n, y)[i])?;
    }
    let tail_ok = out.iter().all(|q| q.value.is_finite()) && tail_decays(alpha, n, r, x);
    Ok(LambdaCoefficients::assemble(n, out, tail_ok))
}

/// Checks that the weighted integrands at the far end are negligible next to their peak.
fn tail_decays(alpha: Shape, n: usize, r: f64, x: f64) -> bool {
    let a = alpha.alpha();
    let mut k = Kernel::new(alpha, r, x);
    let weight = |y: f64| ((a - 1.0) * y.ln() - y - ln_gamma(a)).exp();
    let mut peak = [0.0f64; 3];
    let mut far = [0.0f64; 3];
    let far_y = 40.0 + 4.0 * a;
    for step in 1..=400 {
        let y = step as f64 * far_y / 400.0;
        let p = lambda_parts(&mut k, a, n, y);
        for i in 0..3 {
            let v = (p[i] * weight(y)).abs();
            if !v.is_finite() {
                return false;
            }
            peak[i] = peak[i].max(v);
            if step == 400 {
                far[i] = v;
            }
        }
    }
    (0..3).all(|i| far[i] <= TAIL_DECAY_TOL * peak[i].max(f64::MIN_POSITIVE))
}

/// Pointwise `[c₁ + (n−4)c₂ − (n−3)c₃]` integrand times `g_α`, on `points` values of `(0, y_max]`.
pub fn lambda_integrand(alpha: Shape, n: usize, r: f64, x: f64, y_max: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    if n < 3 {
        return Err(invalid(format!("need n >= 3, got {n}")));
    }
    check_r(r)?;
    check_x(x)?;
    if !(y_max > 0.0) || points == 0 {
        return Err(invalid("need y_max > 0 and at least one point"));
    }
    let a = alpha.alpha();
    let nf = n as f64;
    let mut k = Kernel::new(alpha, r, x);
    Ok((1..=points)
        .map(|i| {
            let y = y_max * i as f64 / points as f64;
            let p = lambda_parts(&mut k, a, n, y);
            let g = ((a - 1.0) * y.ln() - y - ln_gamma(a)).exp();
            (y, (p[0] + (nf - 4.0) * p[1] - (nf - 3.0) * p[2]) * g)
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct TaylorT2 {
    pub value: f64,
    /// `∫ F^n g_α dy`, the value at `H = O`.
    pub base: f64,
    pub h2: f64,
    pub h4: f64,
    pub coefficients: LambdaCoefficients,
    /// Quadrature error estimate; the third-order remainder is not included.
    pub error: f64,
    pub converged: bool,
}

/// `∫F^n g_α dy + (c₁ − c₂)H₂ + (c₃ − c₂)H₄`.
pub fn taylor_t2(alpha: Shape, n: usize, r: f64, x: f64, h: &PerturbationH) -> Result<TaylorT2> {
    if h.n() != n {
        return Err(invalid(format!("perturbation has dimension {}, expected {n}", h.n())));
    }
    let c = lambda_condition(alpha, n, r, x)?;
    let base = equicorrelated_cdf(alpha, n, r, x)?;
    let (h2, h4) = (h.h2(), h.h4());
    let value = base.value + (c.c1 - c.c2) * h2 + (c.c3 - c.c2) * h4;
    let [e1, e2, e3] = c.errors;
    let error = base.error + (e1 + e2) * h2 + (e3 + e2) * h4.abs();
    Ok(TaylorT2 { value, base: base.value, h2, h4, error, converged: c.converged && base.converged, coefficients: c })
}

/// Panel count of the first pass; doubled once for the convergence check.
const NORMAL_PANELS: usize = 64;

/// `∫₀^U exp(ℓ(u)) du` by composite Gauss–Legendre, `ℓ` a log-integrand
/// returning `(log |value|, sign)`.
fn log_integral(ell: impl Fn(f64) -> (f64, f64), upper: f64) -> Integral {
    let rule = LegendreRule::new(20);
    let f = |u: f64| {
        let (l, s) = ell(u);
        if l == f64::NEG_INFINITY {
            0.0
        } else {
            s * l.exp()
        }
    };
    let coarse = rule.composite(0.0, upper, NORMAL_PANELS, f);
    let fine = rule.composite(0.0, upper, 2 * NORMAL_PANELS, f);
    let error = (fine - coarse).abs();
    Integral { value: fine, error, converged: error <= DOUBLING_TOL && fine.is_finite() }
}

/// `ln |a e^{t} − b e^{−t}|` and its sign, stable for large `t > 0`.
fn ln_exp_diff(a: f64, b: f64, t: f64) -> (f64, f64) {
    let v = a - b * (-2.0 * t).exp();
    if v == 0.0 {
        (f64::NEG_INFINITY, 0.0)
    } else {
        (t + v.abs().ln(), v.signum())
    }
}

/// `c₁, c₂, c₃` for `P(max |Z_j| ≤ z)` under equicorrelated `N(0, R)`, from the erf/sinh/cosh forms.
pub fn normal_case_coefficients(z: f64, r: f64, n: usize) -> Result<LambdaCoefficients> {
    if n < 4 {
        return Err(invalid(format!("need n >= 4, got {n}")));
    }
    check_r(r)?;
    check_x(z)?;
    use std::f64::consts::PI;
    let q = 1.0 - r;
    let sr = r.sqrt();
    let a = sr * z / q;
    let s2 = (2.0 * q).sqrt();
    let ln_f = |u: f64| {
        let f = 0.5 * (erf((z + sr * u) / s2) + erf((z - sr * u) / s2));
        if f > 0.0 {
            f.ln()
        } else {
            f64::NEG_INFINITY
        }
    };
    // ln S = ln ½ + ln(e^{au} − e^{−au}); y√r S − zC = ½[(y√r − z)e^{au} − (y√r + z)e^{−au}]
    let ln_s = |u: f64| {
        let (l, s) = ln_exp_diff(1.0, 1.0, a * u);
        (l - std::f64::consts::LN_2, s)
    };
    let ln_d = |u: f64| {
        let (l, s) = ln_exp_diff(u * sr - z, u * sr + z, a * u);
        (l - std::f64::consts::LN_2, s)
    };
    let nf = n as f64;
    // the weights are Gaussian in u; beyond this the log-integrand is far below -700
    let upper = {
        let b = (1.0 + r) / (2.0 * q);
        let grow = 4.0 * a;
        grow / b + (750.0 / b).sqrt() + 1.0
    };
    let i1 = log_integral(
        |u| {
            let (ld, _) = ln_d(u);
            (-(2.0 * z * z + (1.0 + r) * u * u) / (2.0 * q) + 2.0 * ld + (nf - 2.0) * ln_f(u), 1.0)
        },
        upper,
    );
    let i2 = log_integral(
        |u| {
            let (ld, sd) = ln_d(u);
            let (ls, _) = ln_s(u);
            (-(3.0 * z * z + (1.0 + 2.0 * r) * u * u) / (2.0 * q) + ld + 2.0 * ls + (nf - 3.0) * ln_f(u), sd)
        },
        upper,
    );
    let i3 = log_integral(
        |u| {
            let (ls, _) = ln_s(u);
            (-(4.0 * z * z + (1.0 + 3.0 * r) * u * u) / (2.0 * q) + 4.0 * ls + (nf - 4.0) * ln_f(u), 1.0)
        },
        upper,
    );
    let k1 = PI.powf(-1.5) * 2f64.sqrt() * q.powi(-3);
    let k2 = 2.0 * PI.powi(-2) * q.powf(-2.5);
    let k3 = 2f64.powf(1.5) * PI.powf(-2.5) * q.powi(-2);
    let scale = |i: Integral, k: f64| Integral { value: k * i.value, error: k * i.error, converged: i.converged };
    Ok(LambdaCoefficients::assemble(n, [scale(i1, k1), scale(i2, k2), scale(i3, k3)], true))
}
