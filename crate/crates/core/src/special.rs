//! Scalar kernels: log-gamma, gamma density and CDF, shifted-shape CDF
//! sequences, the Poisson-mixture non-central gamma law, generalized
//! Laguerre polynomials and the error function.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape parameter `α > 0`; `ν = 2α` is the degree of freedom.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Shape(f64);

impl Shape {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 {
            Ok(Shape(alpha))
        } else {
            Err(Error::Domain(format!("shape parameter must be positive and finite, got {alpha}")))
        }
    }

    /// From the degree of freedom `ν = 2α`.
    pub fn from_dof(nu: f64) -> Result<Self> {
        Shape::new(nu / 2.0)
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    pub fn nu(self) -> f64 {
        2.0 * self.0
    }

    /// `ν` as an integer when `2α ∈ ℕ`.
    pub fn integer_dof(self) -> Option<u32> {
        let nu = self.nu();
        let r = nu.round();
        ((nu - r).abs() < 1e-12 && r >= 1.0).then_some(r as u32)
    }

    pub fn shifted(self, k: f64) -> Shape {
        Shape(self.0 + k)
    }
}

impl TryFrom<f64> for Shape {
    type Error = Error;

    fn try_from(alpha: f64) -> Result<Self> {
        Shape::new(alpha)
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma `P(a, x)` for `a > 0`, `x ≥ 0`.
pub(crate) fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..100_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (sum * log_prefix.exp()).min(1.0)
    } else {
        1.0 - upper_gamma_cf(a, x, log_prefix)
    }
}

/// Regularized upper incomplete gamma `Q(a, x)` by modified Lentz.
fn upper_gamma_cf(a: f64, x: f64, log_prefix: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..100_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (log_prefix.exp() * h).clamp(0.0, 1.0)
}

/// Gamma density `g_α(x) = e^{-x} x^{α-1} / Γ(α)`.
pub fn gamma_pdf(alpha: Shape, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("gamma density needs x > 0, got {x}")));
    }
    Ok(gamma_pdf_unchecked(alpha.alpha(), x))
}

#[inline]
pub(crate) fn gamma_pdf_unchecked(a: f64, x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    ((a - 1.0) * x.ln() - x - ln_gamma(a)).exp()
}

/// Gamma CDF `G_α(x) = P(α, x)`.
pub fn gamma_cdf(alpha: Shape, x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::Domain(format!("gamma CDF needs x >= 0, got {x}")));
    }
    Ok(reg_lower_gamma(alpha.alpha(), x))
}

/// `G_{α+k}(x)` and `g_{α+k}(x)` for `k = 0, …, kmax` at a fixed `x`.
///
/// The top CDF entry is evaluated directly; lower entries follow from
/// `G_{β}(x) = G_{β+1}(x) + g_{β+1}(x)`, which only adds positive terms.
#[derive(Clone, Debug)]
pub struct ShiftedGamma {
    alpha: f64,
    x: f64,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
}

impl ShiftedGamma {
    pub fn new(alpha: Shape, x: f64, kmax: usize) -> Result<Self> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::Domain(format!("shifted gamma sequence needs x >= 0, got {x}")));
        }
        Ok(Self::build(alpha.alpha(), x, kmax))
    }

    pub(crate) fn build(a: f64, x: f64, kmax: usize) -> Self {
        let len = kmax + 1;
        if x == 0.0 {
            // g_β(0) is infinite for β < 1, 1 at β = 1 and 0 above.
            let pdf = (0..len)
                .map(|k| {
                    let b = a + k as f64;
                    if b < 1.0 {
                        f64::INFINITY
                    } else if b == 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            return ShiftedGamma { alpha: a, x, cdf: vec![0.0; len], pdf };
        }
        if x.is_infinite() {
            return ShiftedGamma { alpha: a, x, cdf: vec![1.0; len], pdf: vec![0.0; len] };
        }
        let lnx = x.ln();
        // t[k] = g_{a+k+1}(x) = x^{a+k} e^{-x} / Γ(a+k+1)
        let mut log_t = a * lnx - x - ln_gamma(a + 1.0);
        let mut t = Vec::with_capacity(len);
        for k in 0..len {
            if k > 0 {
                log_t += lnx - (a + k as f64).ln();
            }
            t.push(log_t.exp());
        }
        let mut cdf = vec![0.0; len];
        cdf[kmax] = reg_lower_gamma(a + kmax as f64, x);
        for k in (0..kmax).rev() {
            cdf[k] = (cdf[k + 1] + t[k]).min(1.0);
        }
        let mut pdf = Vec::with_capacity(len);
        pdf.push(gamma_pdf_unchecked(a, x));
        pdf.extend_from_slice(&t[..kmax]);
        ShiftedGamma { alpha: a, x, cdf, pdf }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn kmax(&self) -> usize {
        self.cdf.len() - 1
    }

    /// `G_{α+k}(x)` for `k = 0, …, kmax`.
    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// `g_{α+k}(x)` for `k = 0, …, kmax`.
    pub fn pdf(&self) -> &[f64] {
        &self.pdf
    }

    fn ensure(&mut self, kmax: usize) {
        if kmax > self.kmax() {
            let grow = (kmax + 1).max(2 * self.cdf.len()) - 1;
            *self = Self::build(self.alpha, self.x, grow);
        }
    }
}

/// `[G_α(x), G_{α+1}(x), …, G_{α+kmax}(x)]`.
pub fn gamma_cdf_shifted_seq(alpha: Shape, x: f64, kmax: usize) -> Result<Vec<f64>> {
    Ok(ShiftedGamma::new(alpha, x, kmax)?.cdf)
}

/// Non-centrality `y ≥ 0` together with the shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoncentralParams {
    pub alpha: Shape,
    pub y: f64,
}

impl NoncentralParams {
    pub fn new(alpha: Shape, y: f64) -> Result<Self> {
        if !(y >= 0.0) || !y.is_finite() {
            return Err(Error::Domain(format!("non-centrality must be finite and >= 0, got {y}")));
        }
        Ok(NoncentralParams { alpha, y })
    }
}

/// Truncation bound for the Poisson-weight tail.
pub const POISSON_TAIL: f64 = 1e-14;

/// Poisson(y) weights `e^{-y} y^k / k!` for `k = 0, …, k*`, where the
/// neglected mass `P(N > k*)` is below [`POISSON_TAIL`].
pub(crate) fn poisson_weights(y: f64) -> Vec<f64> {
    if y == 0.0 {
        return vec![1.0];
    }
    let mut kstar = ((y.ceil() + 10.0 * (y + 1.0).sqrt()).ceil() as usize).max(30);
    while reg_lower_gamma(kstar as f64 + 1.0, y) >= POISSON_TAIL {
        kstar += 10;
    }
    let lny = y.ln();
    let mut lw = -y;
    let mut w = Vec::with_capacity(kstar + 1);
    w.push(lw.exp());
    for k in 1..=kstar {
        lw += lny - (k as f64).ln();
        w.push(lw.exp());
    }
    w
}

/// Non-central gamma evaluations at a fixed `x` and shape, reused across
/// many non-centralities (quadrature nodes, Monte Carlo draws).
#[derive(Clone, Debug)]
pub struct NoncentralAt {
    seq: ShiftedGamma,
}

impl NoncentralAt {
    pub fn new(alpha: Shape, x: f64) -> Result<Self> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::Domain(format!("non-central gamma needs x >= 0, got {x}")));
        }
        Ok(Self::build(alpha.alpha(), x))
    }

    pub(crate) fn build(a: f64, x: f64) -> Self {
        NoncentralAt { seq: ShiftedGamma::build(a, x, 64) }
    }

    /// `G_α(x, y)`.
    pub fn cdf(&mut self, y: f64) -> f64 {
        if self.seq.x == 0.0 {
            return 0.0;
        }
        let w = poisson_weights(y);
        self.seq.ensure(w.len() - 1);
        let s: f64 = w.iter().zip(&self.seq.cdf).map(|(w, g)| w * g).sum();
        s.clamp(0.0, 1.0)
    }

    /// `g_{α+shift}(x, y) = Σ_k w_k g_{α+shift+k}(x)`.
    pub fn pdf_shifted(&mut self, y: f64, shift: usize) -> f64 {
        let w = poisson_weights(y);
        self.seq.ensure(w.len() - 1 + shift);
        w.iter().zip(&self.seq.pdf[shift..]).map(|(w, g)| w * g).sum()
    }

    /// `g_α(x, y)`.
    pub fn pdf(&mut self, y: f64) -> f64 {
        self.pdf_shifted(y, 0)
    }
}

/// `G_α(x, y) = e^{-y} Σ_k G_{α+k}(x) y^k / k!`.
pub fn noncentral_gamma_cdf(params: NoncentralParams, x: f64) -> Result<f64> {
    Ok(NoncentralAt::new(params.alpha, x)?.cdf(params.y))
}

/// `g_α(x, y) = e^{-y} Σ_k g_{α+k}(x) y^k / k!`.
pub fn noncentral_gamma_pdf(params: NoncentralParams, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("non-central gamma density needs x > 0, got {x}")));
    }
    Ok(NoncentralAt::new(params.alpha, x)?.pdf(params.y))
}

/// Generalized Laguerre polynomial `L_k^{(β)}(y)` by the three-term recurrence.
pub fn laguerre(k: usize, beta: f64, y: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 1.0 + beta - y;
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + beta - y) * cur - (jf + beta) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `L_0^{(β)}(y), …, L_kmax^{(β)}(y)`.
pub fn laguerre_all(kmax: usize, beta: f64, y: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(1.0);
    if kmax == 0 {
        return out;
    }
    out.push(1.0 + beta - y);
    for j in 1..kmax {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + beta - y) * out[j] - (jf + beta) * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

/// Error function.
///
/// Maclaurin series below |x| = 2, continued fraction for `erfc` above.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let v = if ax < 2.0 {
        let x2 = ax * ax;
        let mut term = ax;
        let mut sum = ax;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x2 / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum * 2.0 / PI.sqrt()
    } else if ax > 6.0 {
        1.0
    } else {
        1.0 - erfc_cf(ax)
    };
    v.copysign(x)
}

/// `erfc(x)` for `x ≥ 2`: `e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))`.
fn erfc_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    // Lentz on b0 + a1/(b1 + a2/(b2 + ...)), b_k = x, a_k = k/2
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = c * d;
        f *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(a: f64) -> Shape {
        Shape::new(a).unwrap()
    }

    #[test]
    fn shape_validation() {
        assert!(Shape::new(0.0).is_err());
        assert!(Shape::new(f64::NAN).is_err());
        assert_eq!(shape(0.5).integer_dof(), Some(1));
        assert_eq!(shape(1.25).integer_dof(), None);
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362880f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.1) - 2.252_712_651_734_206).abs() < 1e-13);
    }

    #[test]
    fn pdf_examples() {
        assert!((gamma_pdf(shape(1.0), 1.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!((gamma_pdf(shape(1.0), 0.5).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        // Γ(2.5) = 3√π/4
        let g25 = 0.75 * PI.sqrt();
        let expected = (-3f64).exp() * 3f64.powf(1.5) / g25;
        assert!((gamma_pdf(shape(2.5), 3.0).unwrap() - expected).abs() < 1e-14);
        assert!(gamma_pdf(shape(1.0), 0.0).is_err());
        assert!(gamma_pdf(shape(1.0), -1.0).is_err());
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(gamma_cdf(shape(3.0), 0.0).unwrap(), 0.0);
        assert!((gamma_cdf(shape(1.0), 2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        assert!((gamma_cdf(shape(0.5), 0.5).unwrap() - 0.682_689_492_137_085_9).abs() < 1e-14);
        assert!(gamma_cdf(shape(1.0), -0.1).is_err());
        // continued-fraction branch
        assert!((gamma_cdf(shape(1.0), 5.0).unwrap() - (1.0 - (-5f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn shifted_sequence_examples() {
        assert!(gamma_cdf_shifted_seq(shape(0.7), 0.0, 5).unwrap().iter().all(|&v| v == 0.0));
        let e = (-1f64).exp();
        let s = gamma_cdf_shifted_seq(shape(1.0), 1.0, 1).unwrap();
        assert!((s[0] - (1.0 - e)).abs() < 1e-15);
        assert!((s[1] - (1.0 - 2.0 * e)).abs() < 1e-15);
        let s = gamma_cdf_shifted_seq(shape(0.7), 2.0, 40).unwrap();
        for (k, v) in s.iter().enumerate() {
            let direct = gamma_cdf(shape(0.7 + k as f64), 2.0).unwrap();
            assert!((v - direct).abs() < 1e-12, "k = {k}");
        }
        assert!(s.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn shifted_sequence_small_x_does_not_underflow_to_zero() {
        let s = ShiftedGamma::new(shape(0.5), 1e-3, 150).unwrap();
        let direct = gamma_cdf(shape(0.5), 1e-3).unwrap();
        assert!((s.cdf()[0] - direct).abs() < 1e-15);
        assert!((s.pdf()[0] - gamma_pdf(shape(0.5), 1e-3).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn noncentral_reduces_to_central() {
        let p = NoncentralParams::new(shape(1.3), 0.0).unwrap();
        assert!((noncentral_gamma_cdf(p, 2.0).unwrap() - gamma_cdf(shape(1.3), 2.0).unwrap()).abs() < 1e-15);
        assert_eq!(noncentral_gamma_cdf(NoncentralParams::new(shape(1.3), 2.0).unwrap(), 0.0).unwrap(), 0.0);
        let pdf = noncentral_gamma_pdf(p, 2.0).unwrap();
        assert!((pdf - gamma_pdf(shape(1.3), 2.0).unwrap()).abs() < 1e-15);
        assert!(NoncentralParams::new(shape(1.0), -1.0).is_err());
    }

    #[test]
    fn noncentral_pdf_direct_sum() {
        // α = 1: g_{1+k}(x) = x^k e^{-x} / k!
        let p = NoncentralParams::new(shape(1.0), 1.0).unwrap();
        let x = 1.0f64;
        let mut direct = 0.0;
        let mut fact = 1.0f64;
        for k in 0..200 {
            if k > 0 {
                fact *= k as f64;
            }
            direct += x.powi(k) / (fact * fact);
        }
        direct *= (-2f64).exp();
        assert!((noncentral_gamma_pdf(p, x).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn laguerre_examples() {
        assert_eq!(laguerre(0, 0.3, 7.0), 1.0);
        assert!((laguerre(1, 0.5, 2.0) - (1.0 + 0.5 - 2.0)).abs() < 1e-15);
        // L_2^{(β)}(y) = ((y² - 2(β+2)y + (β+1)(β+2))/2
        let (b, y) = (0.5f64, 2.0f64);
        let l2 = (y * y - 2.0 * (b + 2.0) * y + (b + 1.0) * (b + 2.0)) / 2.0;
        assert!((laguerre(2, b, y) - l2).abs() < 1e-14);
        // monomial sum Σ_i (-1)^i C(k+β, k-i) y^i / i!
        let k = 5;
        let binom = |top: f64, m: usize| -> f64 { (0..m).fold(1.0, |acc, j| acc * (top - j as f64) / (j as f64 + 1.0)) };
        let mut mono = 0.0;
        let mut fact = 1.0;
        for i in 0..=k {
            if i > 0 {
                fact *= i as f64;
            }
            mono += (-1f64).powi(i as i32) * binom(k as f64 + b, k - i) * y.powi(i as i32) / fact;
        }
        assert!((laguerre(k, b, y) - mono).abs() < 1e-13);
        let all = laguerre_all(6, b, y);
        assert!((all[5] - laguerre(5, b, y)).abs() < 1e-15);
    }

    #[test]
    fn erf_examples() {
        assert_eq!(erf(0.0), 0.0);
        assert_eq!(erf(7.0), 1.0);
        assert!((1.0 - erf(6.0)).abs() < 1e-16);
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert!((erf(-0.3) + erf(0.3)).abs() < 1e-17);
        assert!((erf(2.5) - 0.999_593_047_982_555).abs() < 1e-15);
        assert!((erf(1.999_999) - erf(2.000_001)).abs() < 1e-7);
    }
}
