//! Factorial representations `R = D + AAᵗ` and the gamma mixture they induce.
//!
//! With `B = D^{-1/2}A` and `S` a `W(2α, I_m)` Wishart matrix, the CDF is
//! `E[∏_j G_α(x_j / d_j, ½ b_j S b_jᵗ)]` with non-central gamma factors.
//! One factor reduces this to a single gamma-weighted integral.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{sym_eigen, CorrMatrix, Matrix};
use crate::quadrature::{gamma_weighted, QuadResult, DEFAULT_NODES, DOUBLING_TOL};
use crate::rng::{batches, stream};
use crate::special::{gamma_cdf, NoncentralAt, Shape};

/// Entrywise tolerance for `D + AAᵗ = R`.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
/// Relative singular-value floor for the factor rank.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorialRepr {
    d: Vec<f64>,
    a: Matrix,
    b: Matrix,
}

impl FactorialRepr {
    /// Validates `D > 0` and full column rank of `A`.
    pub fn new(d: Vec<f64>, a: Matrix) -> Result<Self> {
        if a.rows() != d.len() {
            return Err(invalid(format!("D has {} entries, A has {} rows", d.len(), a.rows())));
        }
        if let Some(v) = d.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("diagonal part must be positive, got {v}")));
        }
        let m = a.cols();
        if m > 0 {
            let gram = a.transpose().matmul(&a);
            let e = sym_eigen(&gram)?;
            if e.min() <= (RANK_TOL * e.max().sqrt()).powi(2) {
                return Err(Error::Degenerate(format!("factor matrix does not have rank {m}")));
            }
        }
        let b = Matrix::from_fn(a.rows(), m, |i, k| a[(i, k)] / d[i].sqrt());
        Ok(FactorialRepr { d, a, b })
    }

    /// Like [`FactorialRepr::new`] without the rank check, for path
    /// representations whose blocks vanish at an endpoint.
    pub(crate) fn from_parts(d: Vec<f64>, a: Matrix) -> Result<Self> {
        if a.rows() != d.len() {
            return Err(invalid(format!("D has {} entries, A has {} rows", d.len(), a.rows())));
        }
        if let Some(v) = d.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("diagonal part must be positive, got {v}")));
        }
        let b = Matrix::from_fn(a.rows(), a.cols(), |i, k| a[(i, k)] / d[i].sqrt());
        Ok(FactorialRepr { d, a, b })
    }

    /// `d_j = 1 − a_j²`, `A = a`; `a = 0` gives the `m = 0` representation.
    pub fn from_one_factorial(a: &[f64]) -> Result<Self> {
        if let Some(v) = a.iter().find(|v| !(v.abs() < 1.0)) {
            return Err(invalid(format!("one-factorial loadings must lie in (-1, 1), got {v}")));
        }
        let d = a.iter().map(|v| 1.0 - v * v).collect();
        let cols = usize::from(a.iter().any(|&v| v != 0.0));
        Self::new(d, Matrix::from_fn(a.len(), cols, |i, _| a[i]))
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn m(&self) -> usize {
        self.a.cols()
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    /// `D^{-1/2} A`.
    pub fn b(&self) -> &Matrix {
        &self.b
    }

    /// `D + AAᵗ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.n();
        let mut r = self.a.matmul(&self.a.transpose());
        for i in 0..n {
            r[(i, i)] += self.d[i];
        }
        r
    }

    pub fn reconstruction_error(&self, r: &CorrMatrix) -> f64 {
        self.reconstruct().max_abs_diff(r.matrix())
    }
}

/// `a` with `r_ij = a_i a_j` for `i ≠ j` and `|a_i| < 1`, if it exists.
///
/// The first nonzero entry of the result is positive.
pub fn detect_one_factorial(r: &CorrMatrix) -> Option<Vec<f64>> {
    let n = r.n();
    let g = |i: usize, j: usize| r.get(i, j);
    let mut a: Vec<Option<f64>> = vec![None; n];
    match n {
        1 => return Some(vec![0.0]),
        2 => {
            let s = g(0, 1).abs().sqrt();
            return Some(vec![s, s.copysign(g(0, 1))]);
        }
        _ => {}
    }
    // squared loadings from triples
    for (i, slot) in a.iter_mut().enumerate() {
        let mut sum = 0.0;
        let mut count = 0usize;
        for j in 0..n {
            for k in j + 1..n {
                if j == i || k == i || g(j, k).abs() <= 1e-12 {
                    continue;
                }
                sum += g(i, j) * g(i, k) / g(j, k);
                count += 1;
            }
        }
        if count > 0 {
            let sq = sum / count as f64;
            if sq < -RECONSTRUCTION_TOL {
                return None;
            }
            *slot = Some(sq.max(0.0).sqrt());
        }
    }
    // signs relative to the first determined nonzero loading
    if let Some(p) = (0..n).find(|&i| a[i].is_some_and(|v| v > 1e-12)) {
        for i in 0..n {
            if i != p {
                if let Some(v) = a[i] {
                    a[i] = Some(v.copysign(g(p, i)));
                }
            }
        }
        for i in 0..n {
            if a[i].is_none() {
                a[i] = Some(g(p, i) / a[p].unwrap());
            }
        }
    }
    // anything left pairs only with undetermined indices
    let rest: Vec<usize> = (0..n).filter(|&i| a[i].is_none()).collect();
    for (idx, &i) in rest.iter().enumerate() {
        let partner = rest.iter().skip(idx + 1).find(|&&j| g(i, j).abs() > 1e-12);
        match partner {
            Some(&j) if a[j].is_none() => {
                let s = g(i, j).abs().sqrt();
                a[i] = Some(s);
                a[j] = Some(s.copysign(g(i, j)));
            }
            _ => {
                if a[i].is_none() {
                    a[i] = Some(0.0);
                }
            }
        }
    }
    let mut a: Vec<f64> = a.into_iter().map(|v| v.unwrap_or(0.0)).collect();
    if let Some(first) = a.iter().copied().find(|v| v.abs() > 1e-12) {
        if first < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let ok = (0..n).all(|i| a[i].abs() < 1.0 && (0..n).all(|j| i == j || (g(i, j) - a[i] * a[j]).abs() <= RECONSTRUCTION_TOL));
    ok.then_some(a)
}

/// `D = λ_min I` and `A` from the eigenvectors of `R − D`.
///
/// Columns with eigenvalue gap below `RANK_TOL` are dropped, so `m ≤ n − 1`.
pub fn generic_decomposition(r: &CorrMatrix) -> Result<FactorialRepr> {
    let n = r.n();
    let e = sym_eigen(r.matrix())?;
    let lambda = e.min();
    let keep: Vec<usize> = (0..n).filter(|&k| e.values[k] - lambda > RANK_TOL).collect();
    let a = Matrix::from_fn(n, keep.len(), |i, c| {
        let k = keep[c];
        e.vectors[(i, k)] * (e.values[k] - lambda).sqrt()
    });
    FactorialRepr::new(vec![lambda; n], a)
}

/// Preferred representation: one factor when it exists, else the eigenvalue split.
pub fn decompose(r: &CorrMatrix) -> Result<FactorialRepr> {
    match detect_one_factorial(r) {
        Some(a) => FactorialRepr::from_one_factorial(&a),
        None => generic_decomposition(r),
    }
}

/// `∫ ∏_j G_α(x_j/(1−a_j²), a_j² y/(1−a_j²)) g_α(y) dy` by Gauss–Laguerre with a doubling check.
pub fn cdf_one_factorial(a: &[f64], alpha: Shape, x: &[f64], quad_nodes: usize) -> Result<QuadResult> {
    if a.len() != x.len() {
        return Err(invalid(format!("{} loadings but {} coordinates", a.len(), x.len())));
    }
    if let Some(v) = a.iter().find(|v| !(v.abs() < 1.0)) {
        return Err(invalid(format!("one-factorial loadings must lie in (-1, 1), got {v}")));
    }
    if let Some(v) = x.iter().find(|v| v.is_nan() || **v < 0.0) {
        return Err(Error::Domain(format!("coordinates must be non-negative, got {v}")));
    }
    if x.iter().any(|&v| v == 0.0) {
        return Ok(QuadResult { value: 0.0, error: 0.0, converged: true });
    }
    if a.iter().all(|&v| v == 0.0) {
        let mut p = 1.0;
        for &xj in x {
            p *= gamma_cdf(alpha, xj)?;
        }
        return Ok(QuadResult { value: p, error: 0.0, converged: true });
    }
    let al = alpha.alpha();
    let mut nc: Vec<NoncentralAt> = a
        .iter()
        .zip(x)
        .map(|(&aj, &xj)| NoncentralAt::new(alpha, xj / (1.0 - aj * aj)))
        .collect::<Result<_>>()?;
    let ratio: Vec<f64> = a.iter().map(|&aj| aj * aj / (1.0 - aj * aj)).collect();
    gamma_weighted(al, quad_nodes.max(2), DOUBLING_TOL, |y| {
        nc.iter_mut().zip(&ratio).map(|(g, &c)| g.cdf(c * y)).product()
    })
}

pub fn cdf_one_factorial_default(a: &[f64], alpha: Shape, x: &[f64]) -> Result<QuadResult> {
    cdf_one_factorial(a, alpha, x, DEFAULT_NODES)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WishartSample {
    pub s: Matrix,
    pub dof: f64,
}

fn check_dof(dof: f64, m: usize) -> Result<Option<usize>> {
    let r = dof.round();
    if (dof - r).abs() < 1e-12 && r >= 1.0 {
        return Ok(Some(r as usize));
    }
    if !(dof > m as f64 - 1.0) {
        return Err(invalid(format!("non-integer degrees of freedom {dof} must exceed m - 1 = {}", m as f64 - 1.0)));
    }
    Ok(None)
}

/// `W(dof, I_m)`: a sum of outer products for integer `dof`, Bartlett otherwise.
pub fn sample_wishart<R: Rng + ?Sized>(dof: f64, m: usize, rng: &mut R) -> Result<WishartSample> {
    let s = match check_dof(dof, m)? {
        Some(k) => {
            let mut s = Matrix::zeros(m, m);
            let mut u = vec![0.0; m];
            for _ in 0..k {
                u.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                for i in 0..m {
                    for j in 0..m {
                        s[(i, j)] += u[i] * u[j];
                    }
                }
            }
            s
        }
        None => {
            let mut l = Matrix::zeros(m, m);
            for i in 0..m {
                let chi = ChiSquared::new(dof - i as f64).map_err(|e| invalid(e.to_string()))?;
                l[(i, i)] = chi.sample(rng).sqrt();
                for j in 0..i {
                    l[(i, j)] = rng.sample(StandardNormal);
                }
            }
            l.matmul(&l.transpose())
        }
    };
    Ok(WishartSample { s, dof })
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    pub(crate) fn from_sums(sum: f64, sum_sq: f64, n: usize) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        McEstimate { value: mean, std_error: (var / nf).sqrt(), samples: n }
    }
}

/// `E[∏_j G_α(x_j/d_j, ½ b_j S b_jᵗ)]` over Wishart draws `S ~ W(2α, I_m)`.
///
/// Draws are split into fixed batches, each with its own stream, and the
/// batch sums are combined in batch order.
pub fn cdf_mixture_mc(repr: &FactorialRepr, alpha: Shape, x: &[f64], n_samples: usize, seed: u64) -> Result<McEstimate> {
    let n = repr.n();
    let m = repr.m();
    if x.len() != n {
        return Err(invalid(format!("representation has dimension {n}, point has {}", x.len())));
    }
    if let Some(v) = x.iter().find(|v| v.is_nan() || **v < 0.0) {
        return Err(Error::Domain(format!("coordinates must be non-negative, got {v}")));
    }
    if n_samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let dof = alpha.nu();
    let integer = check_dof(dof, m)?;
    let al = alpha.alpha();
    let base: Vec<NoncentralAt> = x.iter().zip(repr.d()).map(|(&xj, &dj)| NoncentralAt::build(al, xj / dj)).collect();
    if m == 0 {
        let mut nc = base;
        let v: f64 = nc.iter_mut().map(|g| g.cdf(0.0)).product();
        return Ok(McEstimate { value: v, std_error: 0.0, samples: n_samples });
    }
    let b = repr.b();
    let parts: Vec<(f64, f64)> = batches(n_samples)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(id, _, len)| {
            let mut rng = stream(seed, id);
            let mut nc = base.clone();
            let mut y = vec![0.0; n];
            let mut u = vec![0.0; m];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                y.iter_mut().for_each(|v| *v = 0.0);
                match integer {
                    Some(k) => {
                        for _ in 0..k {
                            u.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                            for (j, yj) in y.iter_mut().enumerate() {
                                let p: f64 = (0..m).map(|c| b[(j, c)] * u[c]).sum();
                                *yj += 0.5 * p * p;
                            }
                        }
                    }
                    None => {
                        let s = sample_wishart(dof, m, &mut rng).expect("dof checked").s;
                        for (j, yj) in y.iter_mut().enumerate() {
                            let bj = b.row(j);
                            let sb = s.matvec(bj);
                            *yj = 0.5 * bj.iter().zip(&sb).map(|(p, q)| p * q).sum::<f64>();
                        }
                    }
                }
                let v: f64 = nc.iter_mut().zip(&y).map(|(g, &yj)| g.cdf(yj)).product();
                s1 += v;
                s2 += v * v;
            }
            (s1, s2)
        })
        .collect();
    let (sum, sum_sq) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    Ok(McEstimate::from_sums(sum, sum_sq, n_samples))
}
