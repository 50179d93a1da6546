//! Sparse truncated multivariate polynomials.
//!
//! Used for the trace-power construction of the series coefficients, which
//! is slower than the determinant recursion but independent of it.

use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::linalg::Matrix;

/// Exponent vector of a monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut k = vec![0; n];
        k[i] = 1;
        MultiIndex(k)
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&v| v as usize).sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

/// Polynomial in `n` variables with terms of total degree above `max_degree` dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedPolynomial {
    n: usize,
    max_degree: usize,
    terms: HashMap<MultiIndex, f64>,
}

impl TruncatedPolynomial {
    pub fn zero(n: usize, max_degree: usize) -> Self {
        TruncatedPolynomial { n, max_degree, terms: HashMap::new() }
    }

    pub fn constant(n: usize, max_degree: usize, c: f64) -> Self {
        let mut p = Self::zero(n, max_degree);
        p.add_term(MultiIndex::zero(n), c);
        p
    }

    /// The linear form `Σ coeffs[i] z_i`.
    pub fn linear(max_degree: usize, coeffs: &[f64]) -> Self {
        let n = coeffs.len();
        let mut p = Self::zero(n, max_degree);
        for (i, &c) in coeffs.iter().enumerate() {
            p.add_term(MultiIndex::unit(n, i), c);
        }
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, k: &MultiIndex) -> f64 {
        self.terms.get(k).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(k, &v)| (k, v))
    }

    pub fn add_term(&mut self, k: MultiIndex, c: f64) {
        assert_eq!(k.len(), self.n, "monomial dimension");
        if c == 0.0 || k.degree() > self.max_degree {
            return;
        }
        *self.terms.entry(k).or_insert(0.0) += c;
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.max_degree = self.max_degree.min(other.max_degree);
        out.terms.retain(|k, _| k.degree() <= out.max_degree);
        for (k, v) in other.terms() {
            out.add_term(k.clone(), v);
        }
        out
    }

    /// Product truncated at the smaller of the two degree limits.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "polynomial dimension");
        let mut out = Self::zero(self.n, self.max_degree.min(other.max_degree));
        for (a, va) in self.terms() {
            let da = a.degree();
            for (b, vb) in other.terms() {
                if da + b.degree() <= out.max_degree {
                    out.add_term(a.plus(b), va * vb);
                }
            }
        }
        out
    }

    /// Terms of exactly degree `d`.
    pub fn homogeneous_part(&self, d: usize) -> Self {
        let mut out = Self::zero(self.n, self.max_degree);
        for (k, v) in self.terms() {
            if k.degree() == d {
                out.add_term(k.clone(), v);
            }
        }
        out
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.terms()
            .map(|(k, v)| {
                v * k.0.iter().zip(z).map(|(&e, &zi)| zi.powi(e as i32)).product::<f64>()
            })
            .sum()
    }

    /// Removes terms with `|c| < eps`.
    pub fn prune(&mut self, eps: f64) {
        self.terms.retain(|_, v| v.abs() >= eps);
    }

    /// `exp(self)` for a polynomial with zero constant term.
    pub fn exp(&self) -> Result<Self> {
        if self.get(&MultiIndex::zero(self.n)) != 0.0 {
            return Err(invalid("exp requires a zero constant term"));
        }
        let parts: Vec<Self> = (0..=self.max_degree).map(|d| self.homogeneous_part(d)).collect();
        // d E_d = Σ_{k=1}^{d} k P_k E_{d-k}
        let mut e: Vec<Self> = vec![Self::constant(self.n, self.max_degree, 1.0)];
        for d in 1..=self.max_degree {
            let mut acc = Self::zero(self.n, self.max_degree);
            for k in 1..=d {
                if parts[k].is_empty() || e[d - k].is_empty() {
                    continue;
                }
                acc = acc.add(&parts[k].mul(&e[d - k]).scale(k as f64));
            }
            e.push(acc.scale(1.0 / d as f64));
        }
        let mut out = Self::zero(self.n, self.max_degree);
        for part in e {
            for (k, v) in part.terms() {
                out.add_term(k.clone(), v);
            }
        }
        Ok(out)
    }
}

/// `tr((Q̂Z)^k)` for `k = 1..=max_degree`, with `Z = diag(z)`.
pub fn trace_powers(qhat: &Matrix, max_degree: usize) -> Vec<TruncatedPolynomial> {
    let n = qhat.rows();
    // entries of (Q̂Z)^k as polynomials; Q̂Z has entry (i,j) = q_ij z_j
    let base: Vec<Vec<TruncatedPolynomial>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut p = TruncatedPolynomial::zero(n, max_degree);
                    p.add_term(MultiIndex::unit(n, j), qhat[(i, j)]);
                    p
                })
                .collect()
        })
        .collect();
    let mut power = base.clone();
    let mut out = Vec::with_capacity(max_degree);
    for k in 1..=max_degree {
        let mut tr = TruncatedPolynomial::zero(n, max_degree);
        for (i, row) in power.iter().enumerate() {
            tr = tr.add(&row[i]);
        }
        out.push(tr);
        if k == max_degree {
            break;
        }
        let mut next = vec![vec![TruncatedPolynomial::zero(n, max_degree); n]; n];
        for i in 0..n {
            for j in 0..n {
                for (l, b) in base.iter().enumerate() {
                    if qhat[(l, j)] == 0.0 || power[i][l].is_empty() {
                        continue;
                    }
                    next[i][j] = next[i][j].add(&power[i][l].mul(&b[j]));
                }
            }
        }
        power = next;
    }
    out
}

/// Coefficients of `det(I + Q̂Z)^{-α}` via `exp(α Σ_k (-1)^k tr((Q̂Z)^k) / k)`.
pub fn exp_series(qhat: &Matrix, alpha: f64, max_degree: usize) -> Result<TruncatedPolynomial> {
    let n = qhat.rows();
    let mut log = TruncatedPolynomial::zero(n, max_degree);
    for (idx, tr) in trace_powers(qhat, max_degree).into_iter().enumerate() {
        let k = (idx + 1) as f64;
        let sign = if (idx + 1) % 2 == 0 { 1.0 } else { -1.0 };
        log = log.add(&tr.scale(sign * alpha / k));
    }
    log.exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_linear_matches_factorials() {
        let p = TruncatedPolynomial::linear(6, &[2.0]);
        let e = p.exp().unwrap();
        let mut fact = 1.0;
        for d in 0..=6u32 {
            if d > 0 {
                fact *= d as f64;
            }
            let want = 2f64.powi(d as i32) / fact;
            assert!((e.get(&MultiIndex(vec![d])) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn mul_truncates() {
        let p = TruncatedPolynomial::linear(2, &[1.0, 1.0]);
        let sq = p.mul(&p).mul(&p);
        assert!(sq.is_empty());
        let sq = p.mul(&p);
        assert_eq!(sq.get(&MultiIndex(vec![1, 1])), 2.0);
    }

    #[test]
    fn trace_powers_two_by_two() {
        let q = Matrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let tr = trace_powers(&q, 4);
        assert!(tr[0].is_empty());
        assert!((tr[1].get(&MultiIndex(vec![1, 1])) - 0.5).abs() < 1e-15);
        assert!((tr[3].get(&MultiIndex(vec![2, 2])) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn exp_series_one_variable_is_binomial() {
        // (1 + q z)^{-α} = Σ (α)_k / k! (-q z)^k
        let q = Matrix::from_rows(&[vec![0.3]]).unwrap();
        let alpha = 1.7;
        let e = exp_series(&q, alpha, 8).unwrap();
        let mut c = 1.0;
        for k in 0..=8u32 {
            if k > 0 {
                c *= -(alpha + k as f64 - 1.0) * 0.3 / k as f64;
            }
            assert!((e.get(&MultiIndex(vec![k])) - c).abs() < 1e-13, "k {k}");
        }
    }
}
