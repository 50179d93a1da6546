//! Infinite divisibility of `|Iₙ + RT|^{-1}`.
//!
//! Two characterizations are implemented: the cycle sign condition on the
//! off-diagonal entries of `R⁻¹`, and the existence of a signature matrix
//! `S` with `(SRS)⁻¹` an M-matrix. They are equivalent; both are kept so
//! each can check the other.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{inverse, CorrMatrix, Matrix};

/// Entries within this band of zero count as zero.
pub const SIGN_BAND: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Griffiths,
    Bapat,
}

/// Diagonal `±1` matrix stored as its diagonal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureMatrix(Vec<i8>);

impl SignatureMatrix {
    pub fn new(s: Vec<i8>) -> Result<Self> {
        if s.iter().any(|&v| v != 1 && v != -1) {
            return Err(invalid("signature entries must be +1 or -1"));
        }
        Ok(SignatureMatrix(s))
    }

    pub fn identity(n: usize) -> Self {
        SignatureMatrix(vec![1; n])
    }

    /// Bit `j` set means `s_j = −1`.
    fn from_bits(n: usize, bits: u64) -> Self {
        SignatureMatrix((0..n).map(|j| if bits >> j & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| v as f64).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `S A S`.
    pub fn conjugate(&self, a: &Matrix) -> Matrix {
        Matrix::from_fn(a.rows(), a.cols(), |i, j| (self.0[i] * self.0[j]) as f64 * a[(i, j)])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfDivReport {
    pub verdict: bool,
    /// Zero-based indices of a cycle violating the sign condition.
    pub griffiths_witness: Option<Vec<usize>>,
    pub bapat_signature: Option<SignatureMatrix>,
    pub griffiths: Option<bool>,
    pub bapat: Option<bool>,
    pub checked_criteria: Vec<Criterion>,
}

impl InfDivReport {
    /// False only when both criteria ran and disagreed.
    pub fn consistent(&self) -> bool {
        match (self.griffiths, self.bapat) {
            (Some(g), Some(b)) => g == b,
            _ => true,
        }
    }
}

/// `A` has non-positive off-diagonal entries and `A⁻¹ ≥ 0`, both within `SIGN_BAND`.
pub fn is_m_matrix(a: &Matrix) -> Result<bool> {
    if !a.is_square() {
        return Err(invalid("M-matrix test needs a square matrix"));
    }
    let n = a.rows();
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(i, j)] > SIGN_BAND {
                return Ok(false);
            }
        }
    }
    let inv = inverse(a)?;
    Ok(inv.as_slice().iter().all(|&v| v >= -SIGN_BAND))
}

fn sign(v: f64) -> i8 {
    if v.abs() <= SIGN_BAND {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

/// Cycle condition `(−1)^k q_{i₁i₂} ⋯ q_{i_k i₁} ≥ 0` for all simple cycles of length ≥ 3.
///
/// Each cycle is visited once: it starts at its smallest index and its
/// second index is below its last.
pub fn griffiths_check(r: &CorrMatrix) -> Result<(bool, Option<Vec<usize>>)> {
    let inv = r.inverse()?;
    Ok(griffiths_on(&inv))
}

fn griffiths_on(p: &Matrix) -> (bool, Option<Vec<usize>>) {
    let n = p.rows();
    // sign of −p_ij; zero edges cannot take part in a failing cycle
    let neg: Vec<Vec<i8>> = (0..n).map(|i| (0..n).map(|j| -sign(p[(i, j)])).collect()).collect();
    let mut path = Vec::with_capacity(n);
    let mut used = vec![false; n];
    for start in 0..n {
        path.clear();
        path.push(start);
        used[start] = true;
        if let Some(w) = dfs(&neg, start, &mut path, &mut used, 1) {
            return (false, Some(w));
        }
        used[start] = false;
    }
    (true, None)
}

fn dfs(neg: &[Vec<i8>], start: usize, path: &mut Vec<usize>, used: &mut [bool], prod: i8) -> Option<Vec<usize>> {
    let n = neg.len();
    let last = *path.last().unwrap();
    if path.len() >= 3 && neg[last][start] != 0 && path[1] < last && prod * neg[last][start] < 0 {
        return Some(path.clone());
    }
    for next in start + 1..n {
        if used[next] || neg[last][next] == 0 {
            continue;
        }
        used[next] = true;
        path.push(next);
        let found = dfs(neg, start, path, used, prod * neg[last][next]);
        path.pop();
        used[next] = false;
        if found.is_some() {
            return found;
        }
    }
    None
}

/// Searches the `2^{n−1}` signature classes (with `s₁ = +1`) for one making `(SRS)⁻¹` an M-matrix.
///
/// Candidates follow a Gray code starting from the sign pattern that makes
/// the first row of `S R⁻¹ S` non-positive.
pub fn bapat_check(r: &CorrMatrix) -> Result<(bool, Option<SignatureMatrix>)> {
    let n = r.n();
    let p = r.inverse()?;
    let mut start = 0u64;
    for j in 1..n {
        if p[(0, j)] > 0.0 {
            start |= 1 << j;
        }
    }
    let classes = 1u64 << (n.saturating_sub(1));
    for t in 0..classes {
        let gray = t ^ (t >> 1);
        let bits = start ^ (gray << 1);
        let s = SignatureMatrix::from_bits(n, bits);
        if signature_works(&s, &p, r.matrix()) {
            return Ok((true, Some(s)));
        }
    }
    Ok((false, None))
}

fn signature_works(s: &SignatureMatrix, p: &Matrix, r: &Matrix) -> bool {
    let n = p.rows();
    let sv = s.signs();
    for i in 0..n {
        for j in 0..n {
            let f = (sv[i] * sv[j]) as f64;
            if i != j && f * p[(i, j)] > SIGN_BAND {
                return false;
            }
            if f * r[(i, j)] < -SIGN_BAND {
                return false;
            }
        }
    }
    true
}

/// Runs the requested criteria. With both, the verdict is the signature one.
pub fn infdiv_check(r: &CorrMatrix, criteria: &[Criterion]) -> Result<InfDivReport> {
    if criteria.is_empty() {
        return Err(invalid("no criterion requested"));
    }
    let mut report = InfDivReport {
        verdict: false,
        griffiths_witness: None,
        bapat_signature: None,
        griffiths: None,
        bapat: None,
        checked_criteria: Vec::new(),
    };
    for &c in criteria {
        if report.checked_criteria.contains(&c) {
            continue;
        }
        report.checked_criteria.push(c);
        match c {
            Criterion::Griffiths => {
                let (ok, w) = griffiths_check(r)?;
                report.griffiths = Some(ok);
                report.griffiths_witness = w;
            }
            Criterion::Bapat => {
                let (ok, s) = bapat_check(r)?;
                report.bapat = Some(ok);
                report.bapat_signature = s;
            }
        }
    }
    report.verdict = report.bapat.or(report.griffiths).unwrap_or(false);
    Ok(report)
}

/// Signature criterion only; false when `R⁻¹` cannot be formed.
pub fn is_infinitely_divisible(r: &CorrMatrix) -> bool {
    matches!(bapat_check(r), Ok((true, _)))
}
