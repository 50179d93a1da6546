//! Dense kernels for the small matrices used everywhere else.
//!
//! Dimensions are expected to stay below ~16, so everything is plain
//! row-major storage with O(n³) algorithms: cyclic Jacobi for symmetric
//! eigenproblems and partially pivoted LU for inverses and determinants.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum tolerated asymmetry of a correlation matrix before symmetrizing.
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Smallest eigenvalue a correlation matrix must exceed.
pub const PD_TOL: f64 = 1e-10;
/// Condition estimate above which a matrix counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Row-major dense matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from rows; all rows must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {n_cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: n_rows, cols: n_cols, data })
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(l, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.add(&other.scale(-1.0))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Max column sum norm.
    pub fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn symmetrize(&self) -> Matrix {
        assert!(self.is_square());
        Matrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    /// Largest `|a_ij - a_ji|` together with its position.
    pub fn asymmetry(&self) -> (f64, usize, usize) {
        let mut worst = (0.0, 0, 0);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let d = (self[(i, j)] - self[(j, i)]).abs();
                if d > worst.0 {
                    worst = (d, i, j);
                }
            }
        }
        worst
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Strictly increasing list of zero-based indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        let len = members.len();
        members.sort_unstable();
        members.dedup();
        if members.len() != len {
            return Err(Error::invalid("index set contains duplicates"));
        }
        Ok(IndexSet(members))
    }

    pub fn empty() -> Self {
        IndexSet(Vec::new())
    }

    /// `{0, …, n-1}`.
    pub fn full(n: usize) -> Self {
        IndexSet((0..n).collect())
    }

    pub fn range(start: usize, end: usize) -> Self {
        IndexSet((start..end).collect())
    }

    /// Members selected by the bits of `mask`.
    pub fn from_mask(mask: u64) -> Self {
        IndexSet((0..64).filter(|i| mask >> i & 1 == 1).collect())
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0, |m, &i| m | 1 << i)
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut v: Vec<usize> = self.0.iter().chain(&other.0).copied().collect();
        v.sort_unstable();
        v.dedup();
        IndexSet(v)
    }

    /// One-based rendering, for reports.
    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }
}

/// Split of `{0, …, n-1}` into `{0, …, n1-1}` and `{n1, …, n-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    n: usize,
    n1: usize,
}

impl Partition {
    pub fn new(n: usize, n1: usize) -> Result<Self> {
        if n1 == 0 || n1 >= n {
            return Err(Error::invalid(format!("partition needs 1 <= n1 < n, got n1 = {n1}, n = {n}")));
        }
        Ok(Partition { n, n1 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n - self.n1
    }

    pub fn first(&self) -> IndexSet {
        IndexSet::range(0, self.n1)
    }

    pub fn second(&self) -> IndexSet {
        IndexSet::range(self.n1, self.n)
    }

    pub fn same_block(&self, i: usize, j: usize) -> bool {
        (i < self.n1) == (j < self.n1)
    }
}

/// The 4×4 two-block test matrix with cross-block entries scaled by `tau`.
/// Positive definite for `tau` in [0, 1]; its inverse is an M-matrix at
/// `tau = 1` but not at `tau = 0.5`.
pub fn block4(tau: f64) -> Matrix {
    Matrix::from_rows(&[
        [1.0, 0.55, 0.3 * tau, 0.36 * tau],
        [0.55, 1.0, 0.48 * tau, 0.5 * tau],
        [0.3 * tau, 0.48 * tau, 1.0, 0.52],
        [0.36 * tau, 0.5 * tau, 0.52, 1.0],
    ])
    .expect("square literal")
}

/// `A[rows, cols]`.
pub fn submatrix(a: &Matrix, rows: &IndexSet, cols: &IndexSet) -> Result<Matrix> {
    if let Some(&i) = rows.members().iter().find(|&&i| i >= a.rows()) {
        return Err(Error::invalid(format!("row index {i} out of range for {} rows", a.rows())));
    }
    if let Some(&j) = cols.members().iter().find(|&&j| j >= a.cols()) {
        return Err(Error::invalid(format!("column index {j} out of range for {} columns", a.cols())));
    }
    let (r, c) = (rows.members(), cols.members());
    Ok(Matrix::from_fn(r.len(), c.len(), |i, j| a[(r[i], c[j])]))
}

/// Principal submatrix `A_M`.
pub fn principal(a: &Matrix, m: &IndexSet) -> Result<Matrix> {
    submatrix(a, m, m)
}

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    /// `V f(Λ) Vᵗ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        Matrix::from_fn(n, n, |i, j| (0..n).map(|k| self.vectors[(i, k)] * fv[k] * self.vectors[(j, k)]).sum())
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// The input is symmetrized first; eigenvalues come back sorted descending.
pub fn sym_eigen(a: &Matrix) -> Result<SymEigen> {
    if !a.is_square() {
        return Err(Error::invalid(format!("eigendecomposition needs a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    let n = a.rows();
    let mut m = a.symmetrize();
    let mut v = Matrix::identity(n);
    let scale = m.max_abs().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(SymEigen { values, vectors })
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::invalid(format!("LU needs a square matrix, got {}x{}", a.rows(), a.cols())));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Lu { lu, perm, sign, singular })
    }

    pub fn det(&self) -> f64 {
        let n = self.lu.rows();
        (0..n).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }
}

/// `det A` alone; zero for exactly singular input.
pub fn det(a: &Matrix) -> Result<f64> {
    let lu = Lu::new(a)?;
    Ok(if lu.is_singular() { 0.0 } else { lu.det() })
}

/// `(A⁻¹, det A)` via partially pivoted LU.
///
/// Fails with [`Error::Singular`] when the 1-norm condition estimate exceeds
/// [`MAX_CONDITION`].
pub fn inverse_and_det(a: &Matrix) -> Result<(Matrix, f64)> {
    let lu = Lu::new(a)?;
    if lu.is_singular() {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    let n = a.rows();
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = lu.solve(&e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    let condition = a.norm1() * inv.norm1();
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Singular { condition });
    }
    Ok((inv, lu.det()))
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    inverse_and_det(a).map(|(inv, _)| inv)
}

/// Symmetric inverse square root `A^{-1/2}` of a positive definite matrix.
pub fn inv_sqrt(a: &Matrix) -> Result<Matrix> {
    let eig = sym_eigen(a)?;
    let min = eig.min();
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok(eig.map(|l| 1.0 / l.sqrt()))
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵗ`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::invalid("Cholesky needs a square matrix"));
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Symmetric positive-definite matrix with unit diagonal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrMatrix {
    matrix: Matrix,
    min_eigenvalue: f64,
}

impl CorrMatrix {
    /// Validates and symmetrizes `a`.
    ///
    /// Asymmetry beyond [`SYMMETRY_TOL`] is rejected, as are diagonals off 1
    /// by more than the same tolerance, off-diagonal entries outside (-1, 1)
    /// and smallest eigenvalues at or below [`PD_TOL`].
    pub fn new(a: Matrix) -> Result<Self> {
        if !a.is_square() || a.rows() == 0 {
            return Err(Error::invalid(format!(
                "correlation matrix must be square and non-empty, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if a.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix contains non-finite entries"));
        }
        let (diff, row, col) = a.asymmetry();
        if diff > SYMMETRY_TOL {
            return Err(Error::Asymmetric { row, col, diff });
        }
        let n = a.rows();
        let mut m = a.symmetrize();
        for i in 0..n {
            let d = m[(i, i)];
            if (d - 1.0).abs() > SYMMETRY_TOL {
                return Err(Error::NonUnitDiagonal { index: i, value: d });
            }
            m[(i, i)] = 1.0;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let v = m[(i, j)];
                if v.abs() >= 1.0 {
                    return Err(Error::CorrelationOutOfRange { row: i, col: j, value: v });
                }
            }
        }
        let min_eigenvalue = sym_eigen(&m)?.min();
        if min_eigenvalue <= PD_TOL {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        Ok(CorrMatrix { matrix: m, min_eigenvalue })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        CorrMatrix::new(Matrix::from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        CorrMatrix { matrix: Matrix::identity(n), min_eigenvalue: 1.0 }
    }

    /// All off-diagonal entries equal to `r`.
    pub fn equicorrelated(n: usize, r: f64) -> Result<Self> {
        CorrMatrix::new(Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { r }))
    }

    /// `r_ij = a_i a_j` off the diagonal.
    pub fn one_factorial(a: &[f64]) -> Result<Self> {
        let n = a.len();
        CorrMatrix::new(Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { a[i] * a[j] }))
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn inverse(&self) -> Result<Matrix> {
        inverse(&self.matrix)
    }

    pub fn det(&self) -> Result<f64> {
        det(&self.matrix)
    }

    /// Principal submatrix, itself a correlation matrix.
    pub fn marginal(&self, m: &IndexSet) -> Result<CorrMatrix> {
        if m.is_empty() {
            return Err(Error::invalid("marginal over an empty index set"));
        }
        CorrMatrix::new(principal(&self.matrix, m)?)
    }

    /// `S R S` for a ±1 signature vector.
    pub fn sign_flip(&self, signs: &[f64]) -> CorrMatrix {
        let n = self.n();
        let matrix = Matrix::from_fn(n, n, |i, j| signs[i] * signs[j] * self.matrix[(i, j)]);
        CorrMatrix { matrix, min_eigenvalue: self.min_eigenvalue }
    }

    /// Symmetric permutation `R[p, p]`.
    pub fn permuted(&self, p: &[usize]) -> Result<CorrMatrix> {
        let n = self.n();
        if p.len() != n {
            return Err(Error::invalid("permutation length mismatch"));
        }
        CorrMatrix::new(Matrix::from_fn(n, n, |i, j| self.matrix[(p[i], p[j])]))
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }
}
