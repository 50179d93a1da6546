#![allow(dead_code)]

use mvgamma::linalg::{sym_eigen, CorrMatrix, Matrix};
use mvgamma::quadrature::adaptive;
use mvgamma::special::erf;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn block4(tau: f64) -> CorrMatrix {
    CorrMatrix::new(mvgamma::linalg::block4(tau)).unwrap()
}

fn normalize(a: &Matrix) -> CorrMatrix {
    let n = a.rows();
    let d = a.diagonal();
    let m = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { a[(i, j)] / (d[i] * d[j]).sqrt() });
    CorrMatrix::new(m).unwrap()
}

/// Normalized `GGᵗ + sI` with Gaussian-ish entries; `s` keeps it away from singular.
pub fn random_corr(rng: &mut impl Rng, n: usize, s: f64) -> CorrMatrix {
    let g = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let a = g.matmul(&g.transpose()).add(&Matrix::identity(n).scale(s));
    normalize(&a)
}

/// Correlation matrix whose inverse is an M-matrix, optionally sign-conjugated.
///
/// Built as the normalized inverse of a diagonally dominant Z-matrix; the
/// dominance margin `slack` controls how strong the correlations get.
pub fn random_infdiv(rng: &mut impl Rng, n: usize, slack: f64, flip: bool) -> CorrMatrix {
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = if rng.random_bool(0.8) { rng.random_range(0.0..1.0) } else { 0.0 };
            p[(i, j)] = -v;
            p[(j, i)] = -v;
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| -p[(i, j)]).sum();
        p[(i, i)] = off + slack + rng.random_range(0.0..0.5);
    }
    let r = normalize(&mvgamma::linalg::inverse(&p).unwrap());
    if flip {
        let s: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        r.sign_flip(&s)
    } else {
        r
    }
}

pub fn phi_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// `P(|Z₁| ≤ z, |Z₂| ≤ z)` for a standard bivariate normal, by nested adaptive quadrature of the density.
pub fn bvn_rectangle(z: f64, rho: f64) -> f64 {
    let s = (1.0 - rho * rho).sqrt();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s);
    let outer = adaptive(
        |u| {
            let inner = adaptive(
                |v| norm * (-(u * u - 2.0 * rho * u * v + v * v) / (2.0 * s * s)).exp(),
                -z,
                z,
                1e-13,
                1e-12,
            );
            inner.value
        },
        -z,
        z,
        1e-12,
        1e-11,
    );
    outer.value
}

/// Exact sums of the series coefficients of each total degree.
///
/// Setting every `z_j = t` collapses the expansion to
/// `|Q|^α ∏_i (1 + μ_i t)^{-α}` with `μ_i` the eigenvalues of `Q̂`.
pub fn degree_masses(qhat: &Matrix, alpha: f64, det_q: f64, k: usize) -> Vec<f64> {
    let mu = sym_eigen(qhat).unwrap().values;
    let mut acc = vec![0.0; k + 1];
    acc[0] = det_q.powf(alpha);
    for m in mu {
        let mut f = vec![0.0; k + 1];
        f[0] = 1.0;
        for j in 1..=k {
            f[j] = f[j - 1] * -(alpha + j as f64 - 1.0) * m / j as f64;
        }
        let mut next = vec![0.0; k + 1];
        for (a, &va) in acc.iter().enumerate() {
            for (b, &fb) in f.iter().enumerate().take(k + 1 - a) {
                next[a + b] += va * fb;
            }
        }
        acc = next;
    }
    acc
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
