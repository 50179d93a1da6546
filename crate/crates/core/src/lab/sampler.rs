//! Direct sampling of `Γₙ(ν/2, R)` for integer `ν` and lower-orthant frequencies.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::factorial::McEstimate;
use crate::linalg::{cholesky, CorrMatrix, Matrix};
use crate::rng::{batches, stream};
use crate::special::Shape;

/// `N` draws of `(Y₁, …, Yₙ)`, row-major.
#[derive(Clone, Debug)]
pub struct GammaSample {
    draws: Vec<f64>,
    n: usize,
    nu: u32,
    seed: u64,
    r: CorrMatrix,
}

impl GammaSample {
    pub fn len(&self) -> usize {
        self.draws.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nu(&self) -> u32 {
        self.nu
    }

    pub fn alpha(&self) -> Shape {
        Shape::new(self.nu as f64 / 2.0).expect("positive dof")
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn corr(&self) -> &CorrMatrix {
        &self.r
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        &self.draws[i * self.n..(i + 1) * self.n]
    }

    pub fn draws(&self) -> impl Iterator<Item = &[f64]> {
        self.draws.chunks_exact(self.n)
    }
}

fn check_nu(nu: u32, n_samples: usize) -> Result<()> {
    if nu == 0 {
        return Err(invalid("degrees of freedom must be a positive integer"));
    }
    if n_samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    Ok(())
}

/// One draw `Y_j = ½ Σ_v (L z_v)_j²` into `y`.
fn draw_into<R: Rng>(rng: &mut R, l: &Matrix, nu: u32, z: &mut [f64], y: &mut [f64]) {
    let n = y.len();
    y.iter_mut().for_each(|v| *v = 0.0);
    for _ in 0..nu {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &l.row(i)[..=i];
            let x: f64 = row.iter().zip(&z[..n]).map(|(a, b)| a * b).sum();
            *yi += 0.5 * x * x;
        }
    }
}

/// Draws from `Γₙ(ν/2, R)` as half the squared norms of `ν` independent `N(0, R)` vectors.
///
/// Batch `b` uses stream `(seed, b)`, so the sample depends only on the inputs.
pub fn sample_mvgamma(r: &CorrMatrix, nu: u32, n_samples: usize, seed: u64) -> Result<GammaSample> {
    check_nu(nu, n_samples)?;
    let n = r.n();
    let l = cholesky(r.matrix())?;
    let chunks: Vec<Vec<f64>> = batches(n_samples)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(id, _, len)| {
            let mut rng = stream(seed, id);
            let mut out = vec![0.0; len * n];
            let mut z = vec![0.0; n];
            for y in out.chunks_exact_mut(n) {
                draw_into(&mut rng, &l, nu, &mut z, y);
            }
            out
        })
        .collect();
    Ok(GammaSample { draws: chunks.concat(), n, nu, seed, r: r.clone() })
}

fn binomial(hits: usize, n: usize) -> McEstimate {
    let p = hits as f64 / n as f64;
    McEstimate { value: p, std_error: (p * (1.0 - p) / n as f64).sqrt(), samples: n }
}

fn check_point(n: usize, x: &[f64]) -> Result<()> {
    if x.len() != n {
        return Err(invalid(format!("point has {} coordinates, sample has dimension {n}", x.len())));
    }
    if let Some(v) = x.iter().find(|v| v.is_nan()) {
        return Err(Error::Domain(format!("coordinate is {v}")));
    }
    Ok(())
}

/// Fraction of draws with `Y_j ≤ x_j` for all `j`, with its binomial standard error.
pub fn empirical_lower_orthant(sample: &GammaSample, x: &[f64]) -> Result<McEstimate> {
    check_point(sample.n, x)?;
    let hits = sample.draws().filter(|y| y.iter().zip(x).all(|(a, b)| a <= b)).count();
    Ok(binomial(hits, sample.len()))
}

/// Same estimate as sampling then counting, without storing the draws.
pub fn mc_lower_orthant(r: &CorrMatrix, nu: u32, x: &[f64], n_samples: usize, seed: u64) -> Result<McEstimate> {
    check_nu(nu, n_samples)?;
    let n = r.n();
    check_point(n, x)?;
    let l = cholesky(r.matrix())?;
    let hits: usize = batches(n_samples)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(id, _, len)| {
            let mut rng = stream(seed, id);
            let mut z = vec![0.0; n];
            let mut y = vec![0.0; n];
            let mut hits = 0;
            for _ in 0..len {
                draw_into(&mut rng, &l, nu, &mut z, &mut y);
                hits += usize::from(y.iter().zip(x).all(|(a, b)| a <= b));
            }
            hits
        })
        .sum();
    Ok(binomial(hits, n_samples))
}

/// Replaces zero off-diagonal entries by `eps`.
pub fn epsilon_fill(r0: &CorrMatrix, eps: f64) -> Result<CorrMatrix> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    let a = r0.matrix();
    if !a.as_slice().contains(&0.0) {
        return Ok(r0.clone());
    }
    let m = Matrix::from_fn(r0.n(), r0.n(), |i, j| if i != j && a[(i, j)] == 0.0 { eps } else { a[(i, j)] });
    CorrMatrix::new(m).map_err(|e| invalid(format!("filled matrix is invalid ({e}); try a smaller eps")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma_cdf;

    #[test]
    fn sample_is_deterministic_and_nonnegative() {
        let r = CorrMatrix::equicorrelated(3, 0.5).unwrap();
        let a = sample_mvgamma(&r, 2, 5000, 9).unwrap();
        let b = sample_mvgamma(&r, 2, 5000, 9).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.len(), 5000);
        assert!(a.draws.iter().all(|&v| v >= 0.0));
        let c = sample_mvgamma(&r, 2, 5000, 10).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn streaming_matches_stored() {
        let r = CorrMatrix::equicorrelated(3, 0.3).unwrap();
        let x = [0.8, 1.1, 0.6];
        let s = sample_mvgamma(&r, 1, 9000, 4).unwrap();
        let e = empirical_lower_orthant(&s, &x).unwrap();
        let m = mc_lower_orthant(&r, 1, &x, 9000, 4).unwrap();
        assert_eq!(e.value, m.value);
    }

    #[test]
    fn orthant_edges() {
        let r = CorrMatrix::equicorrelated(2, 0.3).unwrap();
        let s = sample_mvgamma(&r, 3, 2000, 1).unwrap();
        assert_eq!(empirical_lower_orthant(&s, &[0.0, 0.0]).unwrap().value, 0.0);
        assert_eq!(empirical_lower_orthant(&s, &[1e9, 1e9]).unwrap().value, 1.0);
        assert!(empirical_lower_orthant(&s, &[1.0]).is_err());
    }

    #[test]
    fn independent_marginal_means() {
        let s = sample_mvgamma(&CorrMatrix::identity(2), 3, 40_000, 2).unwrap();
        for j in 0..2 {
            let mean: f64 = s.draws().map(|y| y[j]).sum::<f64>() / s.len() as f64;
            // Var Y = ν/2
            let se = (1.5f64 / s.len() as f64).sqrt();
            assert!((mean - 1.5).abs() < 4.0 * se, "{mean}");
        }
        let e = empirical_lower_orthant(&s, &[1.0, 1e9]).unwrap();
        let want = gamma_cdf(Shape::new(1.5).unwrap(), 1.0).unwrap();
        assert!((e.value - want).abs() < 4.0 * e.std_error);
    }

    #[test]
    fn epsilon_fill_examples() {
        let r = CorrMatrix::equicorrelated(3, 0.2).unwrap();
        assert_eq!(epsilon_fill(&r, 0.01).unwrap(), r);
        let f = epsilon_fill(&CorrMatrix::identity(3), 0.01).unwrap();
        assert_eq!(f, CorrMatrix::equicorrelated(3, 0.01).unwrap());
        assert!(epsilon_fill(&CorrMatrix::identity(3), 0.0).is_err());
        let r0 = CorrMatrix::from_rows(&[vec![1.0, 0.7, 0.0], vec![0.7, 1.0, -0.7], vec![0.0, -0.7, 1.0]]).unwrap();
        let e = epsilon_fill(&r0, 0.5).unwrap_err();
        assert!(e.to_string().contains("smaller eps"));
        let small = epsilon_fill(&r0, 1e-3).unwrap();
        let drop = r0.min_eigenvalue() - small.min_eigenvalue();
        assert!(drop.abs() < 2e-3, "{drop}");
    }
}
