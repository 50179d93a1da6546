//! One-parameter correlation paths `τ ↦ R_τ`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{CorrMatrix, Matrix, Partition};

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TauPath {
    /// Off-diagonal blocks scaled by `τ`: `R_1 = R`, `R_0 = R₁₁ ⊕ R₂₂`.
    BlockScale { r: CorrMatrix, part: Partition },
    /// `R_τ = (1 − τ)R₀ + τR`.
    Convex { r0: CorrMatrix, r: CorrMatrix },
    /// `R_τ = diag(1 − τ_i²) + (τ_i r_ij τ_j)`.
    Componentwise { r: CorrMatrix },
}

impl TauPath {
    pub fn block_scale(r: CorrMatrix, part: Partition) -> Result<Self> {
        if part.n() != r.n() {
            return Err(invalid(format!("partition covers {} indices, matrix has {}", part.n(), r.n())));
        }
        Ok(TauPath::BlockScale { r, part })
    }

    pub fn convex(r0: CorrMatrix, r: CorrMatrix) -> Result<Self> {
        if r0.n() != r.n() {
            return Err(invalid(format!("endpoints have dimensions {} and {}", r0.n(), r.n())));
        }
        Ok(TauPath::Convex { r0, r })
    }

    pub fn componentwise(r: CorrMatrix) -> Self {
        TauPath::Componentwise { r }
    }

    pub fn n(&self) -> usize {
        match self {
            TauPath::BlockScale { r, .. } | TauPath::Convex { r, .. } | TauPath::Componentwise { r } => r.n(),
        }
    }

    /// The endpoint at `τ = 1`.
    pub fn target(&self) -> &CorrMatrix {
        match self {
            TauPath::BlockScale { r, .. } | TauPath::Convex { r, .. } | TauPath::Componentwise { r } => r,
        }
    }
}

fn check_tau(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid(format!("tau must lie in [0, 1], got {t}")));
    }
    Ok(())
}

fn validate(m: Matrix, tau: f64) -> Result<CorrMatrix> {
    CorrMatrix::new(m).map_err(|e| Error::PathInvalid { tau, reason: e.to_string() })
}

/// `R_τ` for a scalar `τ`; componentwise paths use `τ` in every coordinate.
pub fn tau_evaluate(path: &TauPath, tau: f64) -> Result<CorrMatrix> {
    check_tau(tau)?;
    match path {
        TauPath::BlockScale { r, part } => {
            if tau == 1.0 {
                return Ok(r.clone());
            }
            let a = r.matrix();
            let m = Matrix::from_fn(r.n(), r.n(), |i, j| if part.same_block(i, j) { a[(i, j)] } else { tau * a[(i, j)] });
            validate(m, tau)
        }
        TauPath::Convex { r0, r } => {
            if tau == 1.0 {
                return Ok(r.clone());
            }
            if tau == 0.0 {
                return Ok(r0.clone());
            }
            let (a, b) = (r0.matrix(), r.matrix());
            let m = Matrix::from_fn(r.n(), r.n(), |i, j| (1.0 - tau) * a[(i, j)] + tau * b[(i, j)]);
            validate(m, tau)
        }
        TauPath::Componentwise { .. } => tau_evaluate_vector(path, &vec![tau; path.n()]),
    }
}

/// `R_τ` for a vector `τ`; only componentwise paths accept non-constant vectors.
pub fn tau_evaluate_vector(path: &TauPath, tau: &[f64]) -> Result<CorrMatrix> {
    if tau.len() != path.n() {
        return Err(invalid(format!("tau vector has {} entries, path has dimension {}", tau.len(), path.n())));
    }
    for &t in tau {
        check_tau(t)?;
    }
    match path {
        TauPath::Componentwise { r } => {
            let a = r.matrix();
            let m = Matrix::from_fn(r.n(), r.n(), |i, j| if i == j { 1.0 } else { tau[i] * a[(i, j)] * tau[j] });
            let t = tau.iter().copied().fold(f64::INFINITY, f64::min);
            validate(m, t)
        }
        _ => {
            if tau.iter().any(|&t| t != tau[0]) {
                return Err(invalid("only componentwise paths take a non-constant tau vector"));
            }
            tau_evaluate(path, tau[0])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r3() -> CorrMatrix {
        CorrMatrix::from_rows(&[vec![1.0, 0.4, 0.3], vec![0.4, 1.0, 0.5], vec![0.3, 0.5, 1.0]]).unwrap()
    }

    #[test]
    fn block_scale_endpoints() {
        let p = TauPath::block_scale(r3(), Partition::new(3, 1).unwrap()).unwrap();
        assert_eq!(tau_evaluate(&p, 1.0).unwrap(), r3());
        let z = tau_evaluate(&p, 0.0).unwrap();
        assert_eq!(z.get(0, 1), 0.0);
        assert_eq!(z.get(0, 2), 0.0);
        assert_eq!(z.get(1, 2), 0.5);
        assert!((tau_evaluate(&p, 0.5).unwrap().get(0, 2) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn convex_midpoint() {
        let r0 = CorrMatrix::equicorrelated(3, 0.2).unwrap();
        let p = TauPath::convex(r0, r3()).unwrap();
        let m = tau_evaluate(&p, 0.5).unwrap();
        assert!((m.get(0, 1) - 0.3).abs() < 1e-15);
        assert!((m.get(1, 2) - 0.35).abs() < 1e-15);
    }

    #[test]
    fn componentwise_scales_rows_and_columns() {
        let p = TauPath::componentwise(r3());
        let m = tau_evaluate_vector(&p, &[1.0, 0.5, 0.0]).unwrap();
        assert!((m.get(0, 1) - 0.2).abs() < 1e-15);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(tau_evaluate(&p, 1.0).unwrap(), r3());
    }

    #[test]
    fn rejects_bad_tau_and_indefinite_points() {
        let p = TauPath::componentwise(r3());
        assert!(matches!(tau_evaluate(&p, 1.5), Err(Error::InvalidArgument(_))));
        // the convex path between two valid matrices can't leave the cone, so
        // break it with an indefinite endpoint assembled by hand
        let bad = Matrix::from_rows(&[vec![1.0, 0.9, -0.9], vec![0.9, 1.0, 0.9], vec![-0.9, 0.9, 1.0]]).unwrap();
        assert!(matches!(validate(bad, 0.3), Err(Error::PathInvalid { .. })));
        assert!(TauPath::convex(r3(), CorrMatrix::identity(2)).is_err());
    }
}
