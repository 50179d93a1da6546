//! Coefficients `c_M(τ) = −α ∂/∂τ |R_{τ,M}|` of the monotonicity arguments.
//!
//! With them `∂/∂τ G_α(x; R_τ) = Σ_M c_M(τ) ∂^M G_{α+1}(x; R_τ)`, where `∂^M`
//! differentiates once in each `x_j`, `j ∈ M`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::infdiv::{SignatureMatrix, SIGN_BAND};
use crate::linalg::{det, inv_sqrt, inverse, inverse_and_det, principal, submatrix, sym_eigen, CorrMatrix, IndexSet, Partition};
use crate::special::Shape;

use super::path::{tau_evaluate, TauPath};

/// Sparse map `M ↦ c_M`, ordered by bit mask.
pub type Coefficients = Vec<(IndexSet, f64)>;

/// `c_M(τ) = 2ατ|R_{τ,M}| Σ_i λ_i / (1 − τ²λ_i)` for `M` meeting both blocks.
///
/// `λ_i` are the squared canonical correlations between `M ∩ block 1` and
/// `M ∩ block 2`. Subsets inside one block have `c_M = 0` and are omitted.
pub fn cm_coefficients_thm1(r: &CorrMatrix, part: &Partition, alpha: Shape, tau: f64) -> Result<Coefficients> {
    let n = r.n();
    if part.n() != n {
        return Err(invalid(format!("partition covers {} indices, matrix has {n}", part.n())));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(invalid(format!("tau must lie in [0, 1], got {tau}")));
    }
    let first = part.first().mask();
    let a = r.matrix();
    let al = alpha.alpha();
    let mut out = Vec::new();
    for mask in 1u64..1 << n {
        let (m1, m2) = (mask & first, mask & !first);
        if m1 == 0 || m2 == 0 {
            continue;
        }
        let (s1, s2) = (IndexSet::from_mask(m1), IndexSet::from_mask(m2));
        let r11 = principal(a, &s1)?;
        let r22 = principal(a, &s2)?;
        let r12 = submatrix(a, &s1, &s2)?;
        let h = inv_sqrt(&r11)?;
        let k = h.matmul(&r12).matmul(&inverse(&r22)?).matmul(&r12.transpose()).matmul(&h).symmetrize();
        let lambda = sym_eigen(&k)?.values;
        let mut prod = 1.0;
        let mut sum = 0.0;
        for &l in &lambda {
            let l = l.max(0.0);
            let q = 1.0 - tau * tau * l;
            if q <= 0.0 {
                return Err(Error::Degenerate(format!("canonical correlation {l} reaches 1/tau^2 at tau = {tau}")));
            }
            prod *= q;
            sum += l / q;
        }
        let det_m = det(&r11)? * det(&r22)? * prod;
        out.push((IndexSet::from_mask(mask), 2.0 * al * tau * det_m * sum));
    }
    Ok(out)
}

/// Which conditions hold for a convex path `R₀ → R`.
#[derive(Clone, Debug, Serialize)]
pub struct ConvexHypotheses {
    /// Signature used for the checks; identity unless a conjugation was needed.
    pub signature: SignatureMatrix,
    pub base_positive: bool,
    pub base_inverse_nonpositive: bool,
    /// `r_ij ≥ r₀,ij` for all off-diagonal pairs, strictly for at least one.
    pub dominates: bool,
}

impl ConvexHypotheses {
    pub fn holds(&self) -> bool {
        self.base_positive && self.base_inverse_nonpositive && self.dominates
    }

    /// First violated condition, named for messages.
    pub fn violation(&self) -> Option<&'static str> {
        if !self.base_positive {
            Some("some off-diagonal r0_ij <= 0")
        } else if !self.base_inverse_nonpositive {
            Some("some off-diagonal element of R0^-1 is positive")
        } else if !self.dominates {
            Some("R does not dominate R0 off the diagonal")
        } else {
            None
        }
    }
}

const DOMINANCE_TOL: f64 = 1e-14;

fn convex_checks(r0: &CorrMatrix, r: &CorrMatrix, s: SignatureMatrix) -> Result<ConvexHypotheses> {
    let n = r0.n();
    let a0 = s.conjugate(r0.matrix());
    let a = s.conjugate(r.matrix());
    let inv = inverse(&a0)?;
    let mut base_positive = true;
    let mut base_inverse_nonpositive = true;
    let mut weak = true;
    let mut strict = false;
    for i in 0..n {
        for j in (i + 1)..n {
            base_positive &= a0[(i, j)] > 0.0;
            base_inverse_nonpositive &= inv[(i, j)] <= SIGN_BAND;
            let d = a[(i, j)] - a0[(i, j)];
            weak &= d >= -DOMINANCE_TOL;
            strict |= d > DOMINANCE_TOL;
        }
    }
    Ok(ConvexHypotheses { signature: s, base_positive, base_inverse_nonpositive, dominates: weak && strict })
}

/// Checks the convex-path conditions directly and, failing that, after the
/// signature conjugation that makes `R₀` entrywise positive.
pub fn convex_hypotheses(r0: &CorrMatrix, r: &CorrMatrix) -> Result<ConvexHypotheses> {
    if r0.n() != r.n() {
        return Err(invalid(format!("endpoints have dimensions {} and {}", r0.n(), r.n())));
    }
    let n = r0.n();
    let direct = convex_checks(r0, r, SignatureMatrix::identity(n))?;
    if direct.holds() || n < 2 {
        return Ok(direct);
    }
    let row = r0.matrix().row(0);
    if row[1..].iter().all(|&v| v != 0.0) {
        let mut s = vec![1i8; n];
        for j in 1..n {
            s[j] = if row[j] > 0.0 { 1 } else { -1 };
        }
        let conj = convex_checks(r0, r, SignatureMatrix::new(s)?)?;
        if conj.holds() {
            return Ok(conj);
        }
    }
    Ok(direct)
}

/// `−α |R_{τ,M}| tr(R_{τ,M}⁻¹ Q_M)` with `Q = R − R₀`, for any endpoints.
///
/// This is `−α ∂/∂τ |R₀,M + τQ_M|`; singletons are exactly 0 since `q_ii = 0`.
pub(crate) fn convex_coefficients(r0: &CorrMatrix, r: &CorrMatrix, alpha: Shape, tau: f64) -> Result<Coefficients> {
    let n = r.n();
    let path = TauPath::convex(r0.clone(), r.clone())?;
    let rt = tau_evaluate(&path, tau)?;
    let q = r.matrix().sub(r0.matrix());
    let al = alpha.alpha();
    let mut out = Vec::with_capacity((1 << n) - 1);
    for mask in 1u64..1 << n {
        let set = IndexSet::from_mask(mask);
        if set.len() == 1 {
            out.push((set, 0.0));
            continue;
        }
        let (inv, d) = inverse_and_det(&principal(rt.matrix(), &set)?)?;
        let qm = principal(&q, &set)?;
        let m = set.len();
        let mut tr = 0.0;
        for i in 0..m {
            for j in 0..m {
                tr += inv[(i, j)] * qm[(j, i)];
            }
        }
        out.push((set, -al * d * tr));
    }
    Ok(out)
}

/// Coefficients along `R_τ = R₀ + τ(R − R₀)`, all `M ≠ ∅` (singletons exactly 0).
///
/// Rejects endpoint pairs that fail the convex-path conditions, even after a
/// signature conjugation.
pub fn cm_coefficients_thm4(r0: &CorrMatrix, r: &CorrMatrix, alpha: Shape, tau: f64) -> Result<Coefficients> {
    let h = convex_hypotheses(r0, r)?;
    if let Some(v) = h.violation() {
        return Err(invalid(v));
    }
    convex_coefficients(r0, r, alpha, tau)
}

/// `c_M(τ)` for any block-scale or convex path, with no hypothesis checks.
pub fn path_coefficients(path: &TauPath, alpha: Shape, tau: f64) -> Result<Coefficients> {
    match path {
        TauPath::BlockScale { r, part } => cm_coefficients_thm1(r, part, alpha, tau),
        TauPath::Convex { r0, r } => convex_coefficients(r0, r, alpha, tau),
        TauPath::Componentwise { .. } => Err(invalid("coefficients are implemented for scalar paths only")),
    }
}
