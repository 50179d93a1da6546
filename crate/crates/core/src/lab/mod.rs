//! Correlation paths, their proof coefficients, a direct sampler and the
//! verification driver built on them.

mod coefficients;
mod path;
mod sampler;
mod verify;

pub use coefficients::{
    cm_coefficients_thm1, cm_coefficients_thm4, convex_hypotheses, path_coefficients, Coefficients, ConvexHypotheses,
};
pub use path::{tau_evaluate, tau_evaluate_vector, TauPath};
pub use sampler::{empirical_lower_orthant, epsilon_fill, mc_lower_orthant, sample_mvgamma, GammaSample};
pub use verify::{
    default_tau_grid, verify_theorem, Curve, CurvePoint, HypothesisCheck, IdentityCheck, Margin, Method, Status,
    TheoremInput, VerificationReport, VerifyOptions, COEFFICIENT_TOL, IDENTITY_REL_TOL, MC_SIGMAS, ROUNDOFF,
};
