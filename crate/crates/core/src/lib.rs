//! Multivariate gamma distributions in the Krishnamoorthy–Parthasarathy sense.
//!
//! A `Γₙ(α, R)` distribution is defined through its Laplace transform
//! `|Iₙ + R T|^{-α}` with a correlation matrix `R` and `T = diag(t₁, …, tₙ)`.
//! The crate provides
//!
//! * [`series`]: the coefficient expansion of the CDF into products of
//!   univariate gamma CDFs, with rigorous truncation brackets when all
//!   coefficients are non-negative;
//! * [`factorial`]: `R = D + AAᵗ` representations and the associated
//!   mixture formulas (one-dimensional quadrature for one factor, Wishart
//!   Monte Carlo otherwise);
//! * [`infdiv`]: the cycle and signature/M-matrix criteria for infinite
//!   divisibility of `|Iₙ + R T|^{-1}`;
//! * [`lab`]: correlation paths, monotonicity coefficients and numerical
//!   verification of correlation inequalities;
//! * [`tail`]: block-product and second-order Taylor approximations for
//!   equicorrelated structures.
//!
//! Everything is dense and small: dimensions above 8 are not a goal.

// `!(v > 0.0)` is used on purpose: it rejects NaN along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod factorial;
pub mod infdiv;
pub mod lab;
pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod series;
pub mod special;
pub mod tail;

pub use error::{Error, Result};
pub use linalg::{CorrMatrix, IndexSet, Matrix, Partition};
pub use special::Shape;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
