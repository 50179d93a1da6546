use std::path::PathBuf;

use mvgamma::Error;
use serde_json::{json, Value};
use thiserror::Error as ThisError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;
pub const EXIT_UNCONVERGED: i32 = 5;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{}:{line}:{col}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, col: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::Hypothesis(_)) => EXIT_HYPOTHESIS,
            CliError::Core(Error::Degenerate(_)) => EXIT_INCONCLUSIVE,
            CliError::Core(Error::ConvergenceRisk { .. }) => EXIT_UNCONVERGED,
            _ => EXIT_INPUT,
        }
    }

    /// Error object for the report; matrix locations are one-based here.
    pub fn to_json(&self) -> Value {
        let mut v = json!({ "message": self.to_string() });
        let (kind, extra) = match self {
            CliError::Parse { line, col, .. } => ("parse", json!({ "line": line, "col": col })),
            CliError::Io { .. } => ("io", Value::Null),
            CliError::Usage(_) => ("usage", Value::Null),
            CliError::Core(e) => match e {
                Error::Asymmetric { row, col, diff } => (
                    "asymmetric",
                    json!({ "row": row + 1, "col": col + 1, "diff": diff,
                            "message": format!("matrix is not symmetric at ({}, {}): |r_ij - r_ji| = {diff:.3e}", row + 1, col + 1) }),
                ),
                Error::NonUnitDiagonal { index, value } => (
                    "non-unit-diagonal",
                    json!({ "row": index + 1, "col": index + 1, "value": value,
                            "message": format!("diagonal entry ({0}, {0}) is {value}, expected 1", index + 1) }),
                ),
                Error::CorrelationOutOfRange { row, col, value } => (
                    "correlation-out-of-range",
                    json!({ "row": row + 1, "col": col + 1, "value": value,
                            "message": format!("entry ({}, {}) = {value} is outside (-1, 1)", row + 1, col + 1) }),
                ),
                Error::NotPositiveDefinite { min_eigenvalue } => {
                    ("not-positive-definite", json!({ "min_eigenvalue": min_eigenvalue }))
                }
                Error::Singular { condition } => ("singular", json!({ "condition": condition })),
                Error::InvalidArgument(_) => ("invalid-argument", Value::Null),
                Error::Domain(_) => ("domain", Value::Null),
                Error::ConvergenceRisk { norm } => ("convergence-risk", json!({ "norm": norm })),
                Error::PathInvalid { tau, .. } => ("path-invalid", json!({ "tau": tau })),
                Error::Hypothesis(_) => ("hypothesis", Value::Null),
                Error::Degenerate(_) => ("degenerate", Value::Null),
            },
        };
        v["kind"] = kind.into();
        if let Value::Object(m) = extra {
            for (k, x) in m {
                v[k] = x;
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locations_are_one_based() {
        let e = CliError::Core(Error::Asymmetric { row: 0, col: 1, diff: 0.1 });
        let v = e.to_json();
        assert_eq!(v["row"], 1);
        assert_eq!(v["col"], 2);
        assert!(v["message"].as_str().unwrap().contains("(1, 2)"));
        assert_eq!(e.exit_code(), EXIT_INPUT);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Core(Error::Hypothesis("x".into())).exit_code(), EXIT_HYPOTHESIS);
        assert_eq!(CliError::Core(Error::ConvergenceRisk { norm: 1.0 }).exit_code(), EXIT_UNCONVERGED);
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_INPUT);
    }
}
