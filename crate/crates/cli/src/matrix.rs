//! Matrix ingestion: CSV, JSON, and the built-in 4×4 block family.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mvgamma::linalg::{block4, CorrMatrix, Matrix};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    /// The 4×4 block matrix with cross correlations scaled by `--tau`.
    Block4,
}

#[derive(Clone, Debug, Args)]
pub struct MatrixArgs {
    /// CSV (n rows of n values) or JSON file ({"n", "entries", "labels"}).
    pub matrix: Option<PathBuf>,
    /// Use a built-in family instead of a file.
    #[arg(long, value_enum, conflicts_with = "matrix")]
    pub family: Option<Family>,
    /// Family parameter.
    #[arg(long, default_value_t = 1.0, requires = "family")]
    pub tau: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonMatrix {
    n: usize,
    entries: Vec<f64>,
    #[serde(default)]
    #[allow(dead_code)]
    labels: Option<Vec<String>>,
}

fn parse_csv(path: &Path, text: &str) -> Result<Matrix, CliError> {
    let parse_err = |line: usize, col: usize, message: String| CliError::Parse { path: path.to_owned(), line, col, message };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(',')
            .enumerate()
            .map(|(j, cell)| {
                let c = cell.trim();
                c.parse::<f64>().map_err(|_| parse_err(i + 1, j + 1, format!("not a number: {c:?}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(parse_err(1, 1, "no rows".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(parse_err(i + 1, r.len().min(n) + 1, format!("row {} has {} entries, expected {n}", i + 1, r.len())));
    }
    Ok(Matrix::from_rows(&rows)?)
}

fn parse_json(path: &Path, text: &str) -> Result<Matrix, CliError> {
    let m: JsonMatrix = serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_owned(),
        line: e.line(),
        col: e.column(),
        message: e.to_string(),
    })?;
    if m.entries.len() != m.n * m.n {
        return Err(CliError::Parse {
            path: path.to_owned(),
            line: 1,
            col: 1,
            message: format!("\"entries\" has {} values, expected n*n = {}", m.entries.len(), m.n * m.n),
        });
    }
    if let Some(labels) = &m.labels {
        if labels.len() != m.n {
            return Err(CliError::Parse {
                path: path.to_owned(),
                line: 1,
                col: 1,
                message: format!("{} labels for n = {}", labels.len(), m.n),
            });
        }
    }
    Ok(Matrix::from_fn(m.n, m.n, |i, j| m.entries[i * m.n + j]))
}

/// Raw matrix from a file; JSON when the extension says so or the text starts with `{`.
pub fn read_matrix(path: &Path) -> Result<Matrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_owned(), source: e })?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) || text.trim_start().starts_with('{');
    if json {
        parse_json(path, &text)
    } else {
        parse_csv(path, &text)
    }
}

impl MatrixArgs {
    pub fn raw(&self) -> Result<Matrix, CliError> {
        match (&self.matrix, self.family) {
            (Some(p), _) => read_matrix(p),
            (None, Some(Family::Block4)) => Ok(block4(self.tau)),
            (None, None) => Err(CliError::Usage("a matrix file or --family is required".into())),
        }
    }

    pub fn load(&self) -> Result<CorrMatrix, CliError> {
        Ok(CorrMatrix::new(self.raw()?)?)
    }
}

/// SHA-256 over the dimension and the little-endian bits of the entries, so
/// the same matrix from CSV and JSON hashes the same.
pub fn digest(m: &Matrix) -> String {
    let mut h = Sha256::new();
    h.update((m.rows() as u64).to_le_bytes());
    for v in m.as_slice() {
        h.update(v.to_bits().to_le_bytes());
    }
    let bytes = h.finalize();
    let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_agree() {
        let p = Path::new("m.csv");
        let a = parse_csv(p, "1, 0.5\n0.5, 1\n").unwrap();
        let b = parse_json(p, r#"{"n": 2, "entries": [1, 0.5, 0.5, 1], "labels": ["a", "b"]}"#).unwrap();
        assert_eq!(a, b);
        assert_eq!(digest(&a), digest(&b));
        assert_ne!(digest(&a), digest(&block4(1.0)));
    }

    #[test]
    fn csv_errors_carry_location() {
        let p = Path::new("m.csv");
        match parse_csv(p, "1,0.5\n0.5,x\n") {
            Err(CliError::Parse { line, col, .. }) => assert_eq!((line, col), (2, 2)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_csv(p, "1,0.5\n0.5\n"), Err(CliError::Parse { line: 2, .. })));
        assert!(parse_json(p, r#"{"n": 2, "entries": [1, 0]}"#).is_err());
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let m = parse_csv(Path::new("m"), "# identity\n\n1,0\n0,1\n").unwrap();
        assert_eq!(m, Matrix::identity(2));
    }
}
