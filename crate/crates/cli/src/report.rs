use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

#[derive(Serialize)]
pub struct Versions {
    pub mvgamma: &'static str,
    pub cli: &'static str,
}

impl Default for Versions {
    fn default() -> Self {
        Versions { mvgamma: mvgamma::VERSION, cli: env!("CARGO_PKG_VERSION") }
    }
}

/// Everything a run prints. `results` is the deterministic part.
#[derive(Serialize)]
pub struct RunReport {
    pub command: String,
    pub argv: Vec<String>,
    pub input_digest: Option<String>,
    pub seed: Option<u64>,
    pub versions: Versions,
    pub status: String,
    pub exit_code: i32,
    pub results: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Value>,
    pub threads: usize,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn to_json(&self, pretty: bool) -> String {
        let s = if pretty { serde_json::to_string_pretty(self) } else { serde_json::to_string(self) };
        s.expect("report serializes")
    }
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |e| CliError::Io { path: path.to_owned(), source: e };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| CliError::Usage(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}

/// Two space-separated columns, `#` header lines first.
pub fn plot_data(header: &[String], rows: &[(f64, f64)]) -> String {
    let mut out = String::new();
    for h in header {
        out.push_str("# ");
        out.push_str(h);
        out.push('\n');
    }
    for (a, b) in rows {
        out.push_str(&format!("{a:.17e} {b:.17e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_data_shape() {
        let s = plot_data(&["y value".into()], &[(1.0, 2.0), (3.0, -0.5)]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with('#'));
        let cols: Vec<f64> = lines[2].split(' ').map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols, vec![3.0, -0.5]);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_atomic(&p, "a").unwrap();
        write_atomic(&p, "b").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "b");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
