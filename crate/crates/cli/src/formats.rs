//! On-disk formats.
//!
//! * Matrices: CSV, one matrix row per line, shortest round-trip decimals.
//! * Angle matrices: dense `N × N` CSV, zeros on and below the diagonal.
//! * Series: a directory holding `manifest.json` and one numbered CSV per basis.
//! * Reports: pretty JSON; key order follows struct field order.
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use eigenorient::{Matrix, Method};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

/// Index file of a series directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesManifest {
    pub dim: usize,
    /// Set when the bases are oriented.
    #[serde(default)]
    pub method: Option<Method>,
    /// Records per estimation window, when known.
    #[serde(default)]
    pub records: Option<usize>,
    pub timestamps: Vec<i64>,
    pub eigenvalues: Vec<Vec<f64>>,
    pub bases: Vec<String>,
}

pub fn numbered(prefix: &str, index: usize, ext: &str) -> String {
    format!("{prefix}_{index:04}.{ext}")
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Numeric(format!("cannot serialize {}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &Matrix) -> CliResult<()> {
    write_atomic(path, matrix_to_csv(m).as_bytes())
}

/// Reads a numeric CSV. With `allow_header`, a first line containing any
/// non-numeric field is skipped.
fn read_numeric_csv(path: &Path, allow_header: bool) -> CliResult<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let parse_err = |line: u64, column: usize, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };

    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, 0, e.to_string())
        })?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if k == 0 && allow_header && record.iter().any(|f| f.parse::<f64>().is_err()) {
            cols = Some(record.len());
            continue;
        }
        if let Some(c) = cols {
            if record.len() != c {
                return Err(parse_err(
                    line,
                    record.len().min(c) + 1,
                    format!("expected {c} fields, found {}", record.len()),
                ));
            }
        }
        cols = Some(record.len());
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, j + 1, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, j + 1, format!("not finite: {field:?}")));
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(parse_err(1, 1, "no numeric rows".into()));
    }
    Matrix::new(rows, cols, data).map_err(CliError::from)
}

pub fn read_matrix(path: &Path) -> CliResult<Matrix> {
    read_numeric_csv(path, false)
}

/// `records × features` panel; an optional header line is skipped.
pub fn read_panel(path: &Path) -> CliResult<Matrix> {
    read_numeric_csv(path, true)
}

pub fn is_series_dir(path: &Path) -> bool {
    path.join(MANIFEST).is_file()
}

pub fn read_manifest(dir: &Path) -> CliResult<SeriesManifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest: SeriesManifest = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.clone(),
        line: e.line() as u64,
        column: e.column(),
        message: e.to_string(),
    })?;
    let bad = |message: String| CliError::Manifest {
        path: path.clone(),
        message,
    };
    let n = manifest.bases.len();
    if manifest.timestamps.len() != n || manifest.eigenvalues.len() != n {
        return Err(bad(format!(
            "{n} bases, {} timestamps and {} eigenvalue lists",
            manifest.timestamps.len(),
            manifest.eigenvalues.len()
        )));
    }
    if let Some(k) = manifest
        .eigenvalues
        .iter()
        .position(|e| e.len() != manifest.dim)
    {
        return Err(bad(format!(
            "eigenvalue list {k} does not have {} entries",
            manifest.dim
        )));
    }
    Ok(manifest)
}

/// Reads a series directory: manifest plus every basis it lists.
pub fn read_series(dir: &Path) -> CliResult<(SeriesManifest, Vec<Matrix>)> {
    let manifest = read_manifest(dir)?;
    let mut bases = Vec::with_capacity(manifest.bases.len());
    for name in &manifest.bases {
        let path = dir.join(name);
        let m = read_matrix(&path)?;
        if m.rows() != manifest.dim || m.cols() != manifest.dim {
            return Err(CliError::Manifest {
                path,
                message: format!(
                    "basis is {}x{}, manifest declares dimension {}",
                    m.rows(),
                    m.cols(),
                    manifest.dim
                ),
            });
        }
        bases.push(m);
    }
    Ok((manifest, bases))
}

/// Writes `bases` as numbered CSVs plus the manifest describing them.
pub fn write_series(
    dir: &Path,
    method: Option<Method>,
    records: Option<usize>,
    timestamps: &[i64],
    eigenvalues: &[Vec<f64>],
    bases: &[Matrix],
) -> CliResult<SeriesManifest> {
    ensure_dir(dir)?;
    let dim = bases.first().map_or(0, Matrix::rows);
    let mut names = Vec::with_capacity(bases.len());
    for (k, b) in bases.iter().enumerate() {
        let name = numbered("basis", k, "csv");
        write_matrix(&dir.join(&name), b)?;
        names.push(name);
    }
    let manifest = SeriesManifest {
        dim,
        method,
        records,
        timestamps: timestamps.to_vec(),
        eigenvalues: eigenvalues.to_vec(),
        bases: names,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}
