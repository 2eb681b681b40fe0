//! Comma-separated tables with `#` comment headers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::CliError;

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `header` as a `#` comment line followed by one row per entry.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>, sep: &str) -> Result<(), CliError> {
    write_annotated(path, &[], header, rows, sep)
}

/// Like [`write_table`], with extra `# note` lines before the header.
pub fn write_annotated(
    path: &Path,
    notes: &[String],
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
    sep: &str,
) -> Result<(), CliError> {
    let mut out = String::new();
    for note in notes {
        let _ = writeln!(out, "# {note}");
    }
    let _ = writeln!(out, "# {}", header.join(sep));
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt).collect();
        let _ = writeln!(out, "{}", cells.join(sep));
    }
    fs::write(path, out).map_err(CliError::io(path))
}

/// Reads numeric rows, skipping blank and `#` lines; every row must have `columns` fields.
pub fn read_table(path: &Path, columns: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Parse {
                path: path.into(),
                message: format!("line {}: {e}", i + 1),
            })?;
        if row.len() != columns {
            return Err(CliError::Parse {
                path: path.into(),
                message: format!("line {}: expected {columns} columns, found {}", i + 1, row.len()),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}
