//! Report rendering and artifact output.
//!
//! Every command produces one report body (a JSON value) that can be
//! rendered as pretty JSON or as a flattened `field,value` CSV. The two
//! renderings carry identical numeric content: leaves are serialized with
//! shortest round-trip formatting in both, so re-parsing either file
//! recovers bit-identical floats. The generation timestamp lives on a
//! single header line (`"generated_at"` in JSON, `# generated_at=` in CSV)
//! and [`strip_timestamp`] removes it, leaving a byte-comparable payload.

use std::fmt;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use crate::solver::Snapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Format, String> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format `{other}` (expected json or csv)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

/// RFC 3339 UTC timestamp for the report header.
pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true)
}

/// Renders `body` in the requested format with a `generated_at` header.
pub fn render(body: &Value, format: Format) -> String {
    render_at(body, format, &timestamp())
}

/// [`render`] with the caller supplying the header timestamp.
pub fn render_at(body: &Value, format: Format, generated_at: &str) -> String {
    match format {
        Format::Json => {
            let wrapped = serde_json::json!({
                "generated_at": generated_at,
                "report": body,
            });
            let mut text = serde_json::to_string_pretty(&wrapped).expect("report serializes");
            text.push('\n');
            text
        }
        Format::Csv => {
            let mut text = format!("# generated_at={generated_at}\nfield,value\n");
            for (path, cell) in flatten(body) {
                text.push_str(&path);
                text.push(',');
                text.push_str(&cell);
                text.push('\n');
            }
            text
        }
    }
}

/// Depth-first `(path, rendered leaf)` rows for the CSV view. Object keys
/// join with `.`, array elements with `[i]`; numbers keep serde_json's
/// shortest round-trip text so CSV and JSON agree bit for bit.
pub fn flatten(value: &Value) -> Vec<(String, String)> {
    let mut rows = Vec::new();
    walk(value, String::new(), &mut rows);
    rows
}

fn walk(value: &Value, path: String, rows: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            for (key, item) in map {
                let sub = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                walk(item, sub, rows);
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                walk(item, format!("{path}[{i}]"), rows);
            }
        }
        Value::String(s) => rows.push((path, csv_quote(s))),
        leaf => rows.push((path, leaf.to_string())),
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Drops the timestamp header line so two renderings can be compared byte
/// for byte. Works on both formats; reports must not use the key
/// `generated_at` anywhere else.
pub fn strip_timestamp(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        if line.contains("generated_at") {
            continue;
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Writes through a sibling temp file and renames into place, so readers
/// never observe a half-written report.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// One solution snapshot as CSV with the pinned header
/// `eta,u_real,u_imag,exact_real,exact_imag,abs_err`.
pub fn snapshot_csv(eta: &[f64], snap: &Snapshot) -> String {
    assert_eq!(eta.len(), snap.u.len());
    assert_eq!(eta.len(), snap.exact.len());
    let mut out = String::from("eta,u_real,u_imag,exact_real,exact_imag,abs_err\n");
    for ((x, u), exact) in eta.iter().zip(&snap.u).zip(&snap.exact) {
        let err = (u - exact).norm();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            x, u.re, u.im, exact.re, exact.im, err
        ));
    }
    out
}
