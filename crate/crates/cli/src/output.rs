use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use saldissect::Warning;

pub fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.with_context(|| format!("missing required parameter {flag} (flag or config key)"))
}

/// `out.csv` -> `out.warnings.jsonl`; directories get `warnings.jsonl` inside.
pub fn warnings_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("warnings.jsonl")
    } else {
        out.with_extension("warnings.jsonl")
    }
}

/// `out.csv` + `"means"` -> `out.means.csv`.
pub fn sibling(out: &Path, tag: &str, ext: &str) -> PathBuf {
    out.with_extension(format!("{tag}.{ext}"))
}

fn create(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

/// Writes one JSON object per line; the file is always written so reruns
/// leave no stale log behind.
pub fn write_warnings(path: &Path, warnings: &[Warning]) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    for warning in warnings {
        serde_json::to_writer(&mut w, warning)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    if !warnings.is_empty() {
        log::warn!("{} warnings written to {}", warnings.len(), path.display());
    }
    Ok(())
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Shortest round-trip decimal; empty for missing values.
pub fn fmt_f64(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v}"),
        _ => String::new(),
    }
}

/// Fixed-precision cell for Markdown tables.
pub fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:.2}"),
        _ => "–".into(),
    }
}

pub fn markdown_table(headers: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("| {} |\n", headers.join(" | ")));
    out.push_str(&format!("|{}\n", headers.iter().map(|_| "---|").collect::<String>()));
    for row in rows {
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    out
}
