//! Report documents. Every file starts with the command name and the fully
//! resolved configuration (including the seed); nothing time-dependent is
//! written, so identical configurations give byte-identical files.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// A report file held in memory until the whole command has succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

impl OutputFile {
    pub fn new(name: impl Into<String>, contents: String) -> Self {
        OutputFile {
            name: name.into(),
            contents,
        }
    }
}

/// `#`-prefixed lines naming the command and its resolved configuration.
pub fn comment_header<S: Serialize>(command: &str, config: &S) -> Result<String> {
    Ok(format!(
        "# growthlab {command}\n# config: {}\n",
        serde_json::to_string(config)?
    ))
}

/// A CSV document: comment header, column names, then one record per row.
pub fn csv_document(header: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns)?;
    for row in rows {
        w.write_record(row)?;
    }
    let body = String::from_utf8(w.into_inner().context("flushing csv")?)?;
    Ok(format!("{header}{body}"))
}

/// Pretty JSON with a trailing newline.
pub fn json_document<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Shortest round-trip formatting; `None` becomes an empty cell.
pub fn num(v: f64) -> String {
    v.to_string()
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_all(dir: &Path, files: &[OutputFile]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for f in files {
        let path = dir.join(&f.name);
        std::fs::write(&path, &f.contents)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
