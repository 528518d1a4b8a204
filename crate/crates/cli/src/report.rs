//! Structured errors and table output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::Format;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Usage,
    Config,
    Computation,
    Validation,
    Io,
}

/// Printed to stderr as JSON when a command fails.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            field: None,
            file: None,
            line: None,
            column: None,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, message)
    }

    pub fn with_field(mut self, field: Option<String>) -> Self {
        self.field = field;
        self
    }

    pub fn with_position(mut self, file: &Path, line: usize, column: usize) -> Self {
        self.file = Some(file.display().to_string());
        // serde_json reports 0 when the error has no position
        self.line = (line > 0).then_some(line);
        self.column = (column > 0).then_some(column);
        self
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Usage | ErrorKind::Config => 2,
            ErrorKind::Computation | ErrorKind::Io => 3,
            ErrorKind::Validation => 4,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<mcbeam::Error> for CliError {
    fn from(e: mcbeam::Error) -> Self {
        CliError::new(ErrorKind::Computation, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(ErrorKind::Io, e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::new(ErrorKind::Io, e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::new(ErrorKind::Io, e.to_string())
    }
}

/// Ordered key/value provenance written ahead of every table.
#[derive(Clone, Debug, Default)]
pub struct Metadata(Vec<(String, Value)>);

impl Metadata {
    pub fn push(&mut self, key: impl Into<String>, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("metadata serializes");
        self.0.push((key.into(), v));
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Serialize) -> Self {
        self.push(key, value);
        self
    }

    fn header_lines(&self) -> Vec<String> {
        self.0
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("# {k}: {s}"),
                other => format!("# {k}: {other}"),
            })
            .collect()
    }

    fn to_object(&self) -> Value {
        Value::Object(self.0.iter().cloned().collect())
    }
}

/// Writes `rows` to `dir/stem.{csv,json}`: CSV gets `# key: value` header
/// lines before the column header, JSON a `{metadata, rows}` document.
pub fn write_table<R: Serialize>(
    dir: &Path,
    stem: &str,
    format: Format,
    meta: &Metadata,
    rows: &[R],
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::new(ErrorKind::Io, format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    let file = File::create(&path)
        .map_err(|e| CliError::new(ErrorKind::Io, format!("cannot write {}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Csv => {
            for line in meta.header_lines() {
                writeln!(out, "{line}")?;
            }
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let doc = serde_json::json!({ "metadata": meta.to_object(), "rows": rows });
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
            out.flush()?;
        }
    }
    Ok(path)
}
