//! Line-delimited record files: one JSON header line naming the schema and its
//! version, followed by one JSON record per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("{path}: missing or malformed header line")]
    MissingHeader { path: String },
    #[error("{path}: schema {found:?} v{version}, expected {expected:?} v{SCHEMA_VERSION}")]
    SchemaMismatch { path: String, found: String, version: u32, expected: String },
    #[error("{path}, line {line}: {source}")]
    Parse { path: String, line: usize, source: serde_json::Error },
    #[error("{0} already exists (pass --force to overwrite)")]
    Exists(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

pub fn to_string<T: Serialize>(schema: &str, records: &[T]) -> Result<String, RecordError> {
    let mut out = serde_json::to_string(&Header { schema: schema.into(), version: SCHEMA_VERSION })?;
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

fn parse_lines<T: DeserializeOwned>(
    lines: impl Iterator<Item = std::io::Result<String>>,
    schema: &str,
    path: &str,
) -> Result<Vec<T>, RecordError> {
    let mut lines = lines.enumerate();
    let header: Header = match lines.next() {
        Some((_, Ok(line))) => {
            serde_json::from_str(&line).map_err(|_| RecordError::MissingHeader { path: path.into() })?
        }
        Some((_, Err(e))) => return Err(e.into()),
        None => return Err(RecordError::MissingHeader { path: path.into() }),
    };
    if header.schema != schema || header.version != SCHEMA_VERSION {
        return Err(RecordError::SchemaMismatch {
            path: path.into(),
            found: header.schema,
            version: header.version,
            expected: schema.into(),
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| RecordError::Parse {
            path: path.into(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

pub fn from_str<T: DeserializeOwned>(schema: &str, text: &str) -> Result<Vec<T>, RecordError> {
    parse_lines(text.lines().map(|l| Ok(l.to_string())), schema, "<string>")
}

pub fn read<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>, RecordError> {
    let reader = BufReader::new(File::open(path)?);
    parse_lines(reader.lines(), schema, &path.display().to_string())
}

/// Writes a whole record file. Refuses to replace an existing file unless `force`.
pub fn write<T: Serialize>(path: &Path, schema: &str, records: &[T], force: bool) -> Result<(), RecordError> {
    if path.exists() && !force {
        return Err(RecordError::Exists(path.display().to_string()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(to_string(schema, records)?.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Append-only writer used for incremental, resumable result files.
pub struct Appender {
    file: File,
}

impl Appender {
    /// Opens `path` for appending, writing the header when the file is new or empty.
    pub fn open(path: &Path, schema: &str) -> Result<Self, RecordError> {
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            let header = serde_json::to_string(&Header { schema: schema.into(), version: SCHEMA_VERSION })?;
            writeln!(file, "{header}")?;
        }
        Ok(Self { file })
    }

    pub fn append<T: Serialize>(&mut self, record: &T) -> Result<(), RecordError> {
        let line = serde_json::to_string(record)?;
        writeln!(self.file, "{line}")?;
        self.file.flush()?;
        Ok(())
    }
}
