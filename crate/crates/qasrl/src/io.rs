//! JSON-lines files and CoNLL-U input.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qasrl_core::corpus::{parse_conllu, ConlluError};
use qasrl_core::record::{Record, RecordError};
use qasrl_core::Sentence;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{source_name}: line {line}: {message}")]
    Parse { source_name: String, line: usize, message: String },
    #[error("{source_name}: line {line}: {source}")]
    Record { source_name: String, line: usize, source: RecordError },
    #[error("{}: {source}", path.display())]
    Conllu { path: PathBuf, source: ConlluError },
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

pub fn read_text(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Parses one JSON value per non-blank line.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, source_name: &str) -> Result<Vec<T>, DataError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DataError::Parse {
                source_name: source_name.to_string(),
                line: i + 1,
                message: strip_position(&e.to_string()),
            })
        })
        .collect()
}

// serde_json appends " at line 1 column N", which is noise for one-line values
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DataError> {
    parse_jsonl(&read_text(path)?, &path.display().to_string())
}

/// Parses and validates a record file's contents.
pub fn parse_records(text: &str, source_name: &str) -> Result<Vec<Record>, DataError> {
    let mut records: Vec<Record> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| DataError::Parse { source_name: source_name.to_string(), line: i + 1, message };
        let r: Record = serde_json::from_str(line).map_err(|e| parse(strip_position(&e.to_string())))?;
        r.validate()
            .map_err(|source| DataError::Record { source_name: source_name.to_string(), line: i + 1, source })?;
        records.push(r);
    }
    Ok(records)
}

pub fn read_records(path: &Path) -> Result<Vec<Record>, DataError> {
    parse_records(&read_text(path)?, &path.display().to_string())
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), DataError> {
    write_text(path, &to_jsonl(items))
}

pub fn write_records(path: &Path, records: &[Record]) -> Result<(), DataError> {
    write_jsonl(path, records)
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_text(path: &Path, text: &str) -> Result<(), DataError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or_default()
    ));
    {
        let file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = BufWriter::new(file);
        w.write_all(text.as_bytes()).map_err(io_err(&tmp))?;
        w.into_inner().map_err(|e| e.into_error()).and_then(|f| f.sync_all()).map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_conllu(path: &Path, language: &str) -> Result<Vec<Sentence>, DataError> {
    parse_conllu(&read_text(path)?, language).map_err(|source| DataError::Conllu { path: path.to_path_buf(), source })
}
