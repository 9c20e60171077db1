//! Path CSV and JSON file formats.
//!
//! A path file has one row per segment, each row holding the `d` displacement
//! components. An optional `# dim=<d>` line fixes the dimension; it is
//! required when the file has no rows (the constant path). Other lines
//! starting with `#` are comments; blank lines are ignored.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use sigpath_core::PiecewiseLinearPath;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: line {line}: {message}")]
    Csv {
        origin: String,
        line: u64,
        message: String,
    },
    #[error("{origin}: {message}")]
    Format { origin: String, message: String },
    #[error("{origin}: {source}")]
    Json {
        origin: String,
        #[source]
        source: serde_json::Error,
    },
}

fn read_to_string(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Dimension from a `# dim=<d>` header line, if present.
fn header_dim(text: &str, origin: &str) -> Result<Option<(usize, u64)>, InputError> {
    for (i, line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let trimmed = line.trim();
        let Some(comment) = trimmed.strip_prefix('#') else {
            if trimmed.is_empty() {
                continue;
            }
            return Ok(None);
        };
        let comment = comment.trim();
        if let Some(value) = comment.strip_prefix("dim") {
            let value = value.trim_start().strip_prefix('=').map(str::trim);
            let dim = value.and_then(|v| v.parse::<usize>().ok()).filter(|&d| d > 0);
            return match dim {
                Some(d) => Ok(Some((d, line_no))),
                None => Err(InputError::Csv {
                    origin: origin.into(),
                    line: line_no,
                    message: format!("malformed header {trimmed:?}, expected `# dim=<d>` with d >= 1"),
                }),
            };
        }
    }
    Ok(None)
}

/// Parses path CSV text; `origin` names the source in diagnostics.
pub fn parse_path_csv(text: &str, origin: &str) -> Result<PiecewiseLinearPath, InputError> {
    let declared = header_dim(text, origin)?;
    let mut dim = declared.map(|(d, _)| d);
    let mut segments = Vec::new();
    // line by line: the csv reader's own line counter skips comment lines
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let bad = |message: String| InputError::Csv {
            origin: origin.into(),
            line,
            message,
        };
        let record = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(trimmed.as_bytes())
            .records()
            .next()
            .expect("non-empty line yields a record")
            .map_err(|e| bad(e.to_string()))?;
        let expected = *dim.get_or_insert(record.len());
        if record.len() != expected {
            return Err(bad(format!("expected {expected} columns, found {}", record.len())));
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, field)| match field.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                Ok(_) => Err(bad(format!("column {}: non-finite value {field:?}", col + 1))),
                Err(_) => Err(bad(format!("column {}: cannot parse {field:?} as a number", col + 1))),
            })
            .collect::<Result<Vec<f64>, _>>()?;
        segments.push(row);
    }
    let dim = dim.ok_or_else(|| InputError::Format {
        origin: origin.into(),
        message: "no segments and no `# dim=<d>` header; cannot infer the dimension".into(),
    })?;
    PiecewiseLinearPath::new(dim, segments).map_err(|e| InputError::Format {
        origin: origin.into(),
        message: e.to_string(),
    })
}

pub fn read_path_csv(path: &Path) -> Result<PiecewiseLinearPath, InputError> {
    parse_path_csv(&read_to_string(path)?, &path.display().to_string())
}

/// Writes the `# dim=<d>` header and one row per segment.
pub fn path_to_csv(path: &PiecewiseLinearPath) -> String {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for v in path.segments() {
        writer
            .write_record(v.iter().map(|x| x.to_string()))
            .expect("writing to memory");
    }
    let body = String::from_utf8(writer.into_inner().expect("flush to memory")).expect("ascii output");
    format!("# dim={}\n{body}", path.dim())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, InputError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| InputError::Json {
        origin: path.display().to_string(),
        source,
    })
}
