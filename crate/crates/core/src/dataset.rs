//! CSV dataset ingestion and the dataset registry.
//!
//! Files are comma-separated with `.` decimals. A first row whose feature
//! cells are not all numeric is taken as a header. Label columns are
//! removed before parsing, so they may hold arbitrary text.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LabelPolicy {
    None,
    DropLast,
    DropFirst,
    /// Drop the column with this header name; requires a header row.
    DropNamed(String),
}

impl fmt::Display for LabelPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => f.write_str("none"),
            Self::DropLast => f.write_str("drop-last"),
            Self::DropFirst => f.write_str("drop-first"),
            Self::DropNamed(c) => write!(f, "drop-named:{c}"),
        }
    }
}

impl FromStr for LabelPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "drop-last" => Ok(Self::DropLast),
            "drop-first" => Ok(Self::DropFirst),
            _ => match s.strip_prefix("drop-named:") {
                Some(col) if !col.is_empty() => Ok(Self::DropNamed(col.to_string())),
                _ => Err(Error::InvalidInput(format!(
                    "unknown label policy {s:?} (none, drop-last, drop-first, drop-named:<col>)"
                ))),
            },
        }
    }
}

impl TryFrom<String> for LabelPolicy {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LabelPolicy> for String {
    fn from(p: LabelPolicy) -> String {
        p.to_string()
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    let v = s.trim().parse::<f64>().ok()?;
    v.is_finite().then_some(v)
}

/// Parses CSV text into a feature matrix, dropping the label column chosen
/// by `policy`. `path` only labels error messages.
pub fn parse_dataset(
    text: &str,
    path: &Path,
    policy: &LabelPolicy,
    scale: bool,
) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut records: Vec<(usize, Vec<String>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: e.position().map_or(0, |p| p.line() as usize),
            col: 0,
            msg: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        records.push((line, rec.iter().map(str::to_string).collect()));
    }
    let Some((_, first)) = records.first() else {
        return Err(Error::InvalidInput(format!(
            "{}: no data rows",
            path.display()
        )));
    };
    let width = first.len();

    let drop_col = |header: Option<&[String]>| -> Result<Option<usize>> {
        Ok(match policy {
            LabelPolicy::None => None,
            LabelPolicy::DropFirst => Some(0),
            LabelPolicy::DropLast => Some(width - 1),
            LabelPolicy::DropNamed(name) => {
                let header = header.ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "{}: drop-named:{name} needs a header row",
                        path.display()
                    ))
                })?;
                Some(header.iter().position(|h| h == name).ok_or_else(|| {
                    Error::InvalidInput(format!("{}: no column named {name:?}", path.display()))
                })?)
            }
        })
    };

    // A header is a first row whose non-label cells are not all numeric.
    // For drop-named the label column is only known once the header is read,
    // so any non-numeric cell marks the header.
    let has_header = match policy {
        LabelPolicy::DropNamed(_) => first.iter().any(|c| parse_cell(c).is_none()),
        _ => {
            let skip = drop_col(None)?;
            first
                .iter()
                .enumerate()
                .any(|(i, c)| Some(i) != skip && parse_cell(c).is_none())
        }
    };
    let skip = drop_col(has_header.then_some(first.as_slice()))?;
    let body = if has_header {
        &records[1..]
    } else {
        &records[..]
    };

    let mut rows = Vec::with_capacity(body.len());
    for (line, rec) in body {
        if rec.len() != width {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: *line,
                col: rec.len().min(width) + 1,
                msg: format!("expected {width} cells, found {}", rec.len()),
            });
        }
        let mut row = Vec::with_capacity(width);
        for (i, cell) in rec.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            let v = parse_cell(cell).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                row: *line,
                col: i + 1,
                msg: if cell.is_empty() || cell == "?" {
                    "missing value".to_string()
                } else {
                    format!("non-numeric value {cell:?}")
                },
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.len() < DataMatrix::MIN_ROWS {
        return Err(Error::InvalidInput(format!(
            "{}: {} data rows, need at least {}",
            path.display(),
            rows.len(),
            DataMatrix::MIN_ROWS
        )));
    }
    let data = DataMatrix::from_rows(&rows)?;
    Ok(if scale { data.min_max_scaled() } else { data })
}

pub fn load_dataset(path: &Path, policy: &LabelPolicy, scale: bool) -> Result<DataMatrix> {
    let text = fs::read_to_string(path)?;
    parse_dataset(&text, path, policy, scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
    pub label_policy: LabelPolicy,
}

/// JSON list of datasets: `{"datasets": [{"name", "path", "label_policy"}]}`.
/// Relative paths are resolved against the registry file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub datasets: Vec<DatasetEntry>,
}

impl Registry {
    pub fn load(path: &Path) -> Result<Self> {
        let mut reg: Registry = serde_json::from_str(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut reg.datasets {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        Ok(reg)
    }

    pub fn get(&self, name: &str) -> Option<&DatasetEntry> {
        self.datasets.iter().find(|d| d.name == name)
    }
}
