//! Feature matrices and condensed pairwise dissimilarity matrices.
//!
//! A [`DissimilarityMatrix`] over `n` points stores only the `n(n-1)/2`
//! strictly upper-triangular entries in row-major order: pair `(i, j)` with
//! `i < j` lives at index `n*i - i*(i+1)/2 + (j - i - 1)`. Symmetry and the
//! zero diagonal follow from the storage layout. Every loop over entries in
//! this crate walks that canonical order, so reductions are reproducible.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major table of `rows` objects by `cols` features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub const MIN_ROWS: usize = 3;

    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if rows < Self::MIN_ROWS {
            return Err(Error::InvalidInput(format!(
                "need at least {} rows, got {rows}",
                Self::MIN_ROWS
            )));
        }
        if cols == 0 {
            return Err(Error::InvalidInput("no feature columns".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::InvalidInput(format!(
                "row {bad} has {} values, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rescales every column to `[0, 1]`. Constant columns become all zeros.
    pub fn min_max_scaled(&self) -> Self {
        let mut values = self.values.clone();
        for c in 0..self.cols {
            let (lo, hi) = (0..self.rows)
                .map(|r| self.values[r * self.cols + c])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            let span = hi - lo;
            for r in 0..self.rows {
                let v = &mut values[r * self.cols + c];
                *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
            }
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            values,
        }
    }
}

/// Symmetric, zero-diagonal distance matrix in condensed storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityMatrix {
    n: usize,
    entries: Vec<f64>,
}

#[inline]
pub fn condensed_len(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of pair `(i, j)`, `i < j < n`, in condensed storage.
#[inline]
pub fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    n * i - i * (i + 1) / 2 + (j - i - 1)
}

impl DissimilarityMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != condensed_len(n) {
            return Err(Error::Structure(format!(
                "{n} points need {} condensed entries, got {}",
                condensed_len(n),
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "entry {pos} is {} (entries must be finite and non-negative)",
                entries[pos]
            )));
        }
        Ok(Self { n, entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0.0; condensed_len(n)],
        }
    }

    /// Builds a matrix by evaluating `f(i, j)` for every pair `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(condensed_len(n));
        for i in 0..n {
            for j in i + 1..n {
                entries.push(f(i, j));
            }
        }
        Self::new(n, entries)
    }

    /// Internal constructor for entries already known to be valid.
    pub(crate) fn from_entries_unchecked(n: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), condensed_len(n));
        Self { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => 0.0,
            Less => self.entries[condensed_index(self.n, i, j)],
            Greater => self.entries[condensed_index(self.n, j, i)],
        }
    }

    /// Sub-matrix over `indices`, in the given order.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        let k = indices.len();
        let mut entries = Vec::with_capacity(condensed_len(k));
        for a in 0..k {
            for b in a + 1..k {
                entries.push(self.get(indices[a], indices[b]));
            }
        }
        Self::from_entries_unchecked(k, entries)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.n, self.entries.iter().map(|v| v * factor).collect())
    }

    /// Largest absolute entry-wise difference; `None` when sizes differ.
    pub fn max_abs_diff(&self, other: &Self) -> Option<f64> {
        (self.n == other.n).then(|| {
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
    }

    pub fn min_entry(&self) -> Option<f64> {
        self.entries.iter().copied().reduce(f64::min)
    }

    pub fn max_entry(&self) -> Option<f64> {
        self.entries.iter().copied().reduce(f64::max)
    }

    /// Writes the full square matrix as CSV, preceded by `# key: value`
    /// comment lines.
    pub fn write_square_csv<W: Write>(&self, mut w: W, meta: &[(&str, String)]) -> Result<()> {
        write_meta(&mut w, meta)?;
        let mut line = String::new();
        for i in 0..self.n {
            line.clear();
            for j in 0..self.n {
                if j > 0 {
                    line.push(',');
                }
                write!(line, "{}", self.get(i, j)).expect("write to String");
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// Writes the condensed entries as a single CSV row.
    pub fn write_condensed_csv<W: Write>(&self, mut w: W, meta: &[(&str, String)]) -> Result<()> {
        write_meta(&mut w, meta)?;
        let mut line = String::with_capacity(self.entries.len() * 8);
        for (k, v) in self.entries.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            write!(line, "{v}").expect("write to String");
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
        Ok(())
    }

    /// Reads either a square symmetric CSV or a single condensed row.
    /// Lines starting with `#` are ignored.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let rows = read_numeric_rows(r)?;
        match rows.as_slice() {
            [] => Err(Error::Format("empty matrix file".into())),
            [single] if single.len() != 1 => {
                let n = condensed_n(single.len()).ok_or_else(|| {
                    Error::Format(format!(
                        "{} values is not a condensed length n(n-1)/2",
                        single.len()
                    ))
                })?;
                Self::new(n, single.clone())
            }
            _ => {
                let n = rows.len();
                if let Some(bad) = rows.iter().position(|r| r.len() != n) {
                    return Err(Error::Format(format!(
                        "row {bad} has {} columns in a {n}-row square matrix",
                        rows[bad].len()
                    )));
                }
                for i in 0..n {
                    if rows[i][i] != 0.0 {
                        return Err(Error::Format(format!("non-zero diagonal at row {i}")));
                    }
                    for j in i + 1..n {
                        if rows[i][j] != rows[j][i] {
                            return Err(Error::Format(format!("asymmetric entries at ({i}, {j})")));
                        }
                    }
                }
                Self::from_fn(n, |i, j| rows[i][j])
            }
        }
    }
}

/// Inverse of [`condensed_len`].
pub fn condensed_n(len: usize) -> Option<usize> {
    let n = ((1.0 + (1.0 + 8.0 * len as f64).sqrt()) / 2.0).round() as usize;
    (condensed_len(n) == len && n >= 2).then_some(n)
}

pub(crate) fn write_meta<W: Write>(w: &mut W, meta: &[(&str, String)]) -> Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

fn read_numeric_rows<R: Read>(mut r: R) -> Result<Vec<Vec<f64>>> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("line {}: non-numeric cell {c:?}", ln + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Pairwise Euclidean distances between the rows of `data`.
pub fn euclidean_dissimilarity(data: &DataMatrix) -> DissimilarityMatrix {
    let n = data.rows();
    let mut entries = Vec::with_capacity(condensed_len(n));
    for i in 0..n {
        let a = data.row(i);
        for j in i + 1..n {
            let b = data.row(j);
            let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            entries.push(ss.sqrt());
        }
    }
    DissimilarityMatrix::from_entries_unchecked(n, entries)
}
