//! Stepwise dendrograms and their cophenetic matrices.
//!
//! Leaves are cluster ids `0..n`; the `k`-th merge creates cluster `n + k`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{condensed_index, condensed_len, write_meta, DissimilarityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    n: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    /// Validates the merge sequence: `n - 1` merges, every child id used
    /// exactly once and only after it exists, consistent sizes and
    /// non-decreasing finite heights.
    pub fn new(n: usize, merges: Vec<Merge>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Structure(
                "dendrogram needs at least one leaf".into(),
            ));
        }
        if merges.len() != n - 1 {
            return Err(Error::Structure(format!(
                "{n} leaves need {} merges, got {}",
                n - 1,
                merges.len()
            )));
        }
        let mut sizes = vec![1usize; n];
        sizes.reserve(n - 1);
        let mut used = vec![false; 2 * n - 1];
        let mut prev = 0.0f64;
        for (k, m) in merges.iter().enumerate() {
            let next_id = n + k;
            for child in [m.left, m.right] {
                if child >= next_id {
                    return Err(Error::Structure(format!(
                        "merge {k} references cluster {child} before it exists"
                    )));
                }
                if used[child] {
                    return Err(Error::Structure(format!(
                        "merge {k} reuses cluster {child}"
                    )));
                }
                used[child] = true;
            }
            if m.left == m.right {
                return Err(Error::Structure(format!(
                    "merge {k} joins a cluster with itself"
                )));
            }
            if !(m.height.is_finite() && m.height >= 0.0) {
                return Err(Error::Structure(format!(
                    "merge {k} has height {}",
                    m.height
                )));
            }
            if m.height < prev {
                return Err(Error::Structure(format!(
                    "merge {k} height {} is below the previous height {prev}",
                    m.height
                )));
            }
            prev = m.height;
            let size = sizes[m.left] + sizes[m.right];
            if m.size != size {
                return Err(Error::Structure(format!(
                    "merge {k} declares size {} but joins {size} leaves",
                    m.size
                )));
            }
            sizes.push(size);
        }
        Ok(Self { n, merges })
    }

    pub(crate) fn from_merges_unchecked(n: usize, merges: Vec<Merge>) -> Self {
        debug_assert!(Self::new(n, merges.clone()).is_ok());
        Self { n, merges }
    }

    pub fn leaves(&self) -> usize {
        self.n
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// `(lowest, highest)` merge height, `None` for a single leaf.
    pub fn height_range(&self) -> Option<(f64, f64)> {
        Some((self.merges.first()?.height, self.merges.last()?.height))
    }

    /// Leaf sets of every cluster id, leaves first.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = (0..self.n).map(|i| vec![i]).collect();
        for m in &self.merges {
            let mut joined = out[m.left].clone();
            joined.extend_from_slice(&out[m.right]);
            out.push(joined);
        }
        out
    }

    /// Cophenetic distances: pair `(i, j)` gets the height of the first
    /// merge whose cluster contains both leaves.
    pub fn cophenetic_matrix(&self) -> DissimilarityMatrix {
        let n = self.n;
        let mut entries = vec![0.0; condensed_len(n)];
        let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        members.reserve(n - 1);
        for m in &self.merges {
            let left = std::mem::take(&mut members[m.left]);
            let right = std::mem::take(&mut members[m.right]);
            for &a in &left {
                for &b in &right {
                    let (i, j) = if a < b { (a, b) } else { (b, a) };
                    entries[condensed_index(n, i, j)] = m.height;
                }
            }
            let (mut big, small) = if left.len() >= right.len() {
                (left, right)
            } else {
                (right, left)
            };
            big.extend(small);
            members.push(big);
        }
        DissimilarityMatrix::from_entries_unchecked(n, entries)
    }

    /// Hierarchies are equal when their cophenetic matrices agree within
    /// `tolerance`; merge order among equal heights is not significant.
    pub fn same_hierarchy(&self, other: &Self, tolerance: f64) -> bool {
        self.cophenetic_matrix()
            .max_abs_diff(&other.cophenetic_matrix())
            .is_some_and(|d| d <= tolerance)
    }

    /// Plain-text interchange: one `left right height size` line per merge.
    pub fn write_text<W: Write>(&self, mut w: W, meta: &[(&str, String)]) -> Result<()> {
        write_meta(&mut w, meta)?;
        writeln!(w, "# leaves: {}", self.n)?;
        for m in &self.merges {
            writeln!(w, "{} {} {} {}", m.left, m.right, m.height, m.size)?;
        }
        Ok(())
    }

    pub fn read_text<R: Read>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut merges = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || {
                Error::Format(format!(
                    "line {}: expected `left right height size`",
                    ln + 1
                ))
            };
            if fields.len() != 4 {
                return Err(bad());
            }
            merges.push(Merge {
                left: fields[0].parse().map_err(|_| bad())?,
                right: fields[1].parse().map_err(|_| bad())?,
                height: fields[2].parse().map_err(|_| bad())?,
                size: fields[3].parse().map_err(|_| bad())?,
            });
        }
        if merges.is_empty() {
            return Err(Error::Format("no merge lines".into()));
        }
        Self::new(merges.len() + 1, merges)
    }
}
