//! Ultrametric checks and recovery.

use crate::dendrogram::Dendrogram;
use crate::error::{Error, Result};
use crate::linkage::single_linkage;
use crate::matrix::DissimilarityMatrix;

/// Absolute slack used when checking the ultrametric inequality.
pub const ULTRAMETRIC_TOLERANCE: f64 = 1e-9;

/// Largest amount by which any triple exceeds `d_ij <= max(d_ik, d_kj)`,
/// or 0 when the matrix is ultrametric. Exhaustive `O(n^3)`.
pub fn ultrametric_violation(m: &DissimilarityMatrix) -> f64 {
    let n = m.n();
    let mut worst = 0.0f64;
    let mut row_i = vec![0.0; n];
    for i in 0..n {
        for (k, slot) in row_i.iter_mut().enumerate() {
            *slot = m.get(i, k);
        }
        for j in i + 1..n {
            let dij = row_i[j];
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let bound = row_i[k].max(m.get(k, j));
                worst = worst.max(dij - bound);
            }
        }
    }
    worst
}

pub fn is_ultrametric(m: &DissimilarityMatrix, tolerance: f64) -> bool {
    ultrametric_violation(m) <= tolerance
}

/// The largest ultrametric that is entry-wise below `m`, i.e. the
/// cophenetic matrix of the single-linkage tree of `m`.
pub fn subdominant_ultrametric(m: &DissimilarityMatrix) -> DissimilarityMatrix {
    if m.n() < 2 {
        return m.clone();
    }
    single_linkage(m)
        .expect("n >= 2 checked above")
        .cophenetic_matrix()
}

/// Rebuilds the dendrogram that an ultrametric matrix describes.
///
/// The result is the single-linkage tree of `u`; its cophenetic matrix is
/// compared with `u` and anything off by more than
/// [`ULTRAMETRIC_TOLERANCE`] is rejected as non-ultrametric.
pub fn dendrogram_from_ultrametric(u: &DissimilarityMatrix) -> Result<Dendrogram> {
    let tree = single_linkage(u)?;
    let violation = tree
        .cophenetic_matrix()
        .max_abs_diff(u)
        .expect("same point count");
    if violation > ULTRAMETRIC_TOLERANCE {
        return Err(Error::NotUltrametric { violation });
    }
    Ok(tree)
}
