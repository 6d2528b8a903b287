//! Cophenetic correlation coefficient.

use crate::error::{Error, Result};
use crate::matrix::DissimilarityMatrix;

/// Centered copy of a reference matrix, reused when many candidate
/// matrices are scored against the same reference.
#[derive(Debug, Clone)]
pub struct CpccReference {
    centered: Vec<f64>,
    sum_sq: f64,
    constant: bool,
}

impl CpccReference {
    pub fn new(reference: &DissimilarityMatrix) -> Self {
        let v = reference.entries();
        let constant = is_constant(v);
        let mean = mean(v);
        let centered: Vec<f64> = v.iter().map(|x| x - mean).collect();
        let sum_sq = centered.iter().map(|c| c * c).sum();
        Self {
            centered,
            sum_sq,
            constant,
        }
    }

    pub fn pairs(&self) -> usize {
        self.centered.len()
    }

    pub(crate) fn centered(&self) -> &[f64] {
        &self.centered
    }

    pub(crate) fn sum_sq(&self) -> f64 {
        self.sum_sq
    }

    pub(crate) fn is_constant(&self) -> bool {
        self.constant
    }

    /// `|pearson(entries, reference)|`, or 0 when either side is constant.
    pub fn score(&self, entries: &[f64]) -> f64 {
        assert_eq!(entries.len(), self.centered.len(), "matrix size mismatch");
        if self.constant || is_constant(entries) {
            return 0.0;
        }
        let mean = mean(entries);
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        for (x, c) in entries.iter().zip(&self.centered) {
            let dx = x - mean;
            sxy += dx * c;
            sxx += dx * dx;
        }
        let denom = (sxx * self.sum_sq).sqrt();
        if denom == 0.0 {
            return 0.0;
        }
        (sxy / denom).abs().min(1.0)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn is_constant(v: &[f64]) -> bool {
    v.first().is_none_or(|&f| v.iter().all(|&x| x == f))
}

/// Absolute Pearson correlation between the upper-triangular entries of `a`
/// and `e`, in `[0, 1]`. A matrix without variance scores 0.
pub fn cpcc(a: &DissimilarityMatrix, e: &DissimilarityMatrix) -> Result<f64> {
    if a.n() != e.n() {
        return Err(Error::Structure(format!(
            "cpcc of matrices over {} and {} points",
            a.n(),
            e.n()
        )));
    }
    Ok(CpccReference::new(e).score(a.entries()))
}
