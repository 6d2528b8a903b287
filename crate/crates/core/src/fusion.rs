//! Non-evolutionary fusion: the sorted secondary ensemble, the Rényi
//! family of entry-wise power means, and weighted consensus.
//!
//! A Rényi fuser with parameter `alpha` takes the power mean with exponent
//! `q = 1 - alpha` of the member values at each pair, after every member is
//! normalized to unit entry-sum:
//!
//! | alpha | q    | fuser            |
//! |-------|------|------------------|
//! | -inf  | +inf | maximum          |
//! | -1    | 2    | root mean square |
//! | 0     | 1    | arithmetic mean  |
//! | 1     | 0    | geometric mean   |
//! | 2     | -1   | harmonic mean    |
//! | +inf  | -inf | minimum          |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DissimilarityMatrix;

/// Floor applied to normalized entries before exponents `q <= 0`.
pub const ZERO_CLAMP: f64 = 1e-12;

/// Weight-sum tolerance accepted by [`weighted_consensus`].
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Per-pair order statistics of an ensemble: `matrices[k]` holds the
/// `k`-th smallest member value at every pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedEnsemble {
    matrices: Vec<DissimilarityMatrix>,
}

impl SortedEnsemble {
    pub fn matrices(&self) -> &[DissimilarityMatrix] {
        &self.matrices
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn n(&self) -> usize {
        self.matrices[0].n()
    }

    /// Common positive rescaling of every member.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let matrices = self
            .matrices
            .iter()
            .map(|m| m.scaled(factor))
            .collect::<Result<_>>()?;
        Ok(Self { matrices })
    }

    /// `sum_k weights[k] * matrices[k]` into `out`; no weight validation.
    pub(crate) fn consensus_into(&self, weights: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.matrices[0].entries().len(), 0.0);
        for (w, m) in weights.iter().zip(&self.matrices) {
            for (acc, v) in out.iter_mut().zip(m.entries()) {
                *acc += w * v;
            }
        }
    }
}

fn check_same_size(matrices: &[DissimilarityMatrix], min: usize) -> Result<usize> {
    if matrices.len() < min {
        return Err(Error::Structure(format!(
            "need at least {min} matrices, got {}",
            matrices.len()
        )));
    }
    let n = matrices[0].n();
    if let Some(bad) = matrices.iter().position(|m| m.n() != n) {
        return Err(Error::Structure(format!(
            "matrix {bad} covers {} points, expected {n}",
            matrices[bad].n()
        )));
    }
    Ok(n)
}

/// Sorts the member values at every pair independently.
pub fn sort_ensemble(matrices: &[DissimilarityMatrix]) -> Result<SortedEnsemble> {
    let n = check_same_size(matrices, 2)?;
    let l = matrices.len();
    let pairs = matrices[0].entries().len();
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(pairs); l];
    let mut column = vec![0.0; l];
    for idx in 0..pairs {
        for (slot, m) in column.iter_mut().zip(matrices) {
            *slot = m.entries()[idx];
        }
        column.sort_by(f64::total_cmp);
        for (dst, v) in out.iter_mut().zip(&column) {
            dst.push(*v);
        }
    }
    Ok(SortedEnsemble {
        matrices: out
            .into_iter()
            .map(|e| DissimilarityMatrix::from_entries_unchecked(n, e))
            .collect(),
    })
}

/// Order parameter of a Rényi fuser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RenyiParameter {
    NegInfinity,
    Finite(f64),
    PosInfinity,
}

impl RenyiParameter {
    pub fn finite(alpha: f64) -> Result<Self> {
        if alpha.is_finite() {
            Ok(Self::Finite(alpha))
        } else {
            Err(Error::InvalidInput(format!("alpha {alpha} is not finite")))
        }
    }
}

impl fmt::Display for RenyiParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NegInfinity => f.write_str("-inf"),
            Self::PosInfinity => f.write_str("+inf"),
            Self::Finite(a) => write!(f, "{a}"),
        }
    }
}

impl FromStr for RenyiParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "-inf" | "-infinity" => Ok(Self::NegInfinity),
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(Self::PosInfinity),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad alpha {s:?}")))
                .and_then(Self::finite),
        }
    }
}

/// The six named members of the Rényi family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenyiFuser {
    Max,
    Euclid,
    Amean,
    Gmean,
    Hmean,
    Min,
}

impl RenyiFuser {
    pub const ALL: [RenyiFuser; 6] = [
        Self::Max,
        Self::Euclid,
        Self::Amean,
        Self::Gmean,
        Self::Hmean,
        Self::Min,
    ];

    pub fn alpha(self) -> RenyiParameter {
        use RenyiParameter::*;
        match self {
            Self::Max => NegInfinity,
            Self::Euclid => Finite(-1.0),
            Self::Amean => Finite(0.0),
            Self::Gmean => Finite(1.0),
            Self::Hmean => Finite(2.0),
            Self::Min => PosInfinity,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Max => "max",
            Self::Euclid => "euclid",
            Self::Amean => "amean",
            Self::Gmean => "gmean",
            Self::Hmean => "hmean",
            Self::Min => "min",
        }
    }
}

impl fmt::Display for RenyiFuser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RenyiFuser {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown fuser {s:?}")))
    }
}

/// Scales each matrix to unit entry-sum. All-zero matrices stay zero.
pub fn normalize_to_unit_sum(m: &DissimilarityMatrix) -> DissimilarityMatrix {
    let total: f64 = m.entries().iter().sum();
    if total == 0.0 {
        return m.clone();
    }
    DissimilarityMatrix::from_entries_unchecked(
        m.n(),
        m.entries().iter().map(|v| v / total).collect(),
    )
}

/// Power mean `((1/L) sum v^q)^(1/q)` of non-negative values, with the
/// `q -> 0` geometric limit and `q = +-inf` as max/min.
///
/// Values are divided by their max (q > 0) or min (q < 0) before raising,
/// which keeps every power in `[0, 1]` and makes equal inputs come back
/// bit-exact. For `q <= 0`, values below [`ZERO_CLAMP`] are clamped first.
pub fn power_mean(values: &[f64], q: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let l = values.len() as f64;
    if q == f64::INFINITY {
        return values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    if q == f64::NEG_INFINITY {
        return values.iter().copied().fold(f64::INFINITY, f64::min);
    }
    if q == 1.0 {
        return values.iter().sum::<f64>() / l;
    }
    if q > 0.0 {
        let top = values.iter().copied().fold(0.0, f64::max);
        if top == 0.0 {
            return 0.0;
        }
        let s: f64 = values.iter().map(|v| (v / top).powf(q)).sum();
        return top * (s / l).powf(1.0 / q);
    }
    let clamped = values.iter().map(|&v| v.max(ZERO_CLAMP));
    if q == 0.0 {
        let top = clamped.clone().fold(0.0, f64::max);
        let s: f64 = clamped.map(|v| (v / top).ln()).sum();
        return top * (s / l).exp();
    }
    let bottom = clamped.clone().fold(f64::INFINITY, f64::min);
    let s: f64 = clamped.map(|v| (v / bottom).powf(q)).sum();
    bottom * (s / l).powf(1.0 / q)
}

/// Rényi fusion of the members, each first normalized to unit entry-sum.
pub fn renyi_fuse(
    matrices: &[DissimilarityMatrix],
    alpha: RenyiParameter,
) -> Result<DissimilarityMatrix> {
    let n = check_same_size(matrices, 2)?;
    let q = match alpha {
        RenyiParameter::NegInfinity => f64::INFINITY,
        RenyiParameter::PosInfinity => f64::NEG_INFINITY,
        RenyiParameter::Finite(a) => 1.0 - a,
    };
    let normalized: Vec<DissimilarityMatrix> = matrices.iter().map(normalize_to_unit_sum).collect();
    let pairs = normalized[0].entries().len();
    let mut column = vec![0.0; normalized.len()];
    let mut fused = Vec::with_capacity(pairs);
    for idx in 0..pairs {
        for (slot, m) in column.iter_mut().zip(&normalized) {
            *slot = m.entries()[idx];
        }
        fused.push(power_mean(&column, q));
    }
    DissimilarityMatrix::new(n, fused)
}

/// `sum_k weights[k] * sorted[k]`; the weights must lie on the simplex.
pub fn weighted_consensus(sorted: &SortedEnsemble, weights: &[f64]) -> Result<DissimilarityMatrix> {
    if weights.len() != sorted.len() {
        return Err(Error::Contract(format!(
            "{} weights for {} matrices",
            weights.len(),
            sorted.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::Contract(format!(
            "weight {w} is negative or not finite"
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::Contract(format!("weights sum to {total}, not 1")));
    }
    let mut out = Vec::new();
    sorted.consensus_into(weights, &mut out);
    Ok(DissimilarityMatrix::from_entries_unchecked(sorted.n(), out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_pair(v: f64) -> DissimilarityMatrix {
        DissimilarityMatrix::new(2, vec![v]).unwrap()
    }

    #[test]
    fn two_element_sort() {
        let s = sort_ensemble(&[one_pair(5.0), one_pair(3.0)]).unwrap();
        assert_eq!(s.matrices()[0].entries(), &[3.0]);
        assert_eq!(s.matrices()[1].entries(), &[5.0]);
    }

    #[test]
    fn identical_members_sort_to_themselves() {
        let m = DissimilarityMatrix::new(3, vec![1.0, 4.0, 2.0]).unwrap();
        let s = sort_ensemble(&[m.clone(), m.clone(), m.clone()]).unwrap();
        assert!(s.matrices().iter().all(|x| *x == m));
    }

    #[test]
    fn power_means_of_two_values() {
        let v = [0.1, 0.4];
        assert!((power_mean(&v, 1.0) - 0.25).abs() < 1e-15);
        assert!((power_mean(&v, -1.0) - 0.16).abs() < 1e-15);
        assert!((power_mean(&v, 2.0) - 0.085f64.sqrt()).abs() < 1e-15);
        assert!((power_mean(&v, 2.0) - 0.2915).abs() < 1e-4);
        assert!((power_mean(&v, 0.0) - 0.2).abs() < 1e-15);
        assert_eq!(power_mean(&v, f64::INFINITY), 0.4);
        assert_eq!(power_mean(&v, f64::NEG_INFINITY), 0.1);
    }

    #[test]
    fn power_mean_equal_values_exact() {
        for q in [-7.0, -1.0, 0.0, 0.5, 2.0, 9.0] {
            assert_eq!(power_mean(&[0.3, 0.3, 0.3], q), 0.3, "q = {q}");
        }
    }

    #[test]
    fn zeros_are_clamped_for_nonpositive_q() {
        assert!(power_mean(&[0.0, 0.5], -1.0) < 1e-11);
        assert!(power_mean(&[0.0, 0.5], 0.0) < 1e-5);
        assert_eq!(power_mean(&[0.0, 0.0], 3.0), 0.0);
    }

    #[test]
    fn renyi_table_rows_on_normalized_members() {
        // Members normalize to (0.1, 0.9) and (0.4, 0.6).
        let a = DissimilarityMatrix::new(3, vec![1.0, 9.0, 0.0]).unwrap();
        let b = DissimilarityMatrix::new(3, vec![4.0, 6.0, 0.0]).unwrap();
        let amean = renyi_fuse(&[a.clone(), b.clone()], RenyiFuser::Amean.alpha()).unwrap();
        assert!((amean.get(0, 1) - 0.25).abs() < 1e-15);
        let hmean = renyi_fuse(&[a.clone(), b.clone()], RenyiFuser::Hmean.alpha()).unwrap();
        assert!((hmean.get(0, 1) - 0.16).abs() < 1e-15);
        let euclid = renyi_fuse(&[a.clone(), b.clone()], RenyiFuser::Euclid.alpha()).unwrap();
        assert!((euclid.get(0, 1) - 0.2915475947).abs() < 1e-9);
        let min = renyi_fuse(&[a.clone(), b.clone()], RenyiFuser::Min.alpha()).unwrap();
        assert_eq!(min.entries()[..2], [0.1, 0.6]);
        let max = renyi_fuse(&[a, b], RenyiFuser::Max.alpha()).unwrap();
        assert_eq!(max.entries()[..2], [0.4, 0.9]);
    }

    #[test]
    fn parses_names_and_alphas() {
        for f in RenyiFuser::ALL {
            assert_eq!(f.name().parse::<RenyiFuser>().unwrap(), f);
        }
        assert!("median".parse::<RenyiFuser>().is_err());
        assert_eq!(
            "-inf".parse::<RenyiParameter>().unwrap(),
            RenyiParameter::NegInfinity
        );
        assert_eq!(
            "2".parse::<RenyiParameter>().unwrap(),
            RenyiParameter::Finite(2.0)
        );
        assert!("nan".parse::<RenyiParameter>().is_err());
    }

    #[test]
    fn weighted_consensus_cases() {
        let s = sort_ensemble(&[one_pair(5.0), one_pair(3.0)]).unwrap();
        assert_eq!(
            weighted_consensus(&s, &[0.5, 0.5]).unwrap().entries(),
            &[4.0]
        );
        assert_eq!(
            weighted_consensus(&s, &[0.0, 1.0]).unwrap().entries(),
            &[5.0]
        );
        assert!(weighted_consensus(&s, &[0.6, 0.6]).is_err());
        assert!(weighted_consensus(&s, &[1.5, -0.5]).is_err());
        assert!(weighted_consensus(&s, &[1.0]).is_err());
    }

    #[test]
    fn mismatched_sizes_rejected() {
        let a = DissimilarityMatrix::zeros(3);
        let b = DissimilarityMatrix::zeros(4);
        assert!(sort_ensemble(&[a.clone(), b.clone()]).is_err());
        assert!(renyi_fuse(&[a.clone(), b], RenyiParameter::Finite(0.0)).is_err());
        assert!(sort_ensemble(&[a]).is_err());
    }
}
