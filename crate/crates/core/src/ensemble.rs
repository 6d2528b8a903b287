//! Bagged single-linkage ensembles.
//!
//! Member `l` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `l`, so every member is reproducible on its own and the members
//! can be built in any order.

use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dendrogram::Dendrogram;
use crate::error::{Error, Result};
use crate::linkage::single_linkage;
use crate::matrix::{condensed_len, euclidean_dissimilarity, DataMatrix, DissimilarityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub ensemble_size: usize,
    pub bag_fraction: f64,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 10,
            bag_fraction: 0.8,
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.ensemble_size < 2 {
            return Err(Error::Config(format!(
                "ensemble size must be at least 2, got {}",
                self.ensemble_size
            )));
        }
        bag_size(n, self.bag_fraction).map(|_| ())
    }
}

/// `ceil(fraction * n)`, checked to lie in `3..=n`.
pub fn bag_size(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!(
            "bag fraction {fraction} is outside (0, 1]"
        )));
    }
    // The small offset keeps products like 0.8 * 10 = 8.000000000000002
    // from rounding up to the next integer.
    let k = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let k = k.min(n);
    if k < 3 {
        return Err(Error::Config(format!(
            "bag of {k} points from {n} (fraction {fraction}) is below the minimum of 3"
        )));
    }
    Ok(k)
}

/// Uniform subset of `ceil(fraction * n)` indices drawn without
/// replacement, sorted ascending.
pub fn bag_indices<R: Rng + ?Sized>(n: usize, fraction: f64, rng: &mut R) -> Result<Vec<usize>> {
    let k = bag_size(n, fraction)?;
    if k == n {
        return Ok((0..n).collect());
    }
    let mut picked = index::sample(rng, n, k).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

pub fn member_rng(seed: u64, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaggedHierarchy {
    /// Point ids in the bag, strictly increasing.
    pub sampled_indices: Vec<usize>,
    /// Tree over the bag; leaf `k` is point `sampled_indices[k]`.
    pub dendrogram: Dendrogram,
    /// Cophenetic distances extended to all points.
    pub completed_matrix: DissimilarityMatrix,
}

/// Extends the cophenetic matrix of a bag's tree to all `e.n()` points.
///
/// Each out-of-bag point becomes a copy of its nearest in-bag point under
/// `e` (lowest id on ties), at distance 0 from it. Two out-of-bag points
/// sharing a nearest neighbour are at distance 0 from each other.
pub fn complete_cd_matrix(
    dendrogram: &Dendrogram,
    sampled: &[usize],
    e: &DissimilarityMatrix,
) -> Result<DissimilarityMatrix> {
    let n = e.n();
    if dendrogram.leaves() != sampled.len() {
        return Err(Error::Structure(format!(
            "tree has {} leaves for {} sampled points",
            dendrogram.leaves(),
            sampled.len()
        )));
    }
    if sampled.windows(2).any(|w| w[0] >= w[1]) || sampled.last().is_some_and(|&s| s >= n) {
        return Err(Error::Structure(
            "sampled indices must be strictly increasing ids below n".into(),
        ));
    }
    let coph = dendrogram.cophenetic_matrix();

    let mut local = vec![usize::MAX; n];
    for (k, &p) in sampled.iter().enumerate() {
        local[p] = k;
    }
    for p in 0..n {
        if local[p] != usize::MAX {
            continue;
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, &s) in sampled.iter().enumerate() {
            let d = e.get(p, s);
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        local[p] = best;
    }

    let mut entries = Vec::with_capacity(condensed_len(n));
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (local[i], local[j]);
            entries.push(if a == b { 0.0 } else { coph.get(a, b) });
        }
    }
    Ok(DissimilarityMatrix::from_entries_unchecked(n, entries))
}

fn build_member(
    e: &DissimilarityMatrix,
    cfg: &EnsembleConfig,
    member: usize,
) -> Result<BaggedHierarchy> {
    let mut rng = member_rng(cfg.seed, member);
    let sampled = bag_indices(e.n(), cfg.bag_fraction, &mut rng)?;
    let dendrogram = single_linkage(&e.restrict(&sampled))?;
    let completed_matrix = complete_cd_matrix(&dendrogram, &sampled, e)?;
    Ok(BaggedHierarchy {
        sampled_indices: sampled,
        dendrogram,
        completed_matrix,
    })
}

/// Builds the ensemble from a precomputed Euclidean matrix.
pub fn generate_ensemble_from(
    e: &DissimilarityMatrix,
    cfg: &EnsembleConfig,
) -> Result<Vec<BaggedHierarchy>> {
    cfg.validate(e.n())?;
    (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|l| build_member(e, cfg, l))
        .collect()
}

pub fn generate_ensemble(data: &DataMatrix, cfg: &EnsembleConfig) -> Result<Vec<BaggedHierarchy>> {
    generate_ensemble_from(&euclidean_dissimilarity(data), cfg)
}

/// SHA-256 over the bit patterns of every completed matrix, in member order.
pub fn ensemble_checksum(ensemble: &[BaggedHierarchy]) -> String {
    let mut h = Sha256::new();
    for member in ensemble {
        h.update((member.completed_matrix.n() as u64).to_le_bytes());
        for v in member.completed_matrix.entries() {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestMember {
    dendrogram: String,
    matrix: String,
    sampled_indices: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    seed: u64,
    ensemble_size: usize,
    bag_fraction: f64,
    points: usize,
    checksum: String,
    members: Vec<ManifestMember>,
}

/// Writes one dendrogram file and one condensed matrix CSV per member plus
/// `manifest.json` into `dir`.
pub fn write_ensemble_dump(
    dir: &Path,
    cfg: &EnsembleConfig,
    ensemble: &[BaggedHierarchy],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut members = Vec::with_capacity(ensemble.len());
    for (l, member) in ensemble.iter().enumerate() {
        let dendrogram = format!("member-{l:02}.dendrogram.txt");
        let matrix = format!("member-{l:02}.condensed.csv");
        let meta = [("seed", cfg.seed.to_string()), ("member", l.to_string())];
        member
            .dendrogram
            .write_text(fs::File::create(dir.join(&dendrogram))?, &meta)?;
        member
            .completed_matrix
            .write_condensed_csv(fs::File::create(dir.join(&matrix))?, &meta)?;
        members.push(ManifestMember {
            dendrogram,
            matrix,
            sampled_indices: member.sampled_indices.clone(),
        });
    }
    let manifest = Manifest {
        seed: cfg.seed,
        ensemble_size: cfg.ensemble_size,
        bag_fraction: cfg.bag_fraction,
        points: ensemble.first().map_or(0, |m| m.completed_matrix.n()),
        checksum: ensemble_checksum(ensemble),
        members,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}
