#![allow(dead_code)]

use hcfuse::evaluation::SampleCell;
use hcfuse::{Dendrogram, DissimilarityMatrix, Merge, MethodId};
use rand::Rng;

/// Random binary merge tree on `n` leaves. Heights increase by random
/// steps, and roughly one step in four is zero so ties occur.
pub fn random_dendrogram<R: Rng>(rng: &mut R, n: usize) -> Dendrogram {
    let mut active: Vec<(usize, usize)> = (0..n).map(|i| (i, 1)).collect();
    let mut merges = Vec::with_capacity(n - 1);
    let mut height = 0.0;
    for k in 0..n - 1 {
        let a = active.swap_remove(rng.random_range(0..active.len()));
        let b = active.swap_remove(rng.random_range(0..active.len()));
        if k == 0 || rng.random_bool(0.75) {
            height += rng.random_range(0.01..1.0);
        }
        merges.push(Merge {
            left: a.0,
            right: b.0,
            height,
            size: a.1 + b.1,
        });
        active.push((n + k, a.1 + b.1));
    }
    Dendrogram::new(n, merges).expect("generated tree is valid")
}

/// Random dissimilarity matrix with entries drawn from a small integer
/// grid when `ties` is set, otherwise uniform on (0, 1).
pub fn random_matrix<R: Rng>(rng: &mut R, n: usize, ties: bool) -> DissimilarityMatrix {
    DissimilarityMatrix::from_fn(n, |_, _| {
        if ties {
            rng.random_range(1..5) as f64
        } else {
            rng.random_range(0.001..1.0)
        }
    })
    .expect("finite entries")
}

/// Minimax path distances by Floyd-Warshall style relaxation:
/// `u[i][j] = min_k max(u[i][k], u[k][j])`.
pub fn minmax_closure(m: &DissimilarityMatrix) -> DissimilarityMatrix {
    let n = m.n();
    let mut u = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                u[i][j] = m.get(i, j);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = u[i][k].max(u[k][j]);
                if via < u[i][j] {
                    u[i][j] = via;
                }
            }
        }
    }
    DissimilarityMatrix::from_fn(n, |i, j| u[i][j]).expect("finite entries")
}

/// Textbook agglomerative single linkage. At every step all cluster pairs
/// at the minimum linkage are candidates; the pair with the smallest
/// `(smaller rep, larger rep)` merges, the smaller-rep cluster on the left.
pub fn naive_single_linkage(m: &DissimilarityMatrix) -> Vec<Merge> {
    let n = m.n();
    // (id, rep, members)
    let mut clusters: Vec<(usize, usize, Vec<usize>)> = (0..n).map(|i| (i, i, vec![i])).collect();
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let linkage = |a: &[usize], b: &[usize]| {
            let mut best = f64::INFINITY;
            for &x in a {
                for &y in b {
                    best = best.min(m.get(x, y));
                }
            }
            best
        };
        let mut h = f64::INFINITY;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                h = h.min(linkage(&clusters[a].2, &clusters[b].2));
            }
        }
        let mut pick: Option<(usize, usize, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                if linkage(&clusters[a].2, &clusters[b].2) != h {
                    continue;
                }
                let (lo, hi) = if clusters[a].1 < clusters[b].1 {
                    (a, b)
                } else {
                    (b, a)
                };
                let key = (clusters[lo].1, clusters[hi].1);
                if pick.is_none_or(|p| key < (p.2, p.3)) {
                    pick = Some((lo, hi, key.0, key.1));
                }
            }
        }
        let (lo, hi, _, _) = pick.expect("some pair");
        let right = clusters[hi].clone();
        let left = clusters[lo].clone();
        let size = left.2.len() + right.2.len();
        merges.push(Merge {
            left: left.0,
            right: right.0,
            height: h,
            size,
        });
        let mut members = left.2;
        members.extend(right.2);
        clusters[lo] = (n + merges.len() - 1, left.1, members);
        clusters.remove(hi);
    }
    merges
}

/// Maximum absolute entry difference, panicking on a size mismatch.
pub fn max_diff(a: &DissimilarityMatrix, b: &DissimilarityMatrix) -> f64 {
    a.max_abs_diff(b).expect("matrices of equal size")
}

/// Ensemble of `len` random matrices on `n` points.
pub fn random_ensemble<R: Rng>(rng: &mut R, len: usize, n: usize) -> Vec<DissimilarityMatrix> {
    (0..len).map(|_| random_matrix(rng, n, false)).collect()
}

pub fn cell(dataset: &str, method: MethodId, samples: &[f64]) -> SampleCell {
    SampleCell {
        dataset: dataset.into(),
        method,
        samples: samples.to_vec(),
    }
}

/// Three datasets, three methods. Per dataset the best mean and which
/// others a Welch test at 0.01 separates from it:
/// d1: genetic best, min not separated (t ~ -0.85), amean separated.
/// d2: amean best, genetic not separated (t = -1), min separated.
/// d3: min best, both others separated.
pub fn constructed_cells() -> Vec<SampleCell> {
    use MethodId::{Amean, Genetic, Min};
    vec![
        cell("d1", Genetic, &[0.90, 0.91, 0.92, 0.93, 0.94]),
        cell("d1", Amean, &[0.60, 0.61, 0.62, 0.63, 0.64]),
        cell("d1", Min, &[0.88, 0.90, 0.91, 0.93, 0.93]),
        cell("d2", Genetic, &[0.79, 0.80, 0.81, 0.82, 0.83]),
        cell("d2", Amean, &[0.80, 0.81, 0.82, 0.83, 0.84]),
        cell("d2", Min, &[0.40, 0.41, 0.42, 0.43, 0.44]),
        cell("d3", Genetic, &[0.30, 0.31, 0.32, 0.33, 0.34]),
        cell("d3", Amean, &[0.31, 0.30, 0.33, 0.32, 0.35]),
        cell("d3", Min, &[0.70, 0.71, 0.72, 0.73, 0.74]),
    ]
}
