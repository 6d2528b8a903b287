//! Single-linkage agglomerative clustering.
//!
//! The merge tree is built from a minimum spanning tree (Prim, `O(n^2)`).
//! Edges are processed in groups of exactly equal weight. Within a group the
//! merges follow the tie rule: among all cluster pairs at the current
//! height, merge the pair whose `(smaller rep, larger rep)` is
//! lexicographically smallest, a cluster's rep being its smallest leaf.
//! The merged cluster keeps the smaller rep and becomes the `left` child.

use std::collections::BTreeSet;

use crate::dendrogram::{Dendrogram, Merge};
use crate::error::{Error, Result};
use crate::matrix::DissimilarityMatrix;

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Links `b`'s root under `a`'s root and returns the surviving root.
    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        self.parent[rb] = ra;
        ra
    }
}

/// Minimum spanning tree edges `(u, v, weight)` by Prim's algorithm.
fn prim_mst(m: &DissimilarityMatrix) -> Vec<(usize, usize, f64)> {
    let n = m.n();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let d = m.get(current, v);
            if d < best[v] {
                best[v] = d;
                from[v] = current;
            }
            if best[v] < next_w || next == usize::MAX {
                next_w = best[v];
                next = v;
            }
        }
        in_tree[next] = true;
        edges.push((from[next], next, next_w));
        current = next;
    }
    edges
}

#[derive(Debug)]
struct Cluster {
    id: usize,
    rep: usize,
    members: Vec<usize>,
}

/// Single-linkage dendrogram of `m`; deterministic under the tie rule
/// described in the module docs.
pub fn single_linkage(m: &DissimilarityMatrix) -> Result<Dendrogram> {
    let n = m.n();
    if n < 2 {
        return Err(Error::Structure(format!(
            "single linkage needs at least 2 points, got {n}"
        )));
    }
    let mut edges = prim_mst(m);
    edges.sort_by(|a, b| a.2.total_cmp(&b.2));

    // Cluster bookkeeping is keyed by the union-find root of its points.
    let mut uf = UnionFind::new(n);
    let mut clusters: Vec<Option<Cluster>> = (0..n)
        .map(|i| {
            Some(Cluster {
                id: i,
                rep: i,
                members: vec![i],
            })
        })
        .collect();
    let mut merges = Vec::with_capacity(n - 1);

    let mut start = 0;
    while start < edges.len() {
        let h = edges[start].2;
        let end = start + edges[start..].iter().take_while(|e| e.2 == h).count();

        // Components of the current clusters joined by this group's edges.
        let roots: Vec<(usize, usize)> = edges[start..end]
            .iter()
            .map(|&(u, v, _)| (uf.find(u), uf.find(v)))
            .collect();
        let mut touched: Vec<usize> = roots.iter().flat_map(|&(a, b)| [a, b]).collect();
        touched.sort_unstable();
        touched.dedup();
        let pos = |r: usize| touched.binary_search(&r).expect("touched root");
        let mut group_uf = UnionFind::new(touched.len());
        for &(a, b) in &roots {
            group_uf.union(pos(a), pos(b));
        }
        let mut components: Vec<Vec<usize>> = vec![Vec::new(); touched.len()];
        for (k, &root) in touched.iter().enumerate() {
            components[group_uf.find(k)].push(root);
        }
        let mut components: Vec<Vec<usize>> =
            components.into_iter().filter(|c| c.len() > 1).collect();
        for comp in &mut components {
            comp.sort_by_key(|&r| clusters[r].as_ref().expect("live cluster").rep);
        }
        components.sort_by_key(|c| clusters[c[0]].as_ref().expect("live cluster").rep);

        for comp in components {
            merge_component(m, h, &comp, &mut clusters, &mut uf, &mut merges, n);
        }
        start = end;
    }
    Ok(Dendrogram::from_merges_unchecked(n, merges))
}

/// Merges every cluster of one equal-height component. `comp` holds
/// cluster roots sorted by rep, so `comp[0]` is the anchor.
fn merge_component(
    m: &DissimilarityMatrix,
    h: f64,
    comp: &[usize],
    clusters: &mut [Option<Cluster>],
    uf: &mut UnionFind,
    merges: &mut Vec<Merge>,
    n: usize,
) {
    let k = comp.len();
    // Clusters in a component are at single-link distance >= h from one
    // another; they are adjacent when some cross pair sits exactly at h.
    let mut adjacent: Vec<Vec<usize>> = vec![Vec::new(); k];
    for a in 0..k {
        for b in a + 1..k {
            let ca = clusters[comp[a]].as_ref().expect("live cluster");
            let cb = clusters[comp[b]].as_ref().expect("live cluster");
            let touching = ca
                .members
                .iter()
                .any(|&x| cb.members.iter().any(|&y| m.get(x, y) == h));
            if touching {
                adjacent[a].push(b);
                adjacent[b].push(a);
            }
        }
    }

    // Local index order equals rep order, so the smallest local index in
    // the frontier is the smallest-rep neighbor of the anchor.
    let mut frontier: BTreeSet<usize> = adjacent[0].iter().copied().collect();
    let mut absorbed = vec![false; k];
    absorbed[0] = true;
    let mut anchor_root = comp[0];
    while let Some(next) = frontier.pop_first() {
        absorbed[next] = true;
        for &nb in &adjacent[next] {
            if !absorbed[nb] {
                frontier.insert(nb);
            }
        }
        let left = clusters[anchor_root].take().expect("live cluster");
        let right = clusters[comp[next]].take().expect("live cluster");
        let size = left.members.len() + right.members.len();
        let id = n + merges.len();
        merges.push(Merge {
            left: left.id,
            right: right.id,
            height: h,
            size,
        });
        let root = uf.union(anchor_root, comp[next]);
        let mut members = left.members;
        members.extend(right.members);
        clusters[root] = Some(Cluster {
            id,
            rep: left.rep,
            members,
        });
        anchor_root = root;
    }
    debug_assert!(
        absorbed.iter().all(|&a| a),
        "component not connected at height {h}"
    );
}
