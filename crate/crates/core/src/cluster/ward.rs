use super::{sq_dist, Partition, PointSet};
use crate::Result;

/// One agglomeration step: clusters in slots `a < b` merge into slot `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    /// Increase in total within-cluster sum of squares.
    pub cost: f64,
    pub size: usize,
}

/// Full Ward merge sequence over `n` points.
///
/// Clusters live in slots initially equal to point indices; a merge keeps the
/// lower slot. At each step the cheapest pair is merged, ties going to the
/// lexicographically lowest `(a, b)` slot pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n: usize,
    merges: Vec<Merge>,
}

fn ward_cost(ca: &[f64], na: usize, cb: &[f64], nb: usize) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    na * nb / (na + nb) * sq_dist(ca, cb)
}

impl Dendrogram {
    pub fn build(points: &PointSet) -> Dendrogram {
        let n = points.len();
        let mut centroid: Vec<Vec<f64>> = points.points().to_vec();
        let mut size = vec![1usize; n];
        let mut active = vec![true; n];
        // nn[i] = cheapest partner j > i among active slots.
        let mut nn: Vec<Option<(f64, usize)>> = vec![None; n];

        let row_best = |i: usize, centroid: &[Vec<f64>], size: &[usize], active: &[bool]| -> Option<(f64, usize)> {
            let mut best: Option<(f64, usize)> = None;
            for j in i + 1..active.len() {
                if !active[j] {
                    continue;
                }
                let c = ward_cost(&centroid[i], size[i], &centroid[j], size[j]);
                if best.is_none_or(|(bc, _)| c < bc) {
                    best = Some((c, j));
                }
            }
            best
        };
        for i in 0..n {
            nn[i] = row_best(i, &centroid, &size, &active);
        }

        let mut merges = Vec::with_capacity(n.saturating_sub(1));
        for _ in 1..n {
            let mut pick: Option<(f64, usize, usize)> = None;
            for i in 0..n {
                if let (true, Some((c, j))) = (active[i], nn[i]) {
                    if pick.is_none_or(|(pc, _, _)| c < pc) {
                        pick = Some((c, i, j));
                    }
                }
            }
            let (cost, a, b) = pick.expect("at least two active clusters");
            let (na, nb) = (size[a], size[b]);
            let merged: Vec<f64> = centroid[a]
                .iter()
                .zip(&centroid[b])
                .map(|(x, y)| (x * na as f64 + y * nb as f64) / (na + nb) as f64)
                .collect();
            centroid[a] = merged;
            size[a] = na + nb;
            active[b] = false;
            nn[b] = None;
            merges.push(Merge { a, b, cost, size: na + nb });

            for i in 0..n {
                if !active[i] {
                    continue;
                }
                if i == a || matches!(nn[i], Some((_, j)) if j == a || j == b) {
                    nn[i] = row_best(i, &centroid, &size, &active);
                } else if i < a {
                    let c = ward_cost(&centroid[i], size[i], &centroid[a], size[a]);
                    if let Some((bc, bj)) = nn[i] {
                        if c < bc || (c == bc && a < bj) {
                            nn[i] = Some((c, a));
                        }
                    }
                }
            }
        }
        Dendrogram { n, merges }
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Replays merges until `m` clusters remain.
    pub fn cut(&self, m: usize) -> Partition {
        let m = m.clamp(1, self.n);
        let mut owner: Vec<usize> = (0..self.n).collect();
        for merge in &self.merges[..self.n - m] {
            for o in owner.iter_mut() {
                if *o == merge.b {
                    *o = merge.a;
                }
            }
        }
        Partition::from_labels(&owner)
    }
}

/// Ward agglomerative clustering cut to exactly `m` clusters.
pub fn ward_cluster(points: &PointSet, m: usize) -> Result<Partition> {
    points.check_count(m)?;
    Ok(Dendrogram::build(points).cut(m))
}
