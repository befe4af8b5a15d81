//! Base clustering algorithms: Ward agglomerative clustering, k-means, and
//! normalised spectral clustering.

mod kmeans;
mod spectral;
mod ward;

pub use kmeans::{kmeans, KMeans, KMeansResult};
pub use spectral::{spectral_cluster, Bandwidth, SimilarityGraph, SpectralEmbedding};
pub use ward::{ward_cluster, Dendrogram, Merge};

use crate::{Error, Result};

/// `P x D` points with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("point set is empty".into()));
        }
        let d = points[0].len();
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::Shape("points differ in dimension".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("points must be finite".into()));
        }
        Ok(PointSet { points })
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> Result<Self> {
        PointSet::new(pairs.iter().map(|p| p.to_vec()).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    /// The subset at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<PointSet> {
        PointSet::new(indices.iter().map(|&i| self.points[i].clone()).collect())
    }

    fn check_count(&self, m: usize) -> Result<()> {
        if m == 0 || m > self.len() {
            return Err(Error::InvalidClusterCount { m, points: self.len() });
        }
        Ok(())
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cluster assignment of each point, labels `0..k` numbered in order of first
/// appearance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Relabels arbitrary cluster ids into canonical first-appearance order.
    pub fn from_labels(labels: &[usize]) -> Partition {
        let mut map = std::collections::BTreeMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Partition { assignment, k: map.len() }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Number of clusters.
    pub fn clusters(&self) -> usize {
        self.k
    }

    /// Members of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

/// Adjusted Rand index between two partitions of the same points.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> f64 {
    assert_eq!(a.len(), b.len(), "partitions cover different point counts");
    let n = a.len();
    let mut table = vec![vec![0u64; b.clusters()]; a.clusters()];
    for (x, y) in a.assignment().iter().zip(b.assignment()) {
        table[*x][*y] += 1;
    }
    let c2 = |v: u64| (v * v.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table.iter().flatten().map(|&v| c2(v)).sum();
    let sum_rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let sum_cols: f64 = (0..b.clusters()).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    let expected = sum_rows * sum_cols / total;
    let max = 0.5 * (sum_rows + sum_cols);
    if (max - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_cells - expected) / (max - expected)
}
