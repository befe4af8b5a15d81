use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{kmeans::KMeans, sq_dist, Partition, PointSet};
use crate::{Error, Result};

/// Gaussian kernel width: the median pairwise distance, or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "BandwidthRepr", into = "BandwidthRepr")]
pub enum Bandwidth {
    #[default]
    Median,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BandwidthRepr {
    Value(f64),
    Name(String),
}

impl TryFrom<BandwidthRepr> for Bandwidth {
    type Error = String;

    fn try_from(r: BandwidthRepr) -> Result<Self, String> {
        match r {
            BandwidthRepr::Value(v) if v.is_finite() && v > 0.0 => Ok(Bandwidth::Fixed(v)),
            BandwidthRepr::Value(v) => Err(format!("bandwidth must be positive, got {v}")),
            BandwidthRepr::Name(s) if s == "median" => Ok(Bandwidth::Median),
            BandwidthRepr::Name(s) => Err(format!("unknown bandwidth '{s}', expected \"median\" or a number")),
        }
    }
}

impl From<Bandwidth> for BandwidthRepr {
    fn from(b: Bandwidth) -> Self {
        match b {
            Bandwidth::Median => BandwidthRepr::Name("median".into()),
            Bandwidth::Fixed(v) => BandwidthRepr::Value(v),
        }
    }
}

/// Gaussian-weighted k-nearest-neighbour graph, symmetrised by union.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityGraph {
    pub knn: usize,
    pub bandwidth: Bandwidth,
}

impl Default for SimilarityGraph {
    fn default() -> Self {
        SimilarityGraph { knn: 10, bandwidth: Bandwidth::Median }
    }
}

impl SimilarityGraph {
    /// Fully connected variant of this graph.
    pub fn dense(self, points: usize) -> SimilarityGraph {
        SimilarityGraph { knn: points.saturating_sub(1), ..self }
    }

    /// Symmetric weight matrix with zero diagonal.
    pub fn weights(&self, points: &PointSet) -> Result<DMatrix<f64>> {
        if self.knn == 0 {
            return Err(Error::InvalidParameter("spectral.knn must be at least 1".into()));
        }
        let n = points.len();
        let dist = DMatrix::from_fn(n, n, |i, j| sq_dist(points.get(i), points.get(j)).sqrt());
        let sigma = match self.bandwidth {
            Bandwidth::Fixed(v) => v,
            Bandwidth::Median => median_distance(&dist),
        };
        let k = self.knn.min(n - 1);
        let mut adj = DMatrix::<bool>::from_element(n, n, false);
        for i in 0..n {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| dist[(i, a)].total_cmp(&dist[(i, b)]).then(a.cmp(&b)));
            for &j in &order[..k] {
                adj[(i, j)] = true;
                adj[(j, i)] = true;
            }
        }
        Ok(DMatrix::from_fn(n, n, |i, j| {
            if adj[(i, j)] {
                (-dist[(i, j)].powi(2) / (2.0 * sigma * sigma)).exp()
            } else {
                0.0
            }
        }))
    }
}

fn median_distance(dist: &DMatrix<f64>) -> f64 {
    let n = dist.nrows();
    let mut d: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|ij| dist[ij]).collect();
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let med = if d.len() % 2 == 1 { d[mid] } else { 0.5 * (d[mid - 1] + d[mid]) };
    if med > 0.0 {
        med
    } else {
        // Mostly coincident points: fall back to the smallest positive gap.
        d.into_iter().find(|&v| v > 0.0).unwrap_or(1.0)
    }
}

fn components(w: &DMatrix<f64>) -> usize {
    let n = w.nrows();
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !seen[j] && w[(i, j)] > 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

/// Eigendecomposition of the symmetric normalised Laplacian of a point set,
/// reusable across cluster counts.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// Eigenvalues ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, ordered like `eigenvalues`.
    eigenvectors: DMatrix<f64>,
}

impl SpectralEmbedding {
    pub fn compute(points: &PointSet, graph: &SimilarityGraph) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::InvalidParameter("spectral clustering needs at least 2 points".into()));
        }
        let w = graph.weights(points)?;
        let parts = components(&w);
        if parts > 1 {
            return Err(Error::DisconnectedGraph { components: parts });
        }
        let inv_sqrt: Vec<f64> = w.row_iter().map(|r| 1.0 / r.sum().sqrt()).collect();
        let lap = DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - inv_sqrt[i] * w[(i, j)] * inv_sqrt[j]
        });
        let eig = SymmetricEigen::try_new(lap, 1e-12, 10_000)
            .ok_or_else(|| Error::Solver("Laplacian eigendecomposition did not converge".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(SpectralEmbedding { eigenvalues, eigenvectors })
    }

    /// Like [`compute`](Self::compute), retrying with a dense graph when the
    /// k-NN graph is disconnected. The flag reports whether the retry happened.
    pub fn compute_or_densify(points: &PointSet, graph: &SimilarityGraph) -> Result<(Self, bool)> {
        match Self::compute(points, graph) {
            Err(Error::DisconnectedGraph { components }) => {
                log::debug!("similarity graph has {components} components, densifying");
                Ok((Self::compute(points, &graph.dense(points.len()))?, true))
            }
            other => other.map(|e| (e, false)),
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Rows of the first `m` eigenvectors, each scaled to unit length.
    pub fn rows(&self, m: usize) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|r| {
                let row: Vec<f64> = (0..m).map(|c| self.eigenvectors[(r, c)]).collect();
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.into_iter().map(|v| v / norm).collect()
                } else {
                    row
                }
            })
            .collect()
    }

    /// k-means with `m` centres on the row-normalised embedding.
    pub fn cluster(&self, m: usize, seed: u64) -> Result<Partition> {
        let n = self.len();
        if m == 0 || m > n {
            return Err(Error::InvalidClusterCount { m, points: n });
        }
        if m == 1 {
            return Ok(Partition::from_labels(&vec![0; n]));
        }
        let embedded = PointSet::new(self.rows(m))?;
        Ok(KMeans::default().fit(&embedded, m, seed)?.partition)
    }
}

/// Normalised spectral clustering into `m` clusters.
pub fn spectral_cluster(points: &PointSet, m: usize, graph: &SimilarityGraph, seed: u64) -> Result<Partition> {
    points.check_count(m)?;
    SpectralEmbedding::compute(points, graph)?.cluster(m, seed)
}
