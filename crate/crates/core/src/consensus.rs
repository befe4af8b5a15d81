//! Consensus feature selection: two base clusterings are combined into a
//! co-membership average, features without enough agreeing partners are
//! dropped, and the survivors are re-clustered with one representative kept
//! per cluster.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cluster::{sq_dist, Dendrogram, Partition, PointSet, SimilarityGraph, SpectralEmbedding};
use crate::{seed, Error, Result};

/// One grid point `[m, sigma, nu]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusParams {
    pub m: usize,
    pub sigma: f64,
    pub nu: usize,
}

impl ConsensusParams {
    pub fn new(m: usize, sigma: f64, nu: usize) -> Result<Self> {
        let p = ConsensusParams { m, sigma, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParameter("m must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(Error::InvalidParameter(format!("sigma {} outside [0, 1]", self.sigma)));
        }
        Ok(())
    }
}

impl std::fmt::Display for ConsensusParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}, {}]", self.m, self.sigma, self.nu)
    }
}

/// Selected feature indices (ascending) and the parameters that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub selected: Vec<usize>,
    pub params: ConsensusParams,
}

/// Outcome of one consensus run. Too few survivors is a normal outcome, not
/// an error: it marks a blank cell in the accuracy grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    Feasible(FeatureSelection),
    Infeasible { survivors: usize },
}

impl Selection {
    pub fn feasible(self) -> Option<FeatureSelection> {
        match self {
            Selection::Feasible(s) => Some(s),
            Selection::Infeasible { .. } => None,
        }
    }
}

/// Co-membership matrix: entry `(a, b)` is 1 iff `a` and `b` share a cluster.
pub fn similarity_matrix(partition: &Partition) -> DMatrix<f64> {
    let a = partition.assignment();
    DMatrix::from_fn(a.len(), a.len(), |i, j| if a[i] == a[j] { 1.0 } else { 0.0 })
}

/// Averaged co-membership over several base clusterings.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusMatrix {
    entries: DMatrix<f64>,
}

impl ConsensusMatrix {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[(a, b)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

pub fn consensus_matrix(similarities: &[DMatrix<f64>]) -> Result<ConsensusMatrix> {
    let first = similarities
        .first()
        .ok_or_else(|| Error::EmptyInput("no similarity matrices".into()))?;
    let shape = first.shape();
    if shape.0 != shape.1 {
        return Err(Error::Shape(format!("similarity matrix is {}x{}", shape.0, shape.1)));
    }
    let mut sum = DMatrix::zeros(shape.0, shape.1);
    for s in similarities {
        if s.shape() != shape {
            return Err(Error::Shape(format!(
                "similarity matrices differ in shape: {:?} vs {:?}",
                shape,
                s.shape()
            )));
        }
        sum += s;
    }
    Ok(ConsensusMatrix { entries: sum / similarities.len() as f64 })
}

/// Features with more than `nu` partners whose consensus exceeds `sigma`.
pub fn consensus_filter(cm: &ConsensusMatrix, sigma: f64, nu: usize) -> Vec<usize> {
    let n = cm.len();
    (0..n)
        .filter(|&f| (0..n).filter(|&g| g != f && cm.get(f, g) > sigma).count() > nu)
        .collect()
}

/// Ward-clusters the surviving points into `m` groups and keeps, per group,
/// the member nearest the group centroid (ties to the lower index).
fn representatives(points: &PointSet, survivors: &[usize], m: usize) -> Result<Vec<usize>> {
    let sub = points.subset(survivors)?;
    let partition = Dendrogram::build(&sub).cut(m);
    let mut selected: Vec<usize> = partition
        .members()
        .iter()
        .map(|members| {
            let mut centroid = vec![0.0; sub.dim()];
            for &i in members {
                for (c, v) in centroid.iter_mut().zip(sub.get(i)) {
                    *c += v / members.len() as f64;
                }
            }
            let mut best = (f64::INFINITY, usize::MAX);
            for &i in members {
                let d = sq_dist(sub.get(i), &centroid);
                let f = survivors[i];
                if d < best.0 || (d == best.0 && f < best.1) {
                    best = (d, f);
                }
            }
            best.1
        })
        .collect();
    selected.sort_unstable();
    Ok(selected)
}

/// Cached per-point-set state: the Ward dendrogram and the spectral embedding
/// are computed once and reused for every `m`.
#[derive(Debug, Clone)]
pub struct ConsensusContext {
    points: PointSet,
    dendrogram: Dendrogram,
    embedding: SpectralEmbedding,
    seed: u64,
}

impl ConsensusContext {
    /// A disconnected k-NN graph is retried as a dense graph.
    pub fn new(points: PointSet, graph: &SimilarityGraph, seed: u64) -> Result<Self> {
        let dendrogram = Dendrogram::build(&points);
        let (embedding, _) = SpectralEmbedding::compute_or_densify(&points, graph)?;
        Ok(ConsensusContext { points, dendrogram, embedding, seed })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    /// Consensus of the two base clusterings at `m` clusters, or `None` when
    /// `m` exceeds the number of points.
    pub fn base(&self, m: usize) -> Result<Option<BaseConsensus<'_>>> {
        if m == 0 {
            return Err(Error::InvalidClusterCount { m, points: self.points.len() });
        }
        if m > self.points.len() {
            return Ok(None);
        }
        let ward = self.dendrogram.cut(m);
        let spectral = self.embedding.cluster(m, seed::derive(self.seed, m as u64))?;
        let matrix = consensus_matrix(&[similarity_matrix(&ward), similarity_matrix(&spectral)])?;
        Ok(Some(BaseConsensus { ctx: self, m, matrix }))
    }

    pub fn select(&self, params: ConsensusParams) -> Result<Selection> {
        params.validate()?;
        match self.base(params.m)? {
            Some(base) => base.select(params.sigma, params.nu),
            None => Ok(Selection::Infeasible { survivors: 0 }),
        }
    }
}

/// The consensus matrix for one `m`, ready to be filtered at any `(sigma, nu)`.
#[derive(Debug, Clone)]
pub struct BaseConsensus<'a> {
    ctx: &'a ConsensusContext,
    m: usize,
    matrix: ConsensusMatrix,
}

impl BaseConsensus<'_> {
    pub fn matrix(&self) -> &ConsensusMatrix {
        &self.matrix
    }

    pub fn select(&self, sigma: f64, nu: usize) -> Result<Selection> {
        let params = ConsensusParams::new(self.m, sigma, nu)?;
        let survivors = consensus_filter(&self.matrix, sigma, nu);
        if survivors.len() < self.m {
            return Ok(Selection::Infeasible { survivors: survivors.len() });
        }
        let selected = representatives(&self.ctx.points, &survivors, self.m)?;
        Ok(Selection::Feasible(FeatureSelection { selected, params }))
    }
}

/// One-shot consensus selection over `points` (one 2-D point per feature).
pub fn select_features(
    points: &PointSet,
    params: ConsensusParams,
    graph: &SimilarityGraph,
    seed: u64,
) -> Result<Selection> {
    params.validate()?;
    if params.m > points.len() {
        return Ok(Selection::Infeasible { survivors: 0 });
    }
    ConsensusContext::new(points.clone(), graph, seed)?.select(params)
}
