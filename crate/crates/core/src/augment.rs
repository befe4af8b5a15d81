//! Min-max scaling and SMOTE class balancing.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::sigproc::Label;
use crate::spectral::{FeatureId, FeatureMatrix};
use crate::{Error, Result};

/// Per-column min-max scaler. Constant columns map to 0.5; values outside the
/// fitted range are clipped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InsufficientTrials {
                needed: 2,
                got: rows.len(),
            });
        }
        let f = rows[0].len();
        let mut mins = vec![f64::INFINITY; f];
        let mut maxs = vec![f64::NEG_INFINITY; f];
        for row in rows {
            if row.len() != f {
                return Err(Error::Shape("rows differ in length".into()));
            }
            for (c, &v) in row.iter().enumerate() {
                mins[c] = mins[c].min(v);
                maxs[c] = maxs[c].max(v);
            }
        }
        Ok(MinMaxScaler { mins, maxs })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mins.iter().zip(&self.maxs))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.5
                }
            })
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// A feature matrix scaled with a scaler fitted on its own rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledFeatureMatrix {
    pub values: Vec<Vec<f64>>,
    pub feature_ids: Vec<FeatureId>,
    pub labels: Vec<Label>,
    pub scaler: MinMaxScaler,
}

pub fn fit_scale(train: &FeatureMatrix) -> Result<ScaledFeatureMatrix> {
    let scaler = MinMaxScaler::fit(&train.values)?;
    Ok(ScaledFeatureMatrix {
        values: scaler.transform(&train.values),
        feature_ids: train.feature_ids.clone(),
        labels: train.labels.clone(),
        scaler,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` nearest other rows of each row (Euclidean; ties by index).
pub fn nearest_neighbors(rows: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    (0..rows.len())
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..rows.len())
                .filter(|&j| j != i)
                .map(|j| (sq_dist(&rows[i], &rows[j]), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Synthesises `target_count - rows.len()` minority rows. Each is
/// `x + u * (nn - x)` with `u ~ U[0, 1)` and `nn` drawn from the `k` nearest
/// minority neighbours of `x`; base rows are visited in a seeded shuffled
/// round-robin.
pub fn smote(rows: &[Vec<f64>], target_count: usize, k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::InvalidParameter("SMOTE needs k >= 1".into()));
    }
    if target_count < rows.len() {
        return Err(Error::InvalidParameter(format!(
            "target count {target_count} below minority count {}",
            rows.len()
        )));
    }
    let needed = target_count - rows.len();
    if needed == 0 {
        return Ok(Vec::new());
    }
    if rows.len() <= k {
        return Err(Error::InsufficientNeighbors { minority: rows.len(), k });
    }
    let neighbors = nearest_neighbors(rows, k);
    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut rng);
    let mut out = Vec::with_capacity(needed);
    for s in 0..needed {
        let base = order[s % order.len()];
        let nn = neighbors[base][rng.random_range(0..k)];
        let u: f64 = rng.random();
        let x = &rows[base];
        out.push(x.iter().zip(&rows[nn]).map(|(a, b)| a + u * (b - a)).collect());
    }
    Ok(out)
}

/// Oversamples the smaller class with SMOTE until both classes are equal.
/// Synthetic rows are appended after the original rows.
pub fn balance(rows: &[Vec<f64>], labels: &[Label], k: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<Label>)> {
    let mut counts = [0usize; 2];
    for l in labels {
        counts[l.index()] += 1;
    }
    let mut out_rows = rows.to_vec();
    let mut out_labels = labels.to_vec();
    if counts[0] == counts[1] {
        return Ok((out_rows, out_labels));
    }
    let minority = if counts[0] < counts[1] { Label::Class1 } else { Label::Class2 };
    let target = counts[0].max(counts[1]);
    let minority_rows: Vec<Vec<f64>> = rows
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == minority)
        .map(|(r, _)| r.clone())
        .collect();
    let synthetic = smote(&minority_rows, target, k, seed)?;
    out_labels.extend(std::iter::repeat_n(minority, synthetic.len()));
    out_rows.extend(synthetic);
    Ok((out_rows, out_labels))
}
