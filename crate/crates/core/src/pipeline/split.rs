use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::sigproc::Label;
use crate::{Error, Result};

/// Holdout rows plus `k` disjoint folds covering the rest. Indices ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub holdout: Vec<usize>,
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl SplitPlan {
    /// All non-holdout rows, ascending.
    pub fn training(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.folds.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    /// Rows of every fold except `fold`, ascending.
    pub fn training_without(&self, fold: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != fold)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        rows.sort_unstable();
        rows
    }
}

fn class_indices(labels: &[Label], subset: &[usize]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for &i in subset {
        out[labels[i].index()].push(i);
    }
    out
}

/// Deals each class's shuffled rows round-robin into `k` folds; the dealing
/// position carries over from one class to the next so fold sizes differ by
/// at most one.
fn deal(labels: &[Label], subset: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Stratification(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = seed::rng(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (c, mut rows) in class_indices(labels, subset).into_iter().enumerate() {
        if rows.len() < k {
            return Err(Error::Stratification(format!(
                "{:?} has {} rows, fewer than {k} folds",
                Label::from_index(c),
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        for r in rows {
            folds[next % k].push(r);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Stratified `k`-fold partition of all rows.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let all: Vec<usize> = (0..labels.len()).collect();
    deal(labels, &all, k, seed)
}

/// Holds out `round(n_c * holdout_fraction)` rows of each class, then folds
/// the remainder.
pub fn stratified_split(labels: &[Label], holdout_fraction: f64, folds: usize, seed: u64) -> Result<SplitPlan> {
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::Stratification(format!("holdout fraction {holdout_fraction} outside [0, 1)")));
    }
    let mut rng = seed::rng(seed::derive(seed, 0));
    let mut holdout = Vec::new();
    let mut rest = Vec::new();
    for mut rows in class_indices(labels, &(0..labels.len()).collect::<Vec<_>>()) {
        rows.shuffle(&mut rng);
        let h = (rows.len() as f64 * holdout_fraction).round() as usize;
        holdout.extend_from_slice(&rows[..h]);
        rest.extend_from_slice(&rows[h..]);
    }
    holdout.sort_unstable();
    rest.sort_unstable();
    let folds = deal(labels, &rest, folds, seed::derive(seed, 1))?;
    Ok(SplitPlan { holdout, folds, seed })
}
