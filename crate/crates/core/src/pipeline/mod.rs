//! Nested cross-validation around consensus feature selection.
//!
//! A stratified holdout is set aside first. Each outer fold scales and
//! balances its training rows, grid-searches the consensus parameters with an
//! inner cross-validation, and scores the winner on its validation fold. The
//! best outer fold fixes the final parameters and feature set, which are
//! retrained on all non-holdout rows and scored once on the holdout.

mod report;
mod split;

pub use report::{write_grid_csv, write_outputs, write_selected_csv, CvReport, FoldReport, GridCell, SelectedFeature, WinnerReport};
pub use split::{stratified_kfold, stratified_split, SplitPlan};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{balance, MinMaxScaler};
use crate::cluster::{PointSet, SimilarityGraph};
use crate::config::PipelineConfig;
use crate::consensus::{ConsensusContext, ConsensusParams, FeatureSelection, Selection};
use crate::seed;
use crate::sigproc::Label;
use crate::spectral::{class_means, FeatureMatrix};
use crate::svm::{self, SvmParams};
use crate::{Error, Result};

const SPLIT_TAG: u64 = 0x5350;
const SMOTE_TAG: u64 = 0x534d;
const GRID_TAG: u64 = 0x4752;
const FINAL_TAG: u64 = 0x4649;

/// Settings shared by every inner evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSettings {
    pub graph: SimilarityGraph,
    pub svm: SvmParams,
    pub folds: usize,
}

/// Result of one grid point over the inner folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub params: ConsensusParams,
    /// Best inner-fold accuracy, `None` if every inner fold was infeasible.
    pub accuracy: Option<f64>,
    /// Features chosen in the best inner fold.
    pub selected: Option<Vec<usize>>,
    /// Inner fold that produced the best accuracy.
    pub iteration: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub cells: Vec<CellResult>,
    /// Winning grid index: accuracy desc, then `m` asc, then grid index asc.
    pub best: Option<usize>,
}

impl GridOutcome {
    pub fn winner(&self) -> Result<(&CellResult, FeatureSelection)> {
        let i = self.best.ok_or(Error::NoFeasibleModel)?;
        let cell = &self.cells[i];
        let selected = cell.selected.clone().expect("winning cell has a selection");
        Ok((cell, FeatureSelection { selected, params: cell.params }))
    }
}

fn project(rows: &[Vec<f64>], cols: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect()
}

fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

/// Trains on `train` restricted to `cols` and scores on `test`.
fn fit_score(
    train: (&[Vec<f64>], &[Label]),
    test: (&[Vec<f64>], &[Label]),
    cols: &[usize],
    params: &SvmParams,
) -> Result<f64> {
    let model = svm::train(&project(train.0, cols), train.1, params)?;
    svm::accuracy(&model.predict(&project(test.0, cols))?, test.1)
}

/// Index of the best `(accuracy, m)` candidate; earlier entries win ties.
fn best_index<'a>(cands: impl Iterator<Item = (usize, f64, usize)> + 'a) -> Option<usize> {
    let mut best: Option<(usize, f64, usize)> = None;
    for c in cands {
        let better = match best {
            None => true,
            Some((_, acc, m)) => c.1 > acc || (c.1 == acc && c.2 < m),
        };
        if better {
            best = Some(c);
        }
    }
    best.map(|b| b.0)
}

/// Evaluates every grid point with an inner cross-validation on the given
/// (already scaled and balanced) training rows.
///
/// In each inner iteration the per-feature class means of the inner training
/// rows form the point set for consensus selection; the selected columns train
/// an SVM that is scored on the held inner fold. A grid point keeps its best
/// iteration.
pub fn grid_search(
    rows: &[Vec<f64>],
    labels: &[Label],
    grid: &[ConsensusParams],
    settings: &InnerSettings,
    seed: u64,
) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty parameter grid".into()));
    }
    let folds = stratified_kfold(labels, settings.folds, seed::derive(seed, 0))?;
    let n = labels.len();
    let contexts: Vec<(Vec<usize>, ConsensusContext)> = folds
        .par_iter()
        .enumerate()
        .map(|(i, val)| {
            let mut held = vec![false; n];
            for &v in val {
                held[v] = true;
            }
            let train: Vec<usize> = (0..n).filter(|&r| !held[r]).collect();
            let means = class_means(&pick(rows, &train), &pick(labels, &train));
            let points = PointSet::new(means.iter().map(|p| p.to_vec()).collect())?;
            let ctx = ConsensusContext::new(points, &settings.graph, seed::derive(seed, 1 + i as u64))?;
            Ok((train, ctx))
        })
        .collect::<Result<_>>()?;

    let mut ms: Vec<usize> = grid.iter().map(|p| p.m).collect();
    ms.sort_unstable();
    ms.dedup();
    let tasks: Vec<(usize, usize)> = (0..folds.len()).flat_map(|i| ms.iter().map(move |&m| (i, m))).collect();

    type CellOut = (usize, usize, Option<(f64, Vec<usize>)>);
    let outputs: Vec<Vec<CellOut>> = tasks
        .par_iter()
        .map(|&(i, m)| {
            let (train, ctx) = &contexts[i];
            let val = &folds[i];
            let cells: Vec<usize> = (0..grid.len()).filter(|&g| grid[g].m == m).collect();
            let Some(base) = ctx.base(m)? else {
                return Ok(cells.into_iter().map(|g| (g, i, None)).collect());
            };
            let (tr_rows, tr_labels) = (pick(rows, train), pick(labels, train));
            let (va_rows, va_labels) = (pick(rows, val), pick(labels, val));
            cells
                .into_iter()
                .map(|g| {
                    let out = match base.select(grid[g].sigma, grid[g].nu)? {
                        Selection::Feasible(sel) => {
                            let acc = fit_score(
                                (&tr_rows, &tr_labels),
                                (&va_rows, &va_labels),
                                &sel.selected,
                                &settings.svm,
                            )?;
                            Some((acc, sel.selected))
                        }
                        Selection::Infeasible { .. } => None,
                    };
                    Ok((g, i, out))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut table: Vec<Vec<Option<(f64, Vec<usize>)>>> = vec![vec![None; folds.len()]; grid.len()];
    for (g, i, out) in outputs.into_iter().flatten() {
        table[g][i] = out;
    }
    let cells: Vec<CellResult> = grid
        .iter()
        .zip(table)
        .map(|(params, per_fold)| {
            let best = best_index(
                per_fold
                    .iter()
                    .enumerate()
                    .filter_map(|(i, o)| o.as_ref().map(|(acc, _)| (i, *acc, 0))),
            );
            match best {
                Some(i) => {
                    let (acc, sel) = per_fold[i].clone().expect("feasible");
                    CellResult { params: *params, accuracy: Some(acc), selected: Some(sel), iteration: Some(i) }
                }
                None => CellResult { params: *params, accuracy: None, selected: None, iteration: None },
            }
        })
        .collect();
    let best = best_index(
        cells
            .iter()
            .enumerate()
            .filter_map(|(g, c)| c.accuracy.map(|a| (g, a, c.params.m))),
    );
    Ok(GridOutcome { cells, best })
}

/// Inner cross-validation of a single parameter triple: the best inner
/// accuracy and its feature set, or `None` when every iteration is infeasible.
pub fn inner_cv(
    rows: &[Vec<f64>],
    labels: &[Label],
    params: ConsensusParams,
    settings: &InnerSettings,
    seed: u64,
) -> Result<Option<(f64, FeatureSelection)>> {
    let out = grid_search(rows, labels, &[params], settings, seed)?;
    Ok(out.winner().ok().map(|(cell, sel)| (cell.accuracy.expect("feasible"), sel)))
}

/// Min-max scales `train` with a scaler fitted on it, then SMOTE-balances it.
fn prepare(train_rows: &[Vec<f64>], train_labels: &[Label], k: usize, seed: u64) -> Result<(MinMaxScaler, Vec<Vec<f64>>, Vec<Label>, usize)> {
    let scaler = MinMaxScaler::fit(train_rows)?;
    let scaled = scaler.transform(train_rows);
    let (rows, labels) = balance(&scaled, train_labels, k, seed)?;
    let synthetic = rows.len() - scaled.len();
    Ok((scaler, rows, labels, synthetic))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterFold {
    pub fold: usize,
    pub validation_rows: usize,
    pub synthetic_rows: usize,
    pub grid: GridOutcome,
    pub validation_accuracy: Option<f64>,
}

impl OuterFold {
    pub fn winner(&self) -> Option<&CellResult> {
        self.grid.best.map(|b| &self.grid.cells[b])
    }
}

/// Seeds and settings resolved from a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub inner: InnerSettings,
    pub grid: Vec<ConsensusParams>,
    pub smote_k: usize,
    pub smote_seed: u64,
    pub seed: u64,
    pub holdout_fraction: f64,
    pub outer_folds: usize,
}

impl RunSettings {
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(RunSettings {
            inner: InnerSettings { graph: cfg.spectral, svm: cfg.svm, folds: cfg.cv.inner_folds },
            grid: cfg.grid.params()?,
            smote_k: cfg.smote.k,
            smote_seed: cfg.smote.seed.unwrap_or_else(|| seed::derive(cfg.seed, SMOTE_TAG)),
            seed: cfg.seed,
            holdout_fraction: cfg.cv.holdout_fraction,
            outer_folds: cfg.cv.outer_folds,
        })
    }
}

/// Runs every outer fold. Folds whose grid is entirely infeasible are kept
/// with no winner so the infeasibility map can still be reported.
pub fn outer_cv(fm: &FeatureMatrix, plan: &SplitPlan, settings: &RunSettings) -> Result<Vec<OuterFold>> {
    (0..plan.folds.len())
        .into_par_iter()
        .map(|o| {
            let train = plan.training_without(o);
            let val = &plan.folds[o];
            let (scaler, rows, labels, synthetic) = prepare(
                &pick(&fm.values, &train),
                &pick(&fm.labels, &train),
                settings.smote_k,
                seed::derive(settings.smote_seed, o as u64),
            )?;
            let grid = grid_search(
                &rows,
                &labels,
                &settings.grid,
                &settings.inner,
                seed::derive(seed::derive(settings.seed, GRID_TAG), o as u64),
            )?;
            let validation_accuracy = match grid.winner() {
                Ok((_, sel)) => Some(fit_score(
                    (&rows, &labels),
                    (&scaler.transform(&pick(&fm.values, val)), &pick(&fm.labels, val)),
                    &sel.selected,
                    &settings.inner.svm,
                )?),
                Err(_) => None,
            };
            log::info!(
                "outer fold {o}: winner {:?}, validation accuracy {:?}",
                grid.best.map(|b| grid.cells[b].params.to_string()),
                validation_accuracy
            );
            Ok(OuterFold { fold: o, validation_rows: val.len(), synthetic_rows: synthetic, grid, validation_accuracy })
        })
        .collect()
}

/// The outer fold whose winner validated best (ties: smaller `m`, then lower
/// grid index, then lower fold). Fails if any fold found no feasible model.
pub fn best_fold(folds: &[OuterFold]) -> Result<usize> {
    if folds.iter().any(|f| f.grid.best.is_none()) {
        return Err(Error::NoFeasibleModel);
    }
    let mut best: Option<(usize, f64, usize, usize)> = None;
    for (i, f) in folds.iter().enumerate() {
        let acc = f.validation_accuracy.expect("winner was validated");
        let g = f.grid.best.expect("checked");
        let m = f.grid.cells[g].params.m;
        let better = match best {
            None => true,
            Some((_, a, bm, bg)) => acc > a || (acc == a && (m < bm || (m == bm && g < bg))),
        };
        if better {
            best = Some((i, acc, m, g));
        }
    }
    best.map(|b| b.0).ok_or(Error::NoFeasibleModel)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalEval {
    /// Accuracy on the (scaled, non-synthetic) training rows.
    pub training_accuracy: f64,
    pub holdout_accuracy: f64,
    /// Holdout recall of `[class1, class2]`.
    pub holdout_recall: [f64; 2],
}

/// Retrains on all non-holdout rows restricted to `selected` and scores the
/// holdout.
pub fn final_eval(fm: &FeatureMatrix, plan: &SplitPlan, selected: &[usize], settings: &RunSettings) -> Result<FinalEval> {
    if plan.holdout.is_empty() {
        return Err(Error::EmptyInput("holdout set is empty".into()));
    }
    let train = plan.training();
    let train_rows = pick(&fm.values, &train);
    let train_labels = pick(&fm.labels, &train);
    let (scaler, rows, labels, _) = prepare(
        &train_rows,
        &train_labels,
        settings.smote_k,
        seed::derive(settings.smote_seed, FINAL_TAG),
    )?;
    let model = svm::train(&project(&rows, selected), &labels, &settings.inner.svm)?;
    let own = model.predict(&project(&scaler.transform(&train_rows), selected))?;
    let test_rows = project(&scaler.transform(&pick(&fm.values, &plan.holdout)), selected);
    let truth = pick(&fm.labels, &plan.holdout);
    let pred = model.predict(&test_rows)?;
    let mut recall = [0.0; 2];
    for class in [Label::Class1, Label::Class2] {
        let idx: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] == class).collect();
        if !idx.is_empty() {
            recall[class.index()] = idx.iter().filter(|&&i| pred[i] == class).count() as f64 / idx.len() as f64;
        }
    }
    Ok(FinalEval {
        training_accuracy: svm::accuracy(&own, &train_labels)?,
        holdout_accuracy: svm::accuracy(&pred, &truth)?,
        holdout_recall: recall,
    })
}

/// Split plan and outer-fold results, available even when no model is feasible.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedCv {
    pub plan: SplitPlan,
    pub settings: RunSettings,
    pub folds: Vec<OuterFold>,
}

/// The holdout and outer folds `nested_cv` uses for this matrix and config.
pub fn split_plan(fm: &FeatureMatrix, cfg: &PipelineConfig) -> Result<SplitPlan> {
    stratified_split(&fm.labels, cfg.cv.holdout_fraction, cfg.cv.outer_folds, seed::derive(cfg.seed, SPLIT_TAG))
}

pub fn nested_cv(fm: &FeatureMatrix, cfg: &PipelineConfig) -> Result<NestedCv> {
    let settings = RunSettings::from_config(cfg)?;
    let plan = split_plan(fm, cfg)?;
    log::info!(
        "split: {} holdout rows, outer fold sizes {:?}",
        plan.holdout.len(),
        plan.folds.iter().map(Vec::len).collect::<Vec<_>>()
    );
    let folds = outer_cv(fm, &plan, &settings)?;
    Ok(NestedCv { plan, settings, folds })
}

/// Picks the global winner and runs the final evaluation.
pub fn finish(fm: &FeatureMatrix, cfg: &PipelineConfig, nested: &NestedCv) -> Result<CvReport> {
    let b = best_fold(&nested.folds)?;
    let (cell, selection) = nested.folds[b].grid.winner()?;
    let eval = final_eval(fm, &nested.plan, &selection.selected, &nested.settings)?;
    log::info!(
        "selected {} from fold {b}: training {:.4}, holdout {:.4}",
        cell.params,
        eval.training_accuracy,
        eval.holdout_accuracy
    );
    Ok(CvReport::build(fm, cfg, nested, b, &selection, eval))
}

/// The whole pipeline on a feature matrix.
pub fn run(fm: &FeatureMatrix, cfg: &PipelineConfig) -> Result<CvReport> {
    let nested = nested_cv(fm, cfg)?;
    finish(fm, cfg, &nested)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::spectral::FeatureId;
    use crate::svm::KernelKind;

    /// 3 informative columns (class-dependent mean) among `f` noise columns.
    fn toy(n_per_class: usize, f: usize, seed: u64) -> FeatureMatrix {
        let mut rng = seed::rng(seed);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for c in 0..2 {
            for _ in 0..n_per_class {
                let row: Vec<f64> = (0..f)
                    .map(|k| {
                        let shift = if k < 3 && c == 0 { 0.3 } else { 0.0 };
                        (0.3 + shift + 0.2 * rng.random::<f64>()).min(1.0)
                    })
                    .collect();
                values.push(row);
                labels.push(Label::from_index(c));
            }
        }
        FeatureMatrix::new(values, FeatureId::grid(1, 1, f), labels, (0..f).map(|k| format!("b{k}")).collect()).unwrap()
    }

    fn small_config() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.grid.m = vec![3, 6];
        cfg.grid.nu = vec![0, 1];
        cfg.svm.kernel = KernelKind::Linear;
        cfg
    }

    #[test]
    fn tie_prefers_smaller_m_then_index() {
        let c = |g: usize, acc: f64, m: usize| (g, acc, m);
        assert_eq!(best_index([c(0, 0.7, 50), c(1, 0.7, 30)].into_iter()), Some(1));
        assert_eq!(best_index([c(0, 0.7, 30), c(1, 0.7, 30)].into_iter()), Some(0));
        assert_eq!(best_index([c(0, 0.6, 30), c(1, 0.7, 90)].into_iter()), Some(1));
        assert_eq!(best_index(std::iter::empty()), None);
    }

    #[test]
    fn grid_search_finds_informative_columns() {
        let fm = toy(40, 12, 1);
        let settings = RunSettings::from_config(&small_config()).unwrap();
        let scaled = MinMaxScaler::fit(&fm.values).unwrap().transform(&fm.values);
        let out = grid_search(&scaled, &fm.labels, &settings.grid, &settings.inner, 5).unwrap();
        assert_eq!(out.cells.len(), 4);
        let (cell, sel) = out.winner().unwrap();
        assert!(cell.accuracy.unwrap() >= 0.9);
        assert!(sel.selected.iter().any(|&c| c < 3));
        let single = inner_cv(&scaled, &fm.labels, settings.grid[0], &settings.inner, 5).unwrap();
        assert_eq!(single.map(|s| s.0), out.cells[0].accuracy);
    }

    #[test]
    fn nu_above_feature_count_is_infeasible() {
        let fm = toy(20, 8, 2);
        let mut cfg = small_config();
        cfg.grid.nu = vec![8];
        let nested = nested_cv(&fm, &cfg).unwrap();
        assert!(nested.folds.iter().all(|f| f.grid.cells.iter().all(|c| c.accuracy.is_none())));
        assert!(matches!(finish(&fm, &cfg, &nested), Err(Error::NoFeasibleModel)));
    }

    #[test]
    fn deterministic_and_holdout_blind() {
        let fm = toy(30, 10, 3);
        let cfg = small_config();
        let a = run(&fm, &cfg).unwrap();
        let b = run(&fm, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

        let nested = nested_cv(&fm, &cfg).unwrap();
        let mut noisy = fm.clone();
        let mut rng = seed::rng(77);
        for &h in &nested.plan.holdout {
            for v in noisy.values[h].iter_mut() {
                *v = rng.random();
            }
        }
        let c = run(&noisy, &cfg).unwrap();
        assert_eq!(c.gamma, a.gamma);
        assert_eq!(c.selected_features, a.selected_features);
        assert_eq!(c.outer_folds, a.outer_folds);
    }

    #[test]
    fn imbalanced_training_is_balanced_per_fold() {
        let mut fm = toy(30, 10, 4);
        // Drop 12 class-2 rows.
        fm.values.truncate(48);
        fm.labels.truncate(48);
        let nested = nested_cv(&fm, &small_config()).unwrap();
        for f in &nested.folds {
            assert!(f.synthetic_rows > 0);
        }
    }
}
