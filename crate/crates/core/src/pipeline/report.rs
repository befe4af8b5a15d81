use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FinalEval, NestedCv, OuterFold};
use crate::config::PipelineConfig;
use crate::consensus::{ConsensusParams, FeatureSelection};
use crate::spectral::FeatureMatrix;
use crate::svm::KernelKind;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub m: usize,
    pub sigma: f64,
    pub nu: usize,
    /// `None` marks an infeasible combination.
    pub inner_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnerReport {
    pub params: ConsensusParams,
    pub grid_index: usize,
    pub inner_accuracy: f64,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub validation_rows: usize,
    pub synthetic_rows: usize,
    pub grid: Vec<GridCell>,
    pub winner: Option<WinnerReport>,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeature {
    pub column: usize,
    pub name: String,
    pub h: usize,
    pub j: usize,
    pub band: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub kernel: KernelKind,
    /// Effective configuration, with derived seeds filled in.
    pub config: PipelineConfig,
    pub rows: usize,
    pub features: usize,
    pub class_names: [String; 2],
    pub class_counts: [usize; 2],
    pub holdout_rows: usize,
    pub outer_folds: Vec<FoldReport>,
    pub best_fold: usize,
    pub gamma: ConsensusParams,
    pub selected_features: Vec<SelectedFeature>,
    pub training_accuracy: f64,
    pub holdout_accuracy: f64,
    pub holdout_recall: [f64; 2],
}

pub(super) fn fold_report(fm: &FeatureMatrix, f: &OuterFold) -> FoldReport {
    FoldReport {
        fold: f.fold,
        validation_rows: f.validation_rows,
        synthetic_rows: f.synthetic_rows,
        grid: f
            .grid
            .cells
            .iter()
            .map(|c| GridCell { m: c.params.m, sigma: c.params.sigma, nu: c.params.nu, inner_accuracy: c.accuracy })
            .collect(),
        winner: f.grid.best.map(|g| {
            let c = &f.grid.cells[g];
            WinnerReport {
                params: c.params,
                grid_index: g,
                inner_accuracy: c.accuracy.expect("winner is feasible"),
                features: c.selected.iter().flatten().map(|&col| fm.column_name(col)).collect(),
            }
        }),
        validation_accuracy: f.validation_accuracy,
    }
}

impl CvReport {
    pub(super) fn build(
        fm: &FeatureMatrix,
        cfg: &PipelineConfig,
        nested: &NestedCv,
        best_fold: usize,
        selection: &FeatureSelection,
        eval: FinalEval,
    ) -> CvReport {
        let mut config = cfg.clone();
        config.smote.seed = Some(nested.settings.smote_seed);
        CvReport {
            kernel: cfg.svm.kernel,
            config,
            rows: fm.n_rows(),
            features: fm.n_features(),
            class_names: fm.class_names.clone(),
            class_counts: fm.class_counts(),
            holdout_rows: nested.plan.holdout.len(),
            outer_folds: nested.folds.iter().map(|f| fold_report(fm, f)).collect(),
            best_fold,
            gamma: selection.params,
            selected_features: selection
                .selected
                .iter()
                .map(|&col| {
                    let id = fm.feature_ids[col];
                    SelectedFeature {
                        column: col,
                        name: fm.column_name(col),
                        h: id.eeg,
                        j: id.emg,
                        band: fm.band_names[id.band].clone(),
                    }
                })
                .collect(),
            training_accuracy: eval.training_accuracy,
            holdout_accuracy: eval.holdout_accuracy,
            holdout_recall: eval.holdout_recall,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }
}

/// Accuracy matrix of one outer fold: one row per `(sigma, m)`, one column per
/// `nu`, empty cells for infeasible combinations.
pub fn grid_csv(fold: &OuterFold) -> String {
    let cells = &fold.grid.cells;
    let mut nus: Vec<usize> = cells.iter().map(|c| c.params.nu).collect();
    nus.sort_unstable();
    nus.dedup();
    let mut rows: Vec<(f64, usize)> = Vec::new();
    for c in cells {
        let key = (c.params.sigma, c.params.m);
        if !rows.contains(&key) {
            rows.push(key);
        }
    }
    let mut out = String::from("sigma,m");
    for nu in &nus {
        write!(out, ",nu_{nu}").expect("write to string");
    }
    out.push('\n');
    for (sigma, m) in rows {
        write!(out, "{sigma},{m}").expect("write to string");
        for &nu in &nus {
            out.push(',');
            let cell = cells
                .iter()
                .find(|c| c.params.sigma == sigma && c.params.m == m && c.params.nu == nu);
            if let Some(acc) = cell.and_then(|c| c.accuracy) {
                write!(out, "{acc}").expect("write to string");
            }
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `grid_<fold>.csv` for every outer fold.
pub fn write_grid_csv(dir: &Path, folds: &[OuterFold]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for f in folds {
        write_file(&dir.join(format!("grid_{}.csv", f.fold)), &grid_csv(f))?;
    }
    Ok(())
}

pub fn write_selected_csv(path: &Path, features: &[SelectedFeature]) -> Result<()> {
    let mut out = String::from("column,h,j,band\n");
    for f in features {
        writeln!(out, "{},{},{},{}", f.column, f.h, f.j, f.band).expect("write to string");
    }
    write_file(path, &out)
}

/// Writes `report.json`, the grid CSVs and `selected_features.csv` into `dir`.
pub fn write_outputs(dir: &Path, report: &CvReport, nested: &NestedCv) -> Result<()> {
    write_grid_csv(dir, &nested.folds)?;
    write_file(&dir.join("report.json"), &report.to_json())?;
    write_selected_csv(&dir.join("selected_features.csv"), &report.selected_features)
}
