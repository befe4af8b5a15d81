use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::sigproc::Label;
use crate::{Error, Result};

/// Identity of one feature column: EEG channel, EMG channel, band index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureId {
    pub eeg: usize,
    pub emg: usize,
    pub band: usize,
}

impl FeatureId {
    /// All triplets in lexicographic `(eeg, emg, band)` order.
    pub fn grid(h: usize, j: usize, k: usize) -> Vec<FeatureId> {
        let mut ids = Vec::with_capacity(h * j * k);
        for eeg in 0..h {
            for emg in 0..j {
                for band in 0..k {
                    ids.push(FeatureId { eeg, emg, band });
                }
            }
        }
        ids
    }

    /// Column index in an `h x j x k` grid.
    pub fn column(&self, j: usize, k: usize) -> usize {
        (self.eeg * j + self.emg) * k + self.band
    }

    pub fn column_name(&self, band_names: &[String]) -> String {
        format!("h{}_j{}_{}", self.eeg, self.emg, band_names[self.band])
    }
}

/// Trials x features table of band-averaged MSC values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// Row-major, one row per trial.
    pub values: Vec<Vec<f64>>,
    pub feature_ids: Vec<FeatureId>,
    pub labels: Vec<Label>,
    pub band_names: Vec<String>,
    /// Names used for the label column, `[class1, class2]`.
    pub class_names: [String; 2],
}

impl FeatureMatrix {
    pub fn new(values: Vec<Vec<f64>>, feature_ids: Vec<FeatureId>, labels: Vec<Label>, band_names: Vec<String>) -> Result<Self> {
        let fm = FeatureMatrix {
            values,
            feature_ids,
            labels,
            band_names,
            class_names: ["class1".to_string(), "class2".to_string()],
        };
        fm.validate()?;
        Ok(fm)
    }

    pub fn with_class_names(mut self, names: [String; 2]) -> Self {
        self.class_names = names;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.values.len() != self.labels.len() {
            return Err(Error::Shape(format!("{} rows vs {} labels", self.values.len(), self.labels.len())));
        }
        let f = self.feature_ids.len();
        if let Some(i) = self.values.iter().position(|r| r.len() != f) {
            return Err(Error::Shape(format!("row {i} has {} values, expected {f}", self.values[i].len())));
        }
        for (r, row) in self.values.iter().enumerate() {
            if let Some(c) = row.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidParameter(format!(
                    "feature value {} at row {r}, column {c} outside [0, 1]",
                    row[c]
                )));
            }
        }
        let mut sorted = self.feature_ids.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != f {
            return Err(Error::InvalidParameter("duplicate feature ids".into()));
        }
        if self.feature_ids.iter().any(|id| id.band >= self.band_names.len()) {
            return Err(Error::InvalidParameter("feature references an unknown band".into()));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_ids.len()
    }

    pub fn column_name(&self, col: usize) -> String {
        self.feature_ids[col].column_name(&self.band_names)
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }

    /// Per-column class means, `[mean over class1 rows, mean over class2 rows]`.
    pub fn class_means(&self) -> Vec<[f64; 2]> {
        class_means(&self.values, &self.labels)
    }

    /// Writes `label,h<idx>_j<idx>_<band>,...` followed by one row per trial.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::malformed(path, e.to_string()))?;
        let mut header = vec!["label".to_string()];
        header.extend((0..self.n_features()).map(|c| self.column_name(c)));
        w.write_record(&header).map_err(|e| Error::malformed(path, e.to_string()))?;
        for (row, label) in self.values.iter().zip(&self.labels) {
            let mut rec = Vec::with_capacity(row.len() + 1);
            rec.push(self.class_names[label.index()].clone());
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| Error::malformed(path, e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads the CSV written by [`write_csv`](Self::write_csv). The first label
    /// value encountered becomes class1.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            k => Error::malformed(path, format!("{k:?}")),
        })?;
        let header = r.headers().map_err(|e| Error::malformed(path, e.to_string()))?.clone();
        if header.get(0) != Some("label") {
            return Err(Error::malformed(path, "first column must be `label`"));
        }
        let mut band_names: Vec<String> = Vec::new();
        let mut raw_ids = Vec::new();
        for name in header.iter().skip(1) {
            let (h, j, band) =
                parse_column(name).ok_or_else(|| Error::malformed(path, format!("bad column name `{name}`")))?;
            let k = match band_names.iter().position(|b| b == band) {
                Some(k) => k,
                None => {
                    band_names.push(band.to_string());
                    band_names.len() - 1
                }
            };
            raw_ids.push(FeatureId { eeg: h, emg: j, band: k });
        }
        let mut sorted = raw_ids.clone();
        sorted.sort();
        if sorted != raw_ids {
            return Err(Error::malformed(path, "feature columns are not in (h, j, band) order"));
        }

        let mut class_names: Vec<String> = Vec::new();
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::malformed(path, format!("line {line}: {e}"))
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let name = rec.get(0).unwrap_or_default();
            let idx = match class_names.iter().position(|c| c == name) {
                Some(i) => i,
                None if class_names.len() < 2 => {
                    class_names.push(name.to_string());
                    class_names.len() - 1
                }
                None => {
                    return Err(Error::malformed(path, format!("line {line}: third class label `{name}`")));
                }
            };
            labels.push(Label::from_index(idx));
            let row = rec
                .iter()
                .skip(1)
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::malformed(path, format!("line {line}: non-numeric feature value")))?;
            if row.len() != raw_ids.len() {
                return Err(Error::malformed(path, format!("line {line}: {} values, expected {}", row.len(), raw_ids.len())));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::malformed(path, format!("line {line}: feature value outside [0, 1]")));
            }
            values.push(row);
        }
        while class_names.len() < 2 {
            class_names.push(format!("class{}", class_names.len() + 1));
        }
        let names = [class_names[0].clone(), class_names[1].clone()];
        let fm = FeatureMatrix::new(values, raw_ids, labels, band_names).map_err(|e| Error::malformed(path, e.to_string()))?;
        Ok(fm.with_class_names(names))
    }
}

pub(crate) fn class_means(rows: &[Vec<f64>], labels: &[Label]) -> Vec<[f64; 2]> {
    let f = rows.first().map_or(0, Vec::len);
    let mut sums = vec![[0.0; 2]; f];
    let mut counts = [0usize; 2];
    for (row, l) in rows.iter().zip(labels) {
        counts[l.index()] += 1;
        for (s, v) in sums.iter_mut().zip(row) {
            s[l.index()] += v;
        }
    }
    for s in sums.iter_mut() {
        for c in 0..2 {
            s[c] /= counts[c].max(1) as f64;
        }
    }
    sums
}

fn parse_column(name: &str) -> Option<(usize, usize, &str)> {
    let rest = name.strip_prefix('h')?;
    let (h, rest) = rest.split_once('_')?;
    let rest = rest.strip_prefix('j')?;
    let (j, band) = rest.split_once('_')?;
    if band.is_empty() {
        return None;
    }
    Some((h.parse().ok()?, j.parse().ok()?, band))
}
