//! Trial interchange format.
//!
//! A dataset is a directory holding `meta.json` and one CSV per trial named
//! `trial_<index>_<label>.csv`. Each trial CSV has a header row with the
//! channel names in `meta.json` order, then one row per sample.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ChannelKind, Label, TrialSet};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub name: String,
    pub kind: ChannelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub sample_rate_hz: f64,
    pub channels: Vec<ChannelSpec>,
    /// `[class1, class2]`.
    pub class_names: [String; 2],
}

impl DatasetMeta {
    pub fn label_of(&self, name: &str) -> Option<Label> {
        self.class_names.iter().position(|c| c == name).map(Label::from_index)
    }

    pub fn name_of(&self, label: Label) -> &str {
        &self.class_names[label.index()]
    }

    pub fn names_of(&self, kind: ChannelKind) -> Vec<String> {
        self.channels
            .iter()
            .filter(|c| c.kind == kind)
            .map(|c| c.name.clone())
            .collect()
    }

    fn validate(&self, path: &Path) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::malformed(path, "sample_rate_hz must be positive"));
        }
        if self.class_names[0] == self.class_names[1] {
            return Err(Error::malformed(path, "class names must differ"));
        }
        if self.class_names.iter().any(|c| c.is_empty() || c.contains(['/', '\\'])) {
            return Err(Error::malformed(path, "class names must be non-empty file-name fragments"));
        }
        Ok(())
    }
}

pub const META_FILE: &str = "meta.json";

fn trial_file_name(index: usize, label: &str) -> String {
    format!("trial_{index}_{label}.csv")
}

/// Parses `trial_<index>_<label>.csv`.
fn parse_trial_name(name: &str) -> Option<(usize, &str)> {
    let stem = name.strip_prefix("trial_")?.strip_suffix(".csv")?;
    let (idx, label) = stem.split_once('_')?;
    Some((idx.parse().ok()?, label))
}

pub fn write_dataset(dir: &Path, meta: &DatasetMeta, trials: &TrialSet) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let eeg_n = meta.names_of(ChannelKind::Eeg).len();
    let emg_n = meta.names_of(ChannelKind::Emg).len();
    if (trials.eeg_channels() != eeg_n || trials.emg_channels() != emg_n)
        && !trials.is_empty() {
            return Err(Error::Shape(format!(
                "meta declares {eeg_n} EEG / {emg_n} EMG channels, trials have {} / {}",
                trials.eeg_channels(),
                trials.emg_channels()
            )));
        }
    let meta_path = dir.join(META_FILE);
    let json = serde_json::to_string_pretty(meta).expect("meta serialises");
    fs::write(&meta_path, json).map_err(|e| Error::io(&meta_path, e))?;

    for i in 0..trials.len() {
        let path = dir.join(trial_file_name(i, meta.name_of(trials.labels[i])));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        w.write_record(meta.channels.iter().map(|c| c.name.as_str()))
            .map_err(|e| csv_err(&path, e))?;
        let mut row = Vec::with_capacity(meta.channels.len());
        for t in 0..trials.samples() {
            row.clear();
            let (mut e, mut m) = (0, 0);
            for ch in &meta.channels {
                let v = match ch.kind {
                    ChannelKind::Eeg => {
                        e += 1;
                        trials.eeg[i][e - 1][t]
                    }
                    ChannelKind::Emg => {
                        m += 1;
                        trials.emg[i][m - 1][t]
                    }
                };
                row.push(v.to_string());
            }
            w.write_record(&row).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line());
    match (e.into_kind(), line) {
        (csv::ErrorKind::Io(io), _) => Error::io(path, io),
        (kind, Some(line)) => Error::malformed(path, format!("line {line}: {kind:?}")),
        (kind, None) => Error::malformed(path, format!("{kind:?}")),
    }
}

pub fn read_meta(dir: &Path) -> Result<DatasetMeta> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: DatasetMeta =
        serde_json::from_str(&text).map_err(|e| Error::malformed(&meta_path, e.to_string()))?;
    meta.validate(&meta_path)?;
    Ok(meta)
}

/// Reads every trial in index order.
pub fn read_dataset(dir: &Path) -> Result<(DatasetMeta, TrialSet)> {
    let meta = read_meta(dir)?;
    let mut files: Vec<(usize, Label, PathBuf)> = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if !name.starts_with("trial_") {
            continue;
        }
        let path = entry.path();
        let (index, label) = parse_trial_name(&name)
            .ok_or_else(|| Error::malformed(&path, "expected trial_<index>_<label>.csv"))?;
        let label = meta
            .label_of(label)
            .ok_or_else(|| Error::malformed(&path, format!("label `{label}` is not a class in meta.json")))?;
        files.push((index, label, path));
    }
    files.sort_by_key(|f| f.0);
    if let Some(w) = files.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::malformed(&w[1].2, format!("duplicate trial index {}", w[1].0)));
    }

    let mut eeg = Vec::with_capacity(files.len());
    let mut emg = Vec::with_capacity(files.len());
    let mut labels = Vec::with_capacity(files.len());
    let mut expected_len = None;
    for (_, label, path) in &files {
        let (e, m) = read_trial(path, &meta)?;
        let len = e.first().or(m.first()).map_or(0, Vec::len);
        match expected_len {
            None => expected_len = Some(len),
            Some(l) if l != len => {
                return Err(Error::malformed(path, format!("{len} samples, expected {l}")));
            }
            _ => {}
        }
        eeg.push(e);
        emg.push(m);
        labels.push(*label);
    }
    let set = TrialSet::new(eeg, emg, labels, meta.sample_rate_hz)?;
    Ok((meta, set))
}

type Channels = Vec<Vec<f64>>;

fn read_trial(path: &Path, meta: &DatasetMeta) -> Result<(Channels, Channels)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?;
    let names: Vec<&str> = header.iter().collect();
    let expected: Vec<&str> = meta.channels.iter().map(|c| c.name.as_str()).collect();
    if names != expected {
        return Err(Error::malformed(path, format!("header {names:?} does not match meta.json channels {expected:?}")));
    }
    let n_eeg = meta.names_of(ChannelKind::Eeg).len();
    let mut eeg = vec![Vec::new(); n_eeg];
    let mut emg = vec![Vec::new(); meta.channels.len() - n_eeg];
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let (mut e, mut m) = (0, 0);
        for (field, ch) in rec.iter().zip(&meta.channels) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::malformed(path, format!("line {line}: `{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(Error::malformed(path, format!("line {line}: non-finite sample")));
            }
            match ch.kind {
                ChannelKind::Eeg => {
                    eeg[e].push(v);
                    e += 1;
                }
                ChannelKind::Emg => {
                    emg[m].push(v);
                    m += 1;
                }
            }
        }
    }
    Ok((eeg, emg))
}
