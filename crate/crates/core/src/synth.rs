//! Seeded synthetic EEG/EMG datasets with planted coherent couplings.
//!
//! Every channel is white noise. A planted coupling adds one shared
//! band-limited component (white noise through a 4th-order Butterworth
//! bandpass) to EEG `h` and EMG `j` in trials of its class, raising the MSC of
//! that pair inside the band.
//!
//! Trials may also draw a *mode* per class. A planted entry with a `mode` is
//! only active in trials that drew that mode, which yields class-conditional
//! mixtures (for instance XOR-like patterns across groups of features).

use std::collections::BTreeSet;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::sigproc::io::{write_dataset, ChannelSpec, DatasetMeta};
use crate::sigproc::{ChannelKind, Family, Label, SosFilter, TrialSet};
use crate::spectral::{BandTable, FeatureId};
use crate::{Error, Result};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

/// Samples simulated before each trial so filter transients settle.
const WARMUP_SECONDS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Planted {
    pub h: usize,
    pub j: usize,
    pub band: String,
    /// 1 or 2.
    pub class: u8,
    /// Mixing amplitude of the shared component, in `[0, 1]`.
    pub strength: f64,
    /// Restricts the coupling to trials that drew this mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
}

impl Planted {
    pub fn label(&self) -> Label {
        if self.class == 1 {
            Label::Class1
        } else {
            Label::Class2
        }
    }
}

fn default_noise_std() -> f64 {
    1.0
}

fn default_class_names() -> [String; 2] {
    ["class1".into(), "class2".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_trials_per_class: usize,
    #[serde(rename = "H")]
    pub eeg_channels: usize,
    #[serde(rename = "J")]
    pub emg_channels: usize,
    pub sample_rate_hz: f64,
    pub segment_seconds: f64,
    pub planted: Vec<Planted>,
    pub noise_seed: u64,
    /// Standard deviation of the independent per-channel noise.
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    #[serde(default)]
    pub bands: BandTable,
    /// Mode weights per class, `[class1, class2]`. Without it every trial uses
    /// mode 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<[Vec<f64>; 2]>,
    #[serde(default = "default_class_names")]
    pub class_names: [String; 2],
}

impl SynthSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SynthSpec = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn samples(&self) -> usize {
        (self.segment_seconds * self.sample_rate_hz).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_trials_per_class == 0 {
            return bad("n_trials_per_class must be positive".into());
        }
        if self.eeg_channels == 0 || self.emg_channels == 0 {
            return bad("H and J must be positive".into());
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad("sample_rate_hz must be positive".into());
        }
        if self.samples() < 8 {
            return bad("segment too short".into());
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad("noise_std must be non-negative".into());
        }
        self.bands.validate().map_err(|e| Error::Config(e.to_string()))?;
        let nyquist = self.sample_rate_hz / 2.0;
        for p in &self.planted {
            let Some(k) = self.bands.index_of(&p.band) else {
                return Err(Error::UnknownBand(p.band.clone()));
            };
            if p.h >= self.eeg_channels || p.j >= self.emg_channels {
                return bad(format!("planted pair (h={}, j={}) out of range", p.h, p.j));
            }
            if !(0.0..=1.0).contains(&p.strength) {
                return bad(format!("planted strength {} outside [0, 1]", p.strength));
            }
            if p.class != 1 && p.class != 2 {
                return bad(format!("planted class must be 1 or 2, got {}", p.class));
            }
            if self.bands.bands[k].hi_hz >= nyquist {
                return bad(format!("band {} reaches the Nyquist frequency", p.band));
            }
            if let (Some(mode), Some(weights)) = (p.mode, &self.modes) {
                if mode >= weights[p.label().index()].len() {
                    return bad(format!("planted mode {mode} has no weight for class {}", p.class));
                }
            }
        }
        if let Some(w) = &self.modes {
            for (c, weights) in w.iter().enumerate() {
                if weights.is_empty() || weights.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                    return bad(format!("mode weights of class {} must be non-negative with a positive sum", c + 1));
                }
            }
        }
        Ok(())
    }

    /// Feature-matrix columns of the planted triplets, ascending and unique.
    pub fn ground_truth_columns(&self) -> Vec<usize> {
        let k = self.bands.len();
        let set: BTreeSet<usize> = self
            .planted
            .iter()
            .filter_map(|p| {
                let band = self.bands.index_of(&p.band)?;
                Some(FeatureId { eeg: p.h, emg: p.j, band }.column(self.emg_channels, k))
            })
            .collect();
        set.into_iter().collect()
    }

    pub fn meta(&self) -> DatasetMeta {
        let mut channels: Vec<ChannelSpec> = (0..self.eeg_channels)
            .map(|h| ChannelSpec { name: format!("eeg{h}"), kind: ChannelKind::Eeg })
            .collect();
        channels.extend((0..self.emg_channels).map(|j| ChannelSpec { name: format!("emg{j}"), kind: ChannelKind::Emg }));
        DatasetMeta { sample_rate_hz: self.sample_rate_hz, channels, class_names: self.class_names.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub columns: Vec<usize>,
    pub names: Vec<String>,
    pub planted: Vec<Planted>,
}

fn white(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Trials (class 1 first, then class 2) and their ground truth.
pub fn generate(spec: &SynthSpec) -> Result<(TrialSet, GroundTruth)> {
    spec.validate()?;
    let n = spec.samples();
    let warm = (WARMUP_SECONDS * spec.sample_rate_hz).round() as usize;
    let filters: Vec<SosFilter> = spec
        .planted
        .iter()
        .map(|p| {
            let band = &spec.bands.bands[spec.bands.index_of(&p.band).expect("validated")];
            SosFilter::bandpass(Family::Butterworth, 4, band.lo_hz, band.hi_hz, spec.sample_rate_hz)
        })
        .collect::<Result<_>>()?;
    let mode_dists = match &spec.modes {
        Some(w) => Some([
            WeightedIndex::new(&w[0]).map_err(|e| Error::Config(e.to_string()))?,
            WeightedIndex::new(&w[1]).map_err(|e| Error::Config(e.to_string()))?,
        ]),
        None => None,
    };

    let total = 2 * spec.n_trials_per_class;
    let mut eeg = Vec::with_capacity(total);
    let mut emg = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for t in 0..total {
        let label = if t < spec.n_trials_per_class { Label::Class1 } else { Label::Class2 };
        let mut rng = seed::rng(seed::derive(spec.noise_seed, t as u64));
        let mode = mode_dists.as_ref().map_or(0, |d| d[label.index()].sample(&mut rng));
        let mut x: Vec<Vec<f64>> = (0..spec.eeg_channels)
            .map(|_| white(&mut rng, n).into_iter().map(|v| v * spec.noise_std).collect())
            .collect();
        let mut y: Vec<Vec<f64>> = (0..spec.emg_channels)
            .map(|_| white(&mut rng, n).into_iter().map(|v| v * spec.noise_std).collect())
            .collect();
        for (p, f) in spec.planted.iter().zip(&filters) {
            // Drawn for every entry so the random stream does not depend on
            // which couplings are active.
            let shared = f.filter(&white(&mut rng, n + warm));
            if p.label() != label || p.mode.is_some_and(|m| m != mode) {
                continue;
            }
            for i in 0..n {
                x[p.h][i] += p.strength * shared[warm + i];
                y[p.j][i] += p.strength * shared[warm + i];
            }
        }
        eeg.push(x);
        emg.push(y);
        labels.push(label);
    }
    let trials = TrialSet::new(eeg, emg, labels, spec.sample_rate_hz)?;
    let columns = spec.ground_truth_columns();
    let band_names = spec.bands.names();
    let ids = FeatureId::grid(spec.eeg_channels, spec.emg_channels, spec.bands.len());
    let names = columns.iter().map(|&c| ids[c].column_name(&band_names)).collect();
    Ok((trials, GroundTruth { columns, names, planted: spec.planted.clone() }))
}

/// Generates and writes the dataset plus `ground_truth.json` into `dir`.
pub fn write(spec: &SynthSpec, dir: &Path) -> Result<GroundTruth> {
    let (trials, truth) = generate(spec)?;
    write_dataset(dir, &spec.meta(), &trials)?;
    let path = dir.join(GROUND_TRUTH_FILE);
    let text = serde_json::to_string_pretty(&truth).expect("ground truth serialises");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(truth)
}
