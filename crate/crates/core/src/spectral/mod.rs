//! Spectra, magnitude-squared coherence (MSC) and band-averaged MSC features.
//!
//! For trials `x_i`, `y_i` with FFTs `X_i`, `Y_i` the trial-averaged spectra are
//!
//! ```text
//! Sx(f)  = mean_i |X_i(f)|^2
//! Sy(f)  = mean_i |Y_i(f)|^2
//! Sxy(f) = mean_i X_i(f) conj(Y_i(f))
//! MSC(f) = |Sxy(f)|^2 / (Sx(f) Sy(f))
//! ```
//!
//! which lies in `[0, 1]` by Cauchy-Schwarz. Bins where `Sx(f) Sy(f) = 0` are
//! assigned MSC 0.

mod matrix;

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

pub use matrix::{FeatureId, FeatureMatrix};
pub(crate) use matrix::class_means;

use crate::sigproc::{Label, TrialSet};
use crate::{Error, Result};

/// Forward FFT of a real segment, zero-padded to the next power of two.
#[derive(Clone)]
pub struct Spectrometer {
    len: usize,
    nfft: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectrometer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectrometer")
            .field("len", &self.len)
            .field("nfft", &self.nfft)
            .finish()
    }
}

impl Spectrometer {
    pub fn new(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidParameter(format!("segment length must be >= 2, got {len}")));
        }
        let nfft = len.next_power_of_two();
        let fft = FftPlanner::new().plan_fft_forward(nfft);
        Ok(Spectrometer { len, nfft, fft })
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }

    /// Number of one-sided bins, `nfft / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    pub fn freqs(&self, sample_rate_hz: f64) -> Vec<f64> {
        (0..self.bins())
            .map(|k| k as f64 * sample_rate_hz / self.nfft as f64)
            .collect()
    }

    /// One-sided spectrum (bins `0..=nfft/2`).
    pub fn transform(&self, segment: &[f64]) -> Result<Vec<Complex64>> {
        if segment.len() != self.len {
            return Err(Error::Shape(format!(
                "segment of {} samples, spectrometer built for {}",
                segment.len(),
                self.len
            )));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nfft];
        for (b, &v) in buf.iter_mut().zip(segment) {
            b.re = v;
        }
        self.fft.process(&mut buf);
        buf.truncate(self.bins());
        Ok(buf)
    }
}

/// Frequencies and one-sided spectrum of a rectangular-windowed segment.
pub fn fft_spectrum(segment: &[f64], sample_rate_hz: f64) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let sp = Spectrometer::new(segment.len())?;
    Ok((sp.freqs(sample_rate_hz), sp.transform(segment)?))
}

/// Trial-averaged auto- and cross-spectra of one EEG/EMG channel pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSet {
    pub freqs: Vec<f64>,
    pub sx: Vec<Vec<f64>>,
    pub sy: Vec<Vec<f64>>,
    pub sxy: Vec<Vec<Complex64>>,
    pub mean_sx: Vec<f64>,
    pub mean_sy: Vec<f64>,
    pub mean_sxy: Vec<Complex64>,
}

impl SpectrumSet {
    pub fn compute<A: AsRef<[f64]>, B: AsRef<[f64]>>(
        eeg_trials: &[A],
        emg_trials: &[B],
        sample_rate_hz: f64,
    ) -> Result<Self> {
        if eeg_trials.len() != emg_trials.len() {
            return Err(Error::Shape(format!(
                "{} EEG segments vs {} EMG segments",
                eeg_trials.len(),
                emg_trials.len()
            )));
        }
        let len = eeg_trials.first().map_or(0, |s| s.as_ref().len());
        if eeg_trials.iter().map(|s| s.as_ref().len()).chain(emg_trials.iter().map(|s| s.as_ref().len())).any(|l| l != len) {
            return Err(Error::Shape("segments differ in length".into()));
        }
        let sp = Spectrometer::new(len)?;
        let mut set = SpectrumSet {
            freqs: sp.freqs(sample_rate_hz),
            sx: Vec::new(),
            sy: Vec::new(),
            sxy: Vec::new(),
            mean_sx: vec![0.0; sp.bins()],
            mean_sy: vec![0.0; sp.bins()],
            mean_sxy: vec![Complex64::new(0.0, 0.0); sp.bins()],
        };
        for (x, y) in eeg_trials.iter().zip(emg_trials) {
            let fx = sp.transform(x.as_ref())?;
            let fy = sp.transform(y.as_ref())?;
            set.sx.push(fx.iter().map(|c| c.norm_sqr()).collect());
            set.sy.push(fy.iter().map(|c| c.norm_sqr()).collect());
            set.sxy.push(fx.iter().zip(&fy).map(|(a, b)| a * b.conj()).collect());
        }
        let n = eeg_trials.len().max(1) as f64;
        for i in 0..set.sx.len() {
            for k in 0..sp.bins() {
                set.mean_sx[k] += set.sx[i][k] / n;
                set.mean_sy[k] += set.sy[i][k] / n;
                set.mean_sxy[k] += set.sxy[i][k] / n;
            }
        }
        Ok(set)
    }

    pub fn msc(&self) -> Vec<f64> {
        coherence(&self.mean_sx, &self.mean_sy, &self.mean_sxy)
    }
}

fn coherence(sx: &[f64], sy: &[f64], sxy: &[Complex64]) -> Vec<f64> {
    sx.iter()
        .zip(sy)
        .zip(sxy)
        .map(|((&a, &b), c)| {
            let den = a * b;
            if den > 0.0 {
                (c.norm_sqr() / den).min(1.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// MSC spectrum of one EEG/EMG channel pair across `N >= 2` paired segments.
pub fn msc<A: AsRef<[f64]>, B: AsRef<[f64]>>(
    eeg_trials: &[A],
    emg_trials: &[B],
    sample_rate_hz: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if eeg_trials.len() < 2 {
        return Err(Error::InsufficientTrials {
            needed: 2,
            got: eeg_trials.len(),
        });
    }
    let set = SpectrumSet::compute(eeg_trials, emg_trials, sample_rate_hz)?;
    let m = set.msc();
    Ok((set.freqs, m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub name: String,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Band {
    pub fn new(name: &str, lo_hz: f64, hi_hz: f64) -> Self {
        Band {
            name: name.to_string(),
            lo_hz,
            hi_hz,
        }
    }
}

/// Ordered frequency bands. Overlapping and nested bands are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BandTable {
    pub bands: Vec<Band>,
}

impl Default for BandTable {
    fn default() -> Self {
        BandTable {
            bands: vec![
                Band::new("delta", 1.5, 4.0),
                Band::new("theta", 4.0, 8.0),
                Band::new("alpha", 8.0, 13.0),
                Band::new("beta1", 13.0, 20.0),
                Band::new("beta2", 20.0, 30.0),
                Band::new("beta", 13.0, 30.0),
                Band::new("gamma1", 30.0, 45.0),
                Band::new("gamma2", 45.0, 60.0),
                Band::new("gamma3", 60.0, 80.0),
                Band::new("gamma", 30.0, 80.0),
                Band::new("full", 1.5, 80.0),
            ],
        }
    }
}

impl BandTable {
    pub fn new(bands: Vec<Band>) -> Result<Self> {
        let table = BandTable { bands };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::InvalidParameter("band table is empty".into()));
        }
        for (i, b) in self.bands.iter().enumerate() {
            if !(b.lo_hz >= 0.0 && b.lo_hz < b.hi_hz) {
                return Err(Error::InvalidParameter(format!(
                    "band `{}` must satisfy 0 <= lo < hi, got {}-{}",
                    b.name, b.lo_hz, b.hi_hz
                )));
            }
            if b.name.is_empty() || b.name.contains([',', '"']) {
                return Err(Error::InvalidParameter(format!("invalid band name `{}`", b.name)));
            }
            if self.bands[..i].iter().any(|o| o.name == b.name) {
                return Err(Error::InvalidParameter(format!("duplicate band `{}`", b.name)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.bands.iter().position(|b| b.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.bands.iter().map(|b| b.name.clone()).collect()
    }

    /// Bin indices belonging to each band: `lo <= f < hi`, with the last band
    /// of the table also taking `f == hi`.
    pub fn bin_sets(&self, freqs: &[f64]) -> Result<Vec<Vec<usize>>> {
        let last = self.bands.len() - 1;
        self.bands
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let bins: Vec<usize> = freqs
                    .iter()
                    .enumerate()
                    .filter(|(_, &f)| f >= b.lo_hz && (f < b.hi_hz || (k == last && f == b.hi_hz)))
                    .map(|(i, _)| i)
                    .collect();
                if bins.is_empty() {
                    Err(Error::EmptyBand(b.name.clone()))
                } else {
                    Ok(bins)
                }
            })
            .collect()
    }
}

/// Mean MSC over each band's bins.
pub fn band_average(freqs: &[f64], msc: &[f64], bands: &BandTable) -> Result<Vec<f64>> {
    if freqs.len() != msc.len() {
        return Err(Error::Shape(format!("{} freqs vs {} MSC values", freqs.len(), msc.len())));
    }
    let sets = bands.bin_sets(freqs)?;
    Ok(average_bins(msc, &sets))
}

fn average_bins(values: &[f64], sets: &[Vec<usize>]) -> Vec<f64> {
    sets.iter()
        .map(|bins| bins.iter().map(|&i| values[i]).sum::<f64>() / bins.len() as f64)
        .collect()
}

/// How each feature-matrix row is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FeatureScheme {
    /// Each trial is cut into `sub_windows` equal non-overlapping pieces which
    /// serve as the averaging units of the MSC, so a row depends on its own
    /// trial only.
    PerTrial { sub_windows: usize },
    /// MSC averaged across all trials of the row's class; every row of a class
    /// is identical. Diagnostic use only.
    TrialAveraged,
}

impl Default for FeatureScheme {
    fn default() -> Self {
        FeatureScheme::PerTrial { sub_windows: 4 }
    }
}

/// Band-averaged MSC for every (EEG h, EMG j, band k) triplet.
pub fn build_feature_matrix(trials: &TrialSet, bands: &BandTable, scheme: FeatureScheme) -> Result<FeatureMatrix> {
    bands.validate()?;
    if trials.is_empty() {
        return Err(Error::EmptyInput("trial set has no trials".into()));
    }
    let counts = trials.class_counts();
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::ClassMissing(format!("no trials of {:?}", Label::from_index(missing))));
    }
    let (h_n, j_n, k_n) = (trials.eeg_channels(), trials.emg_channels(), bands.len());
    if h_n == 0 || j_n == 0 {
        return Err(Error::EmptyInput("trials need at least one EEG and one EMG channel".into()));
    }
    let ids = FeatureId::grid(h_n, j_n, k_n);
    let values = match scheme {
        FeatureScheme::PerTrial { sub_windows } => per_trial_rows(trials, bands, sub_windows)?,
        FeatureScheme::TrialAveraged => class_averaged_rows(trials, bands)?,
    };
    FeatureMatrix::new(values, ids, trials.labels.clone(), bands.names())
}

/// FFTs of every channel of one trial, cut into sub-windows: `[channel][window][bin]`.
fn windowed_spectra(chans: &[Vec<f64>], sp: &Spectrometer, win: usize, windows: usize) -> Result<Vec<Vec<Vec<Complex64>>>> {
    chans
        .iter()
        .map(|seg| {
            (0..windows)
                .map(|w| sp.transform(&seg[w * win..(w + 1) * win]))
                .collect()
        })
        .collect()
}

fn pair_msc(x: &[Vec<Complex64>], y: &[Vec<Complex64>], bins: usize) -> Vec<f64> {
    let mut sx = vec![0.0; bins];
    let mut sy = vec![0.0; bins];
    let mut sxy = vec![Complex64::new(0.0, 0.0); bins];
    for (fx, fy) in x.iter().zip(y) {
        for k in 0..bins {
            sx[k] += fx[k].norm_sqr();
            sy[k] += fy[k].norm_sqr();
            sxy[k] += fx[k] * fy[k].conj();
        }
    }
    // Averaging factors cancel in the ratio.
    coherence(&sx, &sy, &sxy)
}

fn per_trial_rows(trials: &TrialSet, bands: &BandTable, sub_windows: usize) -> Result<Vec<Vec<f64>>> {
    if sub_windows < 2 {
        return Err(Error::InsufficientTrials {
            needed: 2,
            got: sub_windows,
        });
    }
    let win = trials.samples() / sub_windows;
    let sp = Spectrometer::new(win)?;
    let sets = bands.bin_sets(&sp.freqs(trials.sample_rate_hz))?;
    (0..trials.len())
        .into_par_iter()
        .map(|i| {
            let ex = windowed_spectra(&trials.eeg[i], &sp, win, sub_windows)?;
            let ey = windowed_spectra(&trials.emg[i], &sp, win, sub_windows)?;
            let mut row = Vec::with_capacity(ex.len() * ey.len() * sets.len());
            for x in &ex {
                for y in &ey {
                    row.extend(average_bins(&pair_msc(x, y, sp.bins()), &sets));
                }
            }
            Ok(row)
        })
        .collect()
}

fn class_averaged_rows(trials: &TrialSet, bands: &BandTable) -> Result<Vec<Vec<f64>>> {
    let counts = trials.class_counts();
    if let Some(&c) = counts.iter().find(|&&c| c < 2) {
        return Err(Error::InsufficientTrials { needed: 2, got: c });
    }
    let sp = Spectrometer::new(trials.samples())?;
    let sets = bands.bin_sets(&sp.freqs(trials.sample_rate_hz))?;
    let class_rows: Vec<Vec<f64>> = [Label::Class1, Label::Class2]
        .iter()
        .map(|&label| {
            let idx: Vec<usize> = (0..trials.len()).filter(|&i| trials.labels[i] == label).collect();
            let spectra = |i: usize, eeg: bool| -> Result<Vec<Vec<Complex64>>> {
                let chans = if eeg { &trials.eeg[i] } else { &trials.emg[i] };
                chans.iter().map(|s| sp.transform(s)).collect()
            };
            let ex: Vec<Vec<Vec<Complex64>>> = idx.iter().map(|&i| spectra(i, true)).collect::<Result<_>>()?;
            let ey: Vec<Vec<Vec<Complex64>>> = idx.iter().map(|&i| spectra(i, false)).collect::<Result<_>>()?;
            let mut row = Vec::new();
            for h in 0..trials.eeg_channels() {
                let x: Vec<Vec<Complex64>> = ex.iter().map(|t| t[h].clone()).collect();
                for j in 0..trials.emg_channels() {
                    let y: Vec<Vec<Complex64>> = ey.iter().map(|t| t[j].clone()).collect();
                    row.extend(average_bins(&pair_msc(&x, &y, sp.bins()), &sets));
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(trials.labels.iter().map(|l| class_rows[l.index()].clone()).collect())
}
