//! Conditioning of raw paired EEG/EMG recordings into normalised trial segments.

pub mod iir;
pub mod io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use iir::{Family, FilterDesign, SosFilter};

use crate::{Error, Result};

/// Two-class trial tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Class1,
    Class2,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Class1 => 0,
            Label::Class2 => 1,
        }
    }

    pub fn from_index(i: usize) -> Label {
        if i == 0 {
            Label::Class1
        } else {
            Label::Class2
        }
    }

    /// +1 for class1, -1 for class2.
    pub fn sign(self) -> f64 {
        match self {
            Label::Class1 => 1.0,
            Label::Class2 => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ChannelKind {
    Eeg,
    Emg,
}

impl ChannelKind {
    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Eeg => "EEG",
            ChannelKind::Emg => "EMG",
        }
    }
}

/// A continuous multichannel recording with trial onset markers.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    channels: Vec<Vec<f64>>,
    kinds: Vec<ChannelKind>,
    sample_rate_hz: f64,
    markers: Vec<(usize, Label)>,
}

impl RawRecording {
    pub fn new(
        channels: Vec<Vec<f64>>,
        kinds: Vec<ChannelKind>,
        sample_rate_hz: f64,
        markers: Vec<(usize, Label)>,
    ) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if channels.len() != kinds.len() {
            return Err(Error::Shape(format!(
                "{} channels but {} channel kinds",
                channels.len(),
                kinds.len()
            )));
        }
        if let Some(first) = channels.first() {
            if channels.iter().any(|c| c.len() != first.len()) {
                return Err(Error::Shape("recording channels differ in length".into()));
            }
        }
        if markers.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParameter("trial markers must be strictly increasing".into()));
        }
        Ok(RawRecording {
            channels,
            kinds,
            sample_rate_hz,
            markers,
        })
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn kinds(&self) -> &[ChannelKind] {
        &self.kinds
    }

    pub fn markers(&self) -> &[(usize, Label)] {
        &self.markers
    }

    /// Applies `f` to every channel, e.g. a filter.
    pub fn map_channels<F>(&self, f: F) -> Result<RawRecording>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    {
        let channels = self
            .channels
            .par_iter()
            .map(|c| f(c))
            .collect::<Result<Vec<_>>>()?;
        RawRecording::new(channels, self.kinds.clone(), self.sample_rate_hz, self.markers.clone())
    }
}

/// Segmented trials: `eeg[trial][channel][sample]`, likewise `emg`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub eeg: Vec<Vec<Vec<f64>>>,
    pub emg: Vec<Vec<Vec<f64>>>,
    pub labels: Vec<Label>,
    pub sample_rate_hz: f64,
}

impl TrialSet {
    pub fn new(
        eeg: Vec<Vec<Vec<f64>>>,
        emg: Vec<Vec<Vec<f64>>>,
        labels: Vec<Label>,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        if eeg.len() != labels.len() || emg.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} EEG trials, {} EMG trials, {} labels",
                eeg.len(),
                emg.len(),
                labels.len()
            )));
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        let set = TrialSet {
            eeg,
            emg,
            labels,
            sample_rate_hz,
        };
        if !set.is_empty() {
            let (h, j, t) = (set.eeg[0].len(), set.emg[0].len(), set.samples());
            for i in 0..set.len() {
                if set.eeg[i].len() != h || set.emg[i].len() != j {
                    return Err(Error::Shape(format!("trial {i} has a different channel count")));
                }
                if set.eeg[i].iter().chain(&set.emg[i]).any(|s| s.len() != t) {
                    return Err(Error::Shape(format!("trial {i} has a different segment length")));
                }
            }
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn eeg_channels(&self) -> usize {
        self.eeg.first().map_or(0, Vec::len)
    }

    pub fn emg_channels(&self) -> usize {
        self.emg.first().map_or(0, Vec::len)
    }

    pub fn samples(&self) -> usize {
        self.eeg
            .first()
            .and_then(|t| t.first())
            .or_else(|| self.emg.first().and_then(|t| t.first()))
            .map_or(0, Vec::len)
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    fn map_segments<F>(&self, f: F) -> Result<TrialSet>
    where
        F: Fn(usize, ChannelKind, usize, &[f64]) -> Result<Vec<f64>> + Sync,
    {
        let apply = |kind: ChannelKind, trials: &Vec<Vec<Vec<f64>>>| -> Result<Vec<Vec<Vec<f64>>>> {
            trials
                .par_iter()
                .enumerate()
                .map(|(i, chans)| {
                    chans
                        .iter()
                        .enumerate()
                        .map(|(c, seg)| f(i, kind, c, seg))
                        .collect::<Result<Vec<_>>>()
                })
                .collect()
        };
        Ok(TrialSet {
            eeg: apply(ChannelKind::Eeg, &self.eeg)?,
            emg: apply(ChannelKind::Emg, &self.emg)?,
            labels: self.labels.clone(),
            sample_rate_hz: self.sample_rate_hz,
        })
    }
}

/// Finds the smallest `up` (<= 1000) such that `from_hz * up / to_hz` is an integer.
fn rational_ratio(from_hz: f64, to_hz: f64) -> Option<(usize, usize)> {
    for up in 1..=1000usize {
        let down = from_hz * up as f64 / to_hz;
        let r = down.round();
        if r >= 1.0 && (down - r).abs() <= 1e-9 * down.max(1.0) {
            return Some((up, r as usize));
        }
    }
    None
}

/// Rational-ratio downsampling with a zero-phase Butterworth anti-alias filter
/// (order 8, cutoff at 0.45 of the target Nyquist frequency).
pub fn resample(signal: &[f64], from_hz: f64, to_hz: f64) -> Result<Vec<f64>> {
    let unsupported = || Error::UnsupportedRatio { from_hz, to_hz };
    if !(to_hz > 0.0 && from_hz >= to_hz && from_hz.is_finite()) {
        return Err(unsupported());
    }
    let (up, down) = rational_ratio(from_hz, to_hz).ok_or_else(unsupported)?;
    let out_len = (signal.len() as f64 * to_hz / from_hz + 1e-9).floor() as usize;
    if up == down {
        return Ok(signal.to_vec());
    }
    let inter_hz = from_hz * up as f64;
    let cutoff = 0.45 * to_hz / 2.0;
    let aa = SosFilter::lowpass(Family::Butterworth, 8, cutoff, inter_hz)?;
    let mut upsampled = vec![0.0; signal.len() * up];
    for (i, &v) in signal.iter().enumerate() {
        upsampled[i * up] = v * up as f64;
    }
    let filtered = aa.filtfilt(&upsampled);
    Ok((0..out_len).map(|k| filtered[k * down]).collect())
}

/// Zero-phase bandpass filtering.
pub fn bandpass(signal: &[f64], sample_rate_hz: f64, lo_hz: f64, hi_hz: f64, design: &FilterDesign) -> Result<Vec<f64>> {
    let filter = design_bandpass(sample_rate_hz, lo_hz, hi_hz, design)?;
    Ok(filter.filtfilt(signal))
}

/// Designs the bandpass described by `design`, falling back to
/// `design.fallback_order` when the primary order is unstable.
pub fn design_bandpass(sample_rate_hz: f64, lo_hz: f64, hi_hz: f64, design: &FilterDesign) -> Result<SosFilter> {
    iir::check_band(lo_hz, hi_hz, sample_rate_hz)?;
    match SosFilter::bandpass(design.family, design.order, lo_hz, hi_hz, sample_rate_hz) {
        Ok(f) => Ok(f),
        Err(e) => match design.fallback_order {
            Some(order) if order != design.order => {
                log::warn!("bandpass order {} failed ({e}); falling back to order {order}", design.order);
                SosFilter::bandpass(design.family, order, lo_hz, hi_hz, sample_rate_hz)
            }
            _ => Err(e),
        },
    }
}

pub const DEFAULT_NOTCH_Q: f64 = 30.0;

/// Zero-phase second-order notch at `mains_hz`.
pub fn notch(signal: &[f64], sample_rate_hz: f64, mains_hz: f64) -> Result<Vec<f64>> {
    notch_with_q(signal, sample_rate_hz, mains_hz, DEFAULT_NOTCH_Q)
}

pub fn notch_with_q(signal: &[f64], sample_rate_hz: f64, mains_hz: f64, q: f64) -> Result<Vec<f64>> {
    Ok(SosFilter::notch(mains_hz, q, sample_rate_hz)?.filtfilt(signal))
}

/// Cuts one trial per marker, `round(segment_seconds * rate)` samples long.
pub fn segment(recording: &RawRecording, segment_seconds: f64) -> Result<TrialSet> {
    if !(segment_seconds > 0.0) {
        return Err(Error::InvalidParameter(format!("segment length must be positive, got {segment_seconds} s")));
    }
    let t = (segment_seconds * recording.sample_rate_hz).round() as usize;
    let len = recording.len();
    let mut eeg = Vec::with_capacity(recording.markers.len());
    let mut emg = Vec::with_capacity(recording.markers.len());
    let mut labels = Vec::with_capacity(recording.markers.len());
    for (index, &(start, label)) in recording.markers.iter().enumerate() {
        if start + t > len {
            return Err(Error::MarkerOutOfBounds { index, start, len });
        }
        let cut = |kind: ChannelKind| -> Vec<Vec<f64>> {
            recording
                .channels
                .iter()
                .zip(&recording.kinds)
                .filter(|(_, &k)| k == kind)
                .map(|(c, _)| c[start..start + t].to_vec())
                .collect()
        };
        eeg.push(cut(ChannelKind::Eeg));
        emg.push(cut(ChannelKind::Emg));
        labels.push(label);
    }
    TrialSet::new(eeg, emg, labels, recording.sample_rate_hz)
}

fn normalize_segment(seg: &[f64], dt: f64, trial: usize, kind: ChannelKind, channel: usize) -> Result<Vec<f64>> {
    let auc: f64 = seg.iter().map(|v| v.abs()).sum::<f64>() * dt;
    if !(auc > 0.0) || !auc.is_finite() {
        return Err(Error::DegenerateSegment {
            trial,
            kind: kind.name(),
            channel,
        });
    }
    Ok(seg.iter().map(|v| v / auc).collect())
}

/// Full-wave rectifies EMG and divides every segment by its own area
/// `sum |x| * dt`, so each output segment has unit area.
pub fn rectify_and_normalize(trials: &TrialSet) -> Result<TrialSet> {
    condition_segments(trials, true, true)
}

fn condition_segments(trials: &TrialSet, rectify_emg: bool, normalize: bool) -> Result<TrialSet> {
    let dt = 1.0 / trials.sample_rate_hz;
    trials.map_segments(|i, kind, c, seg| {
        let rectified: Vec<f64> = if rectify_emg && kind == ChannelKind::Emg {
            seg.iter().map(|v| v.abs()).collect()
        } else {
            seg.to_vec()
        };
        if normalize {
            normalize_segment(&rectified, dt, i, kind, c)
        } else {
            Ok(rectified)
        }
    })
}

/// Which conditioning steps to apply to segmented trials, and their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Preprocess {
    /// Resample every channel to this rate before filtering, if set.
    pub target_rate_hz: Option<f64>,
    pub bandpass: bool,
    pub bandpass_lo_hz: f64,
    pub bandpass_hi_hz: f64,
    pub filter: FilterDesign,
    pub notch: bool,
    pub mains_hz: f64,
    pub notch_q: f64,
    pub rectify_emg: bool,
    pub normalize_auc: bool,
}

impl Default for Preprocess {
    fn default() -> Self {
        Preprocess {
            target_rate_hz: None,
            bandpass: true,
            bandpass_lo_hz: 1.5,
            bandpass_hi_hz: 80.0,
            filter: FilterDesign::default(),
            notch: true,
            mains_hz: 50.0,
            notch_q: DEFAULT_NOTCH_Q,
            rectify_emg: true,
            normalize_auc: true,
        }
    }
}

/// Runs the configured chain (resample, bandpass, notch, rectify, normalise)
/// segment by segment.
pub fn condition(trials: &TrialSet, cfg: &Preprocess) -> Result<TrialSet> {
    let mut rate = trials.sample_rate_hz;
    let mut current = trials.clone();
    if let Some(target) = cfg.target_rate_hz {
        if target != rate {
            current = current.map_segments(|_, _, _, seg| resample(seg, rate, target))?;
            current.sample_rate_hz = target;
            rate = target;
        }
    }
    let bp = if cfg.bandpass {
        Some(design_bandpass(rate, cfg.bandpass_lo_hz, cfg.bandpass_hi_hz, &cfg.filter)?)
    } else {
        None
    };
    let nf = if cfg.notch {
        Some(SosFilter::notch(cfg.mains_hz, cfg.notch_q, rate)?)
    } else {
        None
    };
    if bp.is_some() || nf.is_some() {
        current = current.map_segments(|_, _, _, seg| {
            let mut y = seg.to_vec();
            if let Some(f) = &bp {
                y = f.filtfilt(&y);
            }
            if let Some(f) = &nf {
                y = f.filtfilt(&y);
            }
            Ok(y)
        })?;
    }
    if cfg.rectify_emg || cfg.normalize_auc {
        current = condition_segments(&current, cfg.rectify_emg, cfg.normalize_auc)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn resample_lengths_and_identity() {
        let x = vec![0.5; 4000];
        assert_eq!(resample(&x, 4000.0, 500.0).unwrap().len(), 500);
        let y = sine(3.0, 500.0, 300);
        assert_eq!(resample(&y, 500.0, 500.0).unwrap(), y);
        assert_eq!(resample(&vec![1.0; 1001], 1000.0, 400.0).unwrap().len(), 400);
    }

    #[test]
    fn resample_rejects_upsampling_and_odd_ratios() {
        assert!(matches!(resample(&[1.0; 10], 250.0, 500.0), Err(Error::UnsupportedRatio { .. })));
        assert!(matches!(
            resample(&[1.0; 10], 1000.0, 1000.0 / std::f64::consts::E),
            Err(Error::UnsupportedRatio { .. })
        ));
        assert!(resample(&[1.0; 10], 500.0, 0.0).is_err());
    }

    #[test]
    fn resampled_sine_matches_analytic_sine() {
        let x = sine(10.0, 2000.0, 8000);
        let y = resample(&x, 2000.0, 500.0).unwrap();
        let expect = sine(10.0, 500.0, 2000);
        let worst = y[100..1900]
            .iter()
            .zip(&expect[100..1900])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "worst per-sample error {worst}");
    }

    #[test]
    fn fractional_ratio_preserves_low_tone() {
        let x = sine(5.0, 1000.0, 4000);
        let y = resample(&x, 1000.0, 400.0).unwrap();
        let expect = sine(5.0, 400.0, 1600);
        let worst = y[100..1500]
            .iter()
            .zip(&expect[100..1500])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "worst per-sample error {worst}");
    }

    #[test]
    fn bandpass_passes_40hz_and_kills_drift() {
        let fs = 500.0;
        let d = FilterDesign::default();
        let x = sine(40.0, fs, 4000);
        let y = bandpass(&x, fs, 1.5, 80.0, &d).unwrap();
        let ratio = rms(&y[1000..3000]) / rms(&x[1000..3000]);
        assert!((ratio - 1.0).abs() < 0.05, "40 Hz gain {ratio}");

        let drift = sine(0.2, fs, 20000);
        let y = bandpass(&drift, fs, 1.5, 80.0, &d).unwrap();
        let att = 20.0 * (rms(&y[5000..15000]) / rms(&drift[5000..15000])).log10();
        assert!(att <= -20.0, "drift attenuation {att} dB");
    }

    #[test]
    fn zero_in_zero_out() {
        let z = vec![0.0; 512];
        assert!(bandpass(&z, 500.0, 1.5, 80.0, &FilterDesign::default())
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        assert!(notch(&z, 500.0, 50.0).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn notch_removes_mains_keeps_20hz() {
        let fs = 500.0;
        let x = sine(50.0, fs, 5000);
        let y = notch(&x, fs, 50.0).unwrap();
        let resid = rms(&y[1000..4000]) / rms(&x[1000..4000]);
        assert!(resid <= 0.03, "residual {resid}");
        let x = sine(20.0, fs, 5000);
        let y = notch(&x, fs, 50.0).unwrap();
        let kept = rms(&y[1000..4000]) / rms(&x[1000..4000]);
        assert!((kept - 1.0).abs() < 0.01, "20 Hz gain {kept}");
        for f in [45.0, 55.0] {
            let x = sine(f, fs, 5000);
            let y = notch(&x, fs, 50.0).unwrap();
            let db = 20.0 * (rms(&y[1000..4000]) / rms(&x[1000..4000])).log10();
            assert!(db > -1.0, "{f} Hz: {db} dB");
        }
    }

    #[test]
    fn filtfilt_is_zero_phase() {
        let fs = 500.0;
        let x = sine(12.0, fs, 3000);
        let y = bandpass(&x, fs, 1.5, 80.0, &FilterDesign::default()).unwrap();
        let xc = |lag: i64| -> f64 {
            (1000..2000)
                .map(|i| x[i] * y[(i as i64 + lag) as usize])
                .sum()
        };
        let best = (-20..=20).max_by(|&a, &b| xc(a).total_cmp(&xc(b))).unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn bandpass_rejects_edges_outside_nyquist() {
        let d = FilterDesign::default();
        assert!(matches!(bandpass(&[0.0; 10], 100.0, 1.5, 80.0, &d), Err(Error::DesignFailure(_))));
        assert!(matches!(notch(&[0.0; 10], 80.0, 50.0), Err(Error::DesignFailure(_))));
    }

    fn recording(len: usize, markers: Vec<(usize, Label)>) -> RawRecording {
        let chans = vec![
            (0..len).map(|i| i as f64).collect(),
            (0..len).map(|i| -(i as f64)).collect(),
            vec![1.0; len],
        ];
        RawRecording::new(chans, vec![ChannelKind::Eeg, ChannelKind::Emg, ChannelKind::Eeg], 500.0, markers).unwrap()
    }

    #[test]
    fn segment_cuts_one_trial_per_marker() {
        let rec = recording(
            7000,
            vec![(0, Label::Class1), (2500, Label::Class2), (5000, Label::Class1)],
        );
        let set = segment(&rec, 4.0).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.samples(), 2000);
        assert_eq!(set.eeg_channels(), 2);
        assert_eq!(set.emg_channels(), 1);
        assert_eq!(set.labels, vec![Label::Class1, Label::Class2, Label::Class1]);
        assert_eq!(set.eeg[1][0][0], 2500.0);
        assert_eq!(set.emg[2][0][1], -5001.0);
    }

    #[test]
    fn segment_edge_cases() {
        let rec = recording(100, vec![]);
        assert!(segment(&rec, 0.1).unwrap().is_empty());
        let rec = recording(100, vec![(99, Label::Class1)]);
        assert!(matches!(segment(&rec, 0.1), Err(Error::MarkerOutOfBounds { index: 0, start: 99, .. })));
    }

    #[test]
    fn raw_recording_invariants() {
        assert!(RawRecording::new(vec![vec![0.0; 3], vec![0.0; 4]], vec![ChannelKind::Eeg; 2], 1.0, vec![]).is_err());
        assert!(RawRecording::new(vec![vec![0.0; 3]], vec![ChannelKind::Eeg], 0.0, vec![]).is_err());
        assert!(RawRecording::new(
            vec![vec![0.0; 3]],
            vec![ChannelKind::Eeg],
            1.0,
            vec![(1, Label::Class1), (1, Label::Class2)]
        )
        .is_err());
    }

    #[test]
    fn rectify_normalize_hand_case() {
        let set = TrialSet::new(
            vec![vec![vec![0.25, 0.25, 0.25, 0.25]]],
            vec![vec![vec![1.0, -1.0, 2.0, -2.0]]],
            vec![Label::Class1],
            1.0,
        )
        .unwrap();
        let out = rectify_and_normalize(&set).unwrap();
        let expect = [1.0 / 6.0, 1.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0];
        for (a, b) in out.emg[0][0].iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        // already non-negative with unit area: fixed point
        assert_eq!(out.eeg[0][0], vec![0.25; 4]);
    }

    #[test]
    fn rectify_normalize_rejects_zero_segment() {
        let set = TrialSet::new(
            vec![vec![vec![1.0; 4]], vec![vec![1.0; 4]]],
            vec![vec![vec![1.0; 4]], vec![vec![0.0; 4]]],
            vec![Label::Class1, Label::Class2],
            1.0,
        )
        .unwrap();
        let err = rectify_and_normalize(&set).unwrap_err();
        assert!(matches!(err, Error::DegenerateSegment { trial: 1, kind: "EMG", channel: 0 }));
    }

    #[test]
    fn condition_chain_runs() {
        let fs = 500.0;
        let seg = sine(10.0, fs, 2000);
        let set = TrialSet::new(
            vec![vec![seg.clone()], vec![seg.clone()]],
            vec![vec![seg.clone()], vec![seg]],
            vec![Label::Class1, Label::Class2],
            fs,
        )
        .unwrap();
        let out = condition(&set, &Preprocess::default()).unwrap();
        for seg in out.eeg.iter().chain(&out.emg).flatten() {
            let auc: f64 = seg.iter().map(|v| v.abs()).sum::<f64>() / fs;
            assert!((auc - 1.0).abs() < 1e-9);
        }
        assert!(out.emg.iter().flatten().flatten().all(|&v| v >= 0.0));
    }
}
