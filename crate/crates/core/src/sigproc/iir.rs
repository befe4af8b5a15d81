//! IIR design (Butterworth and Chebyshev type I prototypes, bilinear transform)
//! and zero-phase application as a cascade of second-order sections.
//!
//! Designs are built pole by pole in the zero-pole domain and never expanded
//! into a single polynomial, which keeps high orders (the default bandpass is
//! order 86) numerically usable.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One biquad `b0 + b1 z^-1 + b2 z^-2 / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Section {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z2 * self.b[2];
        let den = self.a[0] + z_inv * self.a[1] + z2 * self.a[2];
        num / den
    }

    /// Roots of the denominator.
    pub fn poles(&self) -> [Complex64; 2] {
        let (a1, a2) = (self.a[1], self.a[2]);
        if a2 == 0.0 {
            return [Complex64::new(-a1, 0.0), Complex64::new(0.0, 0.0)];
        }
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        [(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }

    /// Steady-state transposed direct-form II state for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let gain = (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2]);
        let z1 = self.b[2] - self.a[2] * gain;
        let z0 = self.b[1] - self.a[1] * gain + z1;
        [z0, z1]
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Section>,
}

/// Prototype family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    Butterworth,
    Chebyshev1 { ripple_db: f64 },
}

/// Filter-design descriptor for [`bandpass`](super::bandpass).
///
/// `order` is the order of the resulting bandpass filter, i.e. twice the
/// lowpass prototype order. If the design at `order` yields a pole on or
/// outside the unit circle, `fallback_order` is tried before giving up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterDesign {
    pub family: Family,
    pub order: usize,
    pub fallback_order: Option<usize>,
}

impl Default for FilterDesign {
    fn default() -> Self {
        FilterDesign {
            family: Family::Chebyshev1 { ripple_db: 0.5 },
            order: 86,
            fallback_order: Some(8),
        }
    }
}

fn prototype_poles(family: Family, n: usize) -> Result<(Vec<Complex64>, f64)> {
    if n == 0 {
        return Err(Error::DesignFailure("prototype order must be positive".into()));
    }
    let nf = n as f64;
    match family {
        Family::Butterworth => {
            let poles = (0..n)
                .map(|k| {
                    let theta = PI * (2.0 * k as f64 + nf + 1.0) / (2.0 * nf);
                    Complex64::from_polar(1.0, theta)
                })
                .collect();
            Ok((poles, 1.0))
        }
        Family::Chebyshev1 { ripple_db } => {
            if !(ripple_db > 0.0) || !ripple_db.is_finite() {
                return Err(Error::DesignFailure(format!(
                    "passband ripple must be positive, got {ripple_db} dB"
                )));
            }
            let eps = (10f64.powf(ripple_db / 10.0) - 1.0).sqrt();
            let mu = (1.0 / eps).asinh() / nf;
            let poles = (0..n)
                .map(|k| {
                    let theta = PI * (2.0 * k as f64 + 1.0) / (2.0 * nf);
                    Complex64::new(-mu.sinh() * theta.sin(), mu.cosh() * theta.cos())
                })
                .collect();
            // Even-order Chebyshev prototypes sit at the bottom of the ripple at DC.
            let reference = if n.is_multiple_of(2) {
                1.0 / (1.0 + eps * eps).sqrt()
            } else {
                1.0
            };
            Ok((poles, reference))
        }
    }
}

fn bilinear(s: Complex64, fs: f64) -> Complex64 {
    let k = Complex64::new(2.0 * fs, 0.0);
    (k + s) / (k - s)
}

fn prewarp(f: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * f / fs).tan()
}

/// Groups digital poles into denominators: conjugate pairs first, then real
/// poles paired in sorted order, a leftover real pole as a first-order section.
fn pole_denominators(poles: &[Complex64]) -> Vec<[f64; 3]> {
    let mut dens = Vec::new();
    let mut reals = Vec::new();
    for p in poles {
        if p.im.abs() <= 1e-12 * p.norm().max(1.0) {
            reals.push(p.re);
        } else if p.im > 0.0 {
            dens.push([1.0, -2.0 * p.re, p.norm_sqr()]);
        }
    }
    reals.sort_by(|a, b| a.total_cmp(b));
    for pair in reals.chunks(2) {
        match *pair {
            [r1, r2] => dens.push([1.0, -(r1 + r2), r1 * r2]),
            [r] => dens.push([1.0, -r, 0.0]),
            _ => unreachable!(),
        }
    }
    dens
}

/// Angle of the upper pole of a denominator `[1, a1, a2]`.
fn pole_angle(a: &[f64; 3]) -> f64 {
    let s = Section { b: [1.0, 0.0, 0.0], a: *a };
    s.poles().iter().map(|p| p.arg().abs()).fold(0.0, f64::max)
}

fn finish(mut sections: Vec<Section>, ref_freq_hz: f64, fs: f64, gain: f64) -> Result<SosFilter> {
    // Poles nearest the unit circle go last.
    sections.sort_by(|x, y| {
        let rx = x.poles()[0].norm().max(x.poles()[1].norm());
        let ry = y.poles()[0].norm().max(y.poles()[1].norm());
        rx.total_cmp(&ry)
    });
    let z_inv = Complex64::from_polar(1.0, -2.0 * PI * ref_freq_hz / fs);
    for s in sections.iter_mut() {
        let mag = s.response(z_inv).norm();
        if !(mag.is_finite() && mag > 0.0) {
            return Err(Error::DesignFailure("section has no gain at the reference frequency".into()));
        }
        for b in s.b.iter_mut() {
            *b /= mag;
        }
    }
    if let Some(first) = sections.first_mut() {
        for b in first.b.iter_mut() {
            *b *= gain;
        }
    }
    let filter = SosFilter { sections };
    filter.check_stable()?;
    Ok(filter)
}

impl SosFilter {
    /// Bandpass of total order `order` (must be even) between `lo_hz` and `hi_hz`.
    pub fn bandpass(family: Family, order: usize, lo_hz: f64, hi_hz: f64, fs: f64) -> Result<Self> {
        if order < 2 || !order.is_multiple_of(2) {
            return Err(Error::DesignFailure(format!("bandpass order must be even and >= 2, got {order}")));
        }
        check_band(lo_hz, hi_hz, fs)?;
        let (proto, gain) = prototype_poles(family, order / 2)?;
        let w_lo = prewarp(lo_hz, fs);
        let w_hi = prewarp(hi_hz, fs);
        let bw = w_hi - w_lo;
        let w0_sq = w_lo * w_hi;
        let mut analog = Vec::with_capacity(order);
        for p in &proto {
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0_sq).sqrt();
            analog.push((pb + disc) / 2.0);
            analog.push((pb - disc) / 2.0);
        }
        let digital: Vec<Complex64> = analog.iter().map(|&s| bilinear(s, fs)).collect();
        // Analog centre maps back to this digital frequency.
        let centre_hz = (w0_sq.sqrt() / (2.0 * fs)).atan() * fs / PI;

        // The design has order/2 zeros at z = 1 and order/2 at z = -1. Sections
        // whose poles sit below the centre take a double zero at z = 1
        // (highpass-like), those above take a double zero at z = -1, and with an
        // odd prototype order the middle section takes one of each. This keeps
        // every partial product of the cascade close to the overall response.
        let mut dens = pole_denominators(&digital);
        dens.sort_by(|x, y| pole_angle(x).total_cmp(&pole_angle(y)));
        let n = dens.len();
        let half = n / 2;
        let sections = dens
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                let b = if n % 2 == 1 && i == half {
                    [1.0, 0.0, -1.0]
                } else if i < half {
                    [1.0, -2.0, 1.0]
                } else {
                    [1.0, 2.0, 1.0]
                };
                Section { b, a }
            })
            .collect();
        finish(sections, centre_hz, fs, gain)
    }

    pub fn lowpass(family: Family, order: usize, cutoff_hz: f64, fs: f64) -> Result<Self> {
        if !(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0) {
            return Err(Error::DesignFailure(format!(
                "cutoff {cutoff_hz} Hz outside (0, {}) Hz",
                fs / 2.0
            )));
        }
        let (proto, gain) = prototype_poles(family, order)?;
        let wc = prewarp(cutoff_hz, fs);
        let digital: Vec<Complex64> = proto.iter().map(|&p| bilinear(p * wc, fs)).collect();
        let sections = pole_denominators(&digital)
            .into_iter()
            .map(|a| {
                let b = if a[2] == 0.0 { [1.0, 1.0, 0.0] } else { [1.0, 2.0, 1.0] };
                Section { b, a }
            })
            .collect();
        finish(sections, 0.0, fs, gain)
    }

    /// Second-order IIR notch with quality factor `q` (bandwidth `f0 / q`).
    pub fn notch(f0_hz: f64, q: f64, fs: f64) -> Result<Self> {
        if !(f0_hz > 0.0 && f0_hz < fs / 2.0) {
            return Err(Error::DesignFailure(format!(
                "notch frequency {f0_hz} Hz outside (0, {}) Hz",
                fs / 2.0
            )));
        }
        if !(q > 0.0) {
            return Err(Error::DesignFailure(format!("notch quality factor must be positive, got {q}")));
        }
        let w0 = 2.0 * PI * f0_hz / fs;
        let beta = (w0 / q / 2.0).tan();
        let g = 1.0 / (1.0 + beta);
        let c = w0.cos();
        let section = Section {
            b: [g, -2.0 * g * c, g],
            a: [1.0, -2.0 * g * c, 2.0 * g - 1.0],
        };
        let filter = SosFilter { sections: vec![section] };
        filter.check_stable()?;
        Ok(filter)
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.sections
            .iter()
            .flat_map(|s| s.poles())
            .map(|p| p.norm())
            .fold(0.0, f64::max)
    }

    fn check_stable(&self) -> Result<()> {
        let r = self.max_pole_radius();
        if !(r < 1.0) {
            return Err(Error::DesignFailure(format!("unstable design: pole radius {r}")));
        }
        // |h[n]| <= (1/2pi) * integral |H| <= max |H|, so an impulse response
        // exceeding the peak gain means roundoff dominates the cascade.
        let peak = self.peak_gain();
        let len = ((4.0 / (1.0 - r)).ceil() as usize).clamp(64, 1 << 18);
        let mut imp = vec![0.0; len];
        imp[0] = 1.0;
        let h = self.filter(&imp);
        let worst = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(worst <= peak * (1.0 + 1e-6)) {
            return Err(Error::DesignFailure(format!(
                "numerically unusable cascade: impulse response peak {worst:.3e} exceeds gain bound {peak:.3e}"
            )));
        }
        Ok(())
    }

    /// Maximum magnitude response on a dense grid up to Nyquist (relative units).
    fn peak_gain(&self) -> f64 {
        (0..=8192)
            .map(|i| self.gain_at(0.5 * i as f64 / 8192.0, 1.0))
            .fold(0.0, f64::max)
    }

    /// Magnitude response at `freq_hz`.
    pub fn gain_at(&self, freq_hz: f64, fs: f64) -> f64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / fs);
        self.sections.iter().map(|s| s.response(z_inv).norm()).product()
    }

    /// Causal filtering with the given per-section initial states.
    fn run(&self, x: &mut [f64], states: &[[f64; 2]]) {
        for (s, st) in self.sections.iter().zip(states) {
            let [b0, b1, b2] = s.b;
            let [_, a1, a2] = s.a;
            let (mut z0, mut z1) = (st[0], st[1]);
            for v in x.iter_mut() {
                let input = *v;
                let y = b0 * input + z0;
                z0 = b1 * input - a1 * y + z1;
                z1 = b2 * input - a2 * y;
                *v = y;
            }
        }
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.run(&mut y, &vec![[0.0; 2]; self.sections.len()]);
        y
    }

    /// Per-section states for a step of height `level`, cascaded.
    fn steady_states(&self, level: f64) -> Vec<[f64; 2]> {
        let mut scale = level;
        self.sections
            .iter()
            .map(|s| {
                let [z0, z1] = s.step_state();
                let st = [z0 * scale, z1 * scale];
                scale *= s.dc_gain();
                st
            })
            .collect()
    }

    /// Zero-phase forward-backward filtering with odd-reflection padding and
    /// steady-state initial conditions at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let s0 = self.steady_states(ext[0]);
        self.run(&mut ext, &s0);
        ext.reverse();
        let s1 = self.steady_states(ext[0]);
        self.run(&mut ext, &s1);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

pub(crate) fn check_band(lo_hz: f64, hi_hz: f64, fs: f64) -> Result<()> {
    if !(fs > 0.0 && lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fs / 2.0) {
        return Err(Error::DesignFailure(format!(
            "band {lo_hz}-{hi_hz} Hz must satisfy 0 < lo < hi < {} Hz",
            fs / 2.0
        )));
    }
    Ok(())
}
