//! Spectral and modal identification of oscillations in recorded traces, and
//! their classification into synchronous, sub-synchronous and
//! near-synchronous resonances.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::poly::eigenvalues;
use crate::sim::SimTrace;

/// Shortest window accepted by the estimators (s).
pub const MIN_WINDOW: f64 = 0.2;
/// Delay between the last event and the start of the analysis window (s).
pub const POST_EVENT_DELAY: f64 = 0.1;
const ZERO_PAD: usize = 8;
const MAX_PENCIL_ORDER: usize = 6;
/// Rate the pencil works at; longer records are block-averaged down to it.
const PENCIL_RATE: f64 = 1000.0;
/// Longest stretch handed to the pencil (s).
const PENCIL_SPAN: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Ascending, uniform grid (Hz).
    pub freqs: Vec<f64>,
    /// Single-sided amplitude, scaled so a pure tone reads its amplitude.
    pub magnitude: Vec<f64>,
    pub window: &'static str,
    pub samples: usize,
    pub fft_len: usize,
    /// Smallest magnitude counted as a peak.
    pub floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub freq_hz: f64,
    pub amplitude: f64,
}

/// Hann-windowed amplitude spectrum of a linearly detrended signal.
pub fn estimate_spectrum(signal: &[f64], fs: f64) -> Result<Spectrum> {
    let n = signal.len();
    if !(fs > 0.0) || (n as f64) / fs < MIN_WINDOW || n < 4 {
        return Err(Error::InsufficientData(format!(
            "{n} samples at {fs} Hz is shorter than {MIN_WINDOW} s"
        )));
    }
    let scale = (signal.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let y = detrend(signal);
    let w: Vec<f64> = (0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos()).collect();
    let wsum: f64 = w.iter().sum();
    let len = (n * ZERO_PAD).next_power_of_two();
    let mut buf: Vec<Complex64> = y.iter().zip(&w).map(|(y, w)| Complex64::new(y * w, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let half = len / 2 + 1;
    let magnitude: Vec<f64> = buf[..half].iter().map(|c| 2.0 * c.norm() / wsum).collect();
    let freqs = (0..half).map(|k| k as f64 * fs / len as f64).collect();
    Ok(Spectrum {
        freqs,
        magnitude,
        window: "hann",
        samples: n,
        fft_len: len,
        floor: 1e-9 * scale.max(1e-6),
    })
}

/// Removes the least-squares line.
pub fn detrend(signal: &[f64]) -> Vec<f64> {
    let n = signal.len() as f64;
    let tm = (n - 1.0) / 2.0;
    let ym = signal.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (k, y) in signal.iter().enumerate() {
        let dt = k as f64 - tm;
        sxy += dt * (y - ym);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    signal
        .iter()
        .enumerate()
        .map(|(k, y)| y - ym - slope * (k as f64 - tm))
        .collect()
}

impl Spectrum {
    fn bin_width(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }

    /// Local maxima above the floor, refined by a parabola through the
    /// log-magnitudes of the neighbouring bins; strongest first.
    pub fn peaks(&self) -> Vec<Peak> {
        let m = &self.magnitude;
        let mut out = Vec::new();
        for k in 1..m.len().saturating_sub(1) {
            if m[k] > m[k - 1] && m[k] >= m[k + 1] && m[k] > self.floor {
                out.push(self.refine(k));
            }
        }
        out.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude));
        out
    }

    fn refine(&self, k: usize) -> Peak {
        let m = &self.magnitude;
        let (a, b, c) = (m[k - 1].max(1e-300).ln(), m[k].ln(), m[k + 1].max(1e-300).ln());
        let denom = a - 2.0 * b + c;
        let delta = if denom < 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        Peak {
            freq_hz: self.freqs[k] + delta * self.bin_width(),
            amplitude: (b - 0.25 * (a - c) * delta).exp(),
        }
    }

    /// Strongest peak at or above `f_min`.
    pub fn dominant_peak(&self, f_min: f64) -> Option<Peak> {
        self.peaks().into_iter().find(|p| p.freq_hz >= f_min)
    }

    /// Strongest peak within `tol` of `freq`.
    pub fn peak_near(&self, freq: f64, tol: f64) -> Option<Peak> {
        self.peaks().into_iter().find(|p| (p.freq_hz - freq).abs() <= tol)
    }
}

/// One mode identified by the pencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedMode {
    /// Continuous-time pole (1/s); the upper half-plane member of a pair.
    pub pole: Complex64,
    pub freq_hz: f64,
    pub zeta: f64,
    /// Initial amplitude of the real-valued component.
    pub amplitude: f64,
    /// Complex residue at the segment start; the component is `Re(k·r·e^{st})`
    /// with `k = 2` for pairs and `1` for real poles.
    pub residue: Complex64,
    /// Share of the segment energy carried by the mode.
    pub energy_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RingdownFit {
    /// Modes by decreasing energy; constant offsets are excluded.
    pub modes: Vec<FittedMode>,
}

impl FittedMode {
    pub fn value_at(&self, t: f64) -> f64 {
        let k = if self.freq_hz > 0.0 { 2.0 } else { 1.0 };
        k * (self.residue * (self.pole * t).exp()).re
    }
}

impl RingdownFit {
    pub fn dominant(&self) -> Option<&FittedMode> {
        self.modes.first()
    }

    /// Oscillatory mode closest in frequency to `freq`.
    pub fn nearest(&self, freq: f64) -> Option<&FittedMode> {
        self.modes
            .iter()
            .filter(|m| m.freq_hz > 0.0)
            .min_by(|a, b| (a.freq_hz - freq).abs().total_cmp(&(b.freq_hz - freq).abs()))
    }
}

/// Matrix-pencil fit of a sum of damped exponentials.
///
/// Fails with [`Error::NoDominantMode`] when no mode carries 5 % of the
/// segment energy.
pub fn fit_ringdown(segment: &[f64], fs: f64) -> Result<RingdownFit> {
    if !(fs > 0.0) || (segment.len() as f64) / fs < MIN_WINDOW {
        return Err(Error::InsufficientData(format!(
            "{} samples at {fs} Hz is shorter than {MIN_WINDOW} s",
            segment.len()
        )));
    }
    let factor = ((fs / PENCIL_RATE).floor() as usize).max(1);
    let span = ((PENCIL_SPAN * fs) as usize).min(segment.len());
    let y: Vec<f64> = segment[..span]
        .chunks_exact(factor)
        .map(|c| c.iter().sum::<f64>() / factor as f64)
        .collect();
    let fs = fs / factor as f64;
    let n = y.len();
    let l = n / 3;
    let rows = n - l;
    let hankel = DMatrix::from_fn(rows, l + 1, |r, c| y[r + c]);
    let svd = hankel.svd(false, true);
    let sv = &svd.singular_values;
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|a, b| sv[*b].total_cmp(&sv[*a]));
    let s_max = sv[order[0]];
    if !(s_max > 0.0) {
        return Err(Error::NoDominantMode);
    }
    let m = order
        .iter()
        .take(MAX_PENCIL_ORDER)
        .filter(|&&k| sv[k] > 1e-6 * s_max)
        .count();
    let vm = DMatrix::from_fn(m, l + 1, |r, c| v_t[(order[r], c)]);
    let v1 = vm.columns(0, l).transpose();
    let v2 = vm.columns(1, l).transpose();
    let x = v1
        .svd(true, true)
        .solve(&v2, 1e-12)
        .map_err(|e| Error::NumericFailure(e.to_string()))?;
    let z = eigenvalues(x)?;

    // complex amplitudes by least squares on the Vandermonde system
    let vander = DMatrix::from_fn(n, m, |k, i| z[i].powi(k as i32));
    let yc = DVector::from_iterator(n, y.iter().map(|v| Complex64::new(*v, 0.0)));
    let amps = vander
        .svd(true, true)
        .solve(&yc, 1e-12)
        .map_err(|e| Error::NumericFailure(e.to_string()))?;

    // energy is measured against the segment with its constant offset removed
    let mut residual = y.clone();
    let mut modes = Vec::new();
    for i in 0..m {
        let s = z[i].ln() * fs;
        if s.norm() < 2.0 * PI * 0.05 {
            for (k, r) in residual.iter_mut().enumerate() {
                *r -= (amps[i] * z[i].powi(k as i32)).re;
            }
            continue;
        }
        if s.im < -1e-9 {
            continue;
        }
        let pair = if s.im > 1e-9 { 2.0 } else { 1.0 };
        let energy: f64 = (0..n)
            .map(|k| (pair * (amps[i] * z[i].powi(k as i32)).re).powi(2))
            .sum();
        modes.push(FittedMode {
            pole: s,
            freq_hz: if pair > 1.0 { s.im / (2.0 * PI) } else { 0.0 },
            zeta: -s.re / s.norm(),
            amplitude: amps[i].norm() * pair,
            residue: amps[i],
            energy_fraction: energy,
        });
    }
    let reference = residual.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    for md in &mut modes {
        md.energy_fraction /= reference;
    }
    modes.sort_by(|a, b| b.energy_fraction.total_cmp(&a.energy_fraction));
    if modes.first().map_or(true, |md| md.energy_fraction < 0.05) {
        return Err(Error::NoDominantMode);
    }
    Ok(RingdownFit { modes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Power,
    Current,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResonanceClass {
    Sr,
    Ssr,
    Nsr,
    None,
}

impl fmt::Display for ResonanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResonanceClass::Sr => "SR",
            ResonanceClass::Ssr => "SSR",
            ResonanceClass::Nsr => "NSR",
            ResonanceClass::None => "None",
        })
    }
}

/// Band edges and detection thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bands {
    /// SR band as fractions of f₁.
    pub sr_low: f64,
    pub sr_high: f64,
    /// Lowest SSR frequency (Hz).
    pub ssr_floor: f64,
    /// Upper SSR edge as a fraction of f₁.
    pub ssr_high: f64,
    /// Modes damped more than this are not resonances.
    pub zeta_max: f64,
    /// Peak amplitude floor relative to the deviation RMS.
    pub amplitude_floor: f64,
}

impl Default for Bands {
    fn default() -> Self {
        Self {
            sr_low: 0.8,
            sr_high: 1.1,
            ssr_floor: 1.0,
            ssr_high: 0.5,
            zeta_max: 0.4,
            amplitude_floor: 0.01,
        }
    }
}

impl Bands {
    /// Band of a peak frequency, ignoring damping and amplitude.
    pub fn band(&self, freq: f64, f1: f64, kind: ChannelKind) -> ResonanceClass {
        let sr_top = match kind {
            ChannelKind::Power => self.sr_high * f1,
            ChannelKind::Current => f1,
        };
        if freq >= self.ssr_floor && freq <= self.ssr_high * f1 {
            ResonanceClass::Ssr
        } else if freq >= self.sr_low * f1 && freq <= sr_top {
            ResonanceClass::Sr
        } else if kind == ChannelKind::Current && freq > f1 && freq < 2.0 * f1 {
            ResonanceClass::Nsr
        } else {
            ResonanceClass::None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceReport {
    pub channel: String,
    pub class: ResonanceClass,
    pub freq_hz: f64,
    pub zeta: f64,
    pub amplitude: f64,
}

pub const REPORT_CSV_HEADER: &str = "channel,class,freq_hz,zeta,amplitude";

impl ResonanceReport {
    pub fn to_text(&self) -> String {
        format!(
            "channel: {}\nclass: {}\nfreq_hz: {:.4}\nzeta: {:.4}\namplitude: {:.6e}\n",
            self.channel, self.class, self.freq_hz, self.zeta, self.amplitude
        )
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6e}",
            self.channel, self.class, self.freq_hz, self.zeta, self.amplitude
        )
    }

    /// True when an oscillation was detected with damping below `zeta`.
    pub fn is_resonant_below(&self, zeta: f64) -> bool {
        self.class != ResonanceClass::None && self.zeta < zeta
    }
}

/// Classifies the strongest spectral peak above the SSR floor; damping comes
/// from the fitted mode nearest in frequency.
pub fn classify_resonance(
    channel: &str,
    kind: ChannelKind,
    spectrum: &Spectrum,
    fit: Option<&RingdownFit>,
    deviation_rms: f64,
    f1: f64,
    bands: &Bands,
) -> ResonanceReport {
    let none = |freq: f64, zeta: f64, amplitude: f64| ResonanceReport {
        channel: channel.to_string(),
        class: ResonanceClass::None,
        freq_hz: freq,
        zeta,
        amplitude,
    };
    let Some(peak) = spectrum.dominant_peak(bands.ssr_floor) else {
        return none(0.0, f64::NAN, 0.0);
    };
    let zeta = fit.and_then(|f| f.nearest(peak.freq_hz)).map_or(f64::NAN, |m| m.zeta);
    if peak.amplitude < bands.amplitude_floor * deviation_rms || zeta > bands.zeta_max {
        return none(peak.freq_hz, zeta, peak.amplitude);
    }
    ResonanceReport {
        channel: channel.to_string(),
        class: bands.band(peak.freq_hz, f1, kind),
        freq_hz: peak.freq_hz,
        zeta,
        amplitude: peak.amplitude,
    }
}

/// Samples of `channel` from `POST_EVENT_DELAY` after the last event on.
pub fn analysis_window<'a>(trace: &'a SimTrace, channel: &str) -> Result<&'a [f64]> {
    let data = trace
        .channel(channel)
        .ok_or_else(|| Error::InsufficientData(format!("trace has no channel `{channel}`")))?;
    let start = trace.index_at(trace.last_event + POST_EVENT_DELAY);
    Ok(&data[start..])
}

/// Spectrum, pencil fit and classification of one trace channel.
pub fn analyze_channel(trace: &SimTrace, channel: &str, kind: ChannelKind, bands: &Bands) -> Result<ResonanceReport> {
    let seg = analysis_window(trace, channel)?;
    let fs = trace.sample_rate();
    let fit = match fit_ringdown(seg, fs) {
        Ok(f) => Some(f),
        Err(Error::NoDominantMode) => None,
        Err(e) => return Err(e),
    };
    // slow real modes leak into the low bins; strip them before the FFT
    let mut cleaned = seg.to_vec();
    if let Some(f) = &fit {
        for m in f.modes.iter().filter(|m| m.freq_hz == 0.0) {
            for (k, y) in cleaned.iter_mut().enumerate() {
                *y -= m.value_at(k as f64 / fs);
            }
        }
    }
    let spectrum = estimate_spectrum(&cleaned, fs)?;
    let dev = detrend(seg);
    let rms = (dev.iter().map(|x| x * x).sum::<f64>() / dev.len() as f64).sqrt();
    let f1 = trace.omega_1 / (2.0 * PI);
    Ok(classify_resonance(channel, kind, &spectrum, fit.as_ref(), rms, f1, bands))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingCheck {
    pub pass: bool,
    /// Expected and measured lower / upper components (Hz).
    pub expected: [f64; 2],
    pub measured: [Option<Peak>; 2],
    pub dominant: f64,
}

/// Looks for the `|f₁ − f|` and `f₁ + f` images of a dq-frame oscillation
/// at `f_osc` in the phase current.
///
/// `i_d`, `i_q` are grid-frame current samples starting at `t0`; the final
/// value is removed first so the carrier of the operating point does not mask
/// the images.
pub fn coupling_check(i_d: &[f64], i_q: &[f64], fs: f64, t0: f64, f_osc: f64, f1: f64, tol: f64) -> Result<CouplingCheck> {
    if i_d.is_empty() || i_d.len() != i_q.len() {
        return Err(Error::InsufficientData("current channels missing or of unequal length".into()));
    }
    let tail = (i_d.len() / 20).max(1);
    let mean_tail = |x: &[f64]| x[x.len() - tail..].iter().sum::<f64>() / tail as f64;
    let (d0, q0) = (mean_tail(i_d), mean_tail(i_q));
    let w1 = 2.0 * PI * f1;
    let phase_a: Vec<f64> = i_d
        .iter()
        .zip(i_q)
        .enumerate()
        .map(|(k, (d, q))| {
            let a = w1 * (t0 + k as f64 / fs);
            (d - d0) * a.cos() - (q - q0) * a.sin()
        })
        .collect();
    let spectrum = estimate_spectrum(&phase_a, fs)?;
    let dominant = spectrum.peaks().first().map_or(0.0, |p| p.amplitude);
    let expected = [(f1 - f_osc).abs(), f1 + f_osc];
    let measured = expected.map(|f| spectrum.peak_near(f, tol));
    let pass = dominant > 0.0 && measured.iter().all(|m| m.map_or(false, |p| p.amplitude >= 0.1 * dominant));
    Ok(CouplingCheck {
        pass,
        expected,
        measured,
        dominant,
    })
}

/// [`coupling_check`] on the post-event window of a trace.
pub fn coupling_check_trace(trace: &SimTrace, f_osc: f64, tol: f64) -> Result<CouplingCheck> {
    let d = analysis_window(trace, "igd_grid")?;
    let q = analysis_window(trace, "igq_grid")?;
    let start = trace.index_at(trace.last_event + POST_EVENT_DELAY);
    let t0 = trace.channel("t").unwrap()[start];
    coupling_check(d, q, trace.sample_rate(), t0, f_osc, trace.omega_1 / (2.0 * PI), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sampled(fs: f64, secs: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..(fs * secs) as usize).map(|k| f(k as f64 / fs)).collect()
    }

    #[test]
    fn single_tone_peak() {
        let s = sampled(1000.0, 1.0, |t| (2.0 * PI * 10.0 * t).sin());
        let p = estimate_spectrum(&s, 1000.0).unwrap().dominant_peak(0.0).unwrap();
        assert!((p.freq_hz - 10.0).abs() < 0.1, "{p:?}");
    }

    #[test]
    fn constant_has_no_peak() {
        let s = vec![0.7; 1000];
        assert!(estimate_spectrum(&s, 1000.0).unwrap().peaks().is_empty());
    }

    #[test]
    fn two_tones_recovered() {
        let s = sampled(1000.0, 1.0, |t| (2.0 * PI * 9.0 * t).sin() + 0.3 * (2.0 * PI * 50.0 * t).sin());
        let sp = estimate_spectrum(&s, 1000.0).unwrap();
        let a = sp.peak_near(9.0, 0.2).unwrap();
        let b = sp.peak_near(50.0, 0.2).unwrap();
        let ratio = b.amplitude / a.amplitude;
        assert!((ratio - 0.3).abs() < 0.03, "ratio {ratio}");
    }

    #[test]
    fn short_window_rejected() {
        let s = vec![0.0; 100];
        assert!(matches!(estimate_spectrum(&s, 1000.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn fit_known_pole() {
        let s = sampled(5000.0, 1.0, |t| (-5.0 * t).exp() * (2.0 * PI * 9.0 * t).cos());
        let m = *fit_ringdown(&s, 5000.0).unwrap().dominant().unwrap();
        let zeta = 5.0 / (25.0 + (2.0 * PI * 9.0f64).powi(2)).sqrt();
        assert!((m.freq_hz - 9.0).abs() < 0.05, "{m:?}");
        assert!((m.zeta - zeta).abs() < 0.01, "{m:?}");
        assert!((zeta - 0.088).abs() < 0.001);
    }

    #[test]
    fn fit_real_mode_has_zero_frequency() {
        let s = sampled(1000.0, 1.0, |t| (-3.0 * t).exp());
        let m = *fit_ringdown(&s, 1000.0).unwrap().dominant().unwrap();
        assert_eq!(m.freq_hz, 0.0);
        assert!((m.pole.re + 3.0).abs() < 1e-3);
    }

    #[test]
    fn fit_ignores_offset() {
        let s = sampled(2000.0, 1.0, |t| 0.5 + 0.1 * (-4.0 * t).exp() * (2.0 * PI * 20.0 * t).sin());
        let m = *fit_ringdown(&s, 2000.0).unwrap().dominant().unwrap();
        assert!((m.freq_hz - 20.0).abs() < 0.05);
    }

    #[test]
    fn fit_rejects_silence() {
        assert_eq!(fit_ringdown(&vec![0.0; 1000], 1000.0), Err(Error::NoDominantMode));
    }

    #[test]
    fn band_examples() {
        let b = Bands::default();
        assert_eq!(b.band(50.0, 50.0, ChannelKind::Power), ResonanceClass::Sr);
        assert_eq!(b.band(9.0, 50.0, ChannelKind::Power), ResonanceClass::Ssr);
        assert_eq!(b.band(60.0, 50.0, ChannelKind::Current), ResonanceClass::Nsr);
        assert_eq!(b.band(60.0, 50.0, ChannelKind::Power), ResonanceClass::None);
        assert_eq!(b.band(0.5, 50.0, ChannelKind::Power), ResonanceClass::None);
    }

    fn classify_signal(s: &[f64], fs: f64) -> ResonanceReport {
        let sp = estimate_spectrum(s, fs).unwrap();
        let fit = fit_ringdown(s, fs).ok();
        let dev = detrend(s);
        let rms = (dev.iter().map(|x| x * x).sum::<f64>() / dev.len() as f64).sqrt();
        classify_resonance("P", ChannelKind::Power, &sp, fit.as_ref(), rms, 50.0, &Bands::default())
    }

    #[test]
    fn classify_examples() {
        let sr = sampled(2000.0, 1.0, |t| (-2.0 * t).exp() * (2.0 * PI * 49.0 * t).sin());
        let r = classify_signal(&sr, 2000.0);
        assert_eq!(r.class, ResonanceClass::Sr);
        let ssr = sampled(2000.0, 1.0, |t| (-3.0 * t).exp() * (2.0 * PI * 9.0 * t).sin());
        let r = classify_signal(&ssr, 2000.0);
        assert_eq!(r.class, ResonanceClass::Ssr);
        assert!((r.freq_hz - 9.0).abs() < 0.2);
        let flat = vec![1.0; 2000];
        assert_eq!(classify_signal(&flat, 2000.0).class, ResonanceClass::None);
        let damped = sampled(2000.0, 1.0, |t| (-40.0 * t).exp() * (2.0 * PI * 9.0 * t).sin());
        assert_eq!(classify_signal(&damped, 2000.0).class, ResonanceClass::None);
    }

    #[test]
    fn dq_tone_maps_to_sidebands() {
        let fs = 5000.0;
        let w = 2.0 * PI * 10.0;
        let d = sampled(fs, 1.0, |t| 0.5 + 0.05 * (w * t).cos());
        let q = sampled(fs, 1.0, |t| 0.02 * (w * t).sin());
        let c = coupling_check(&d, &q, fs, 0.0, 10.0, 50.0, 1.0).unwrap();
        assert!(c.pass, "{c:?}");
        assert!((c.measured[0].unwrap().freq_hz - 40.0).abs() < 0.1);
        assert!((c.measured[1].unwrap().freq_hz - 60.0).abs() < 0.1);
        assert!(coupling_check(&[], &[], fs, 0.0, 10.0, 50.0, 1.0).is_err());
    }

    #[test]
    fn report_formats() {
        let r = ResonanceReport {
            channel: "P".into(),
            class: ResonanceClass::Ssr,
            freq_hz: 9.5,
            zeta: 0.2,
            amplitude: 0.01,
        };
        assert!(r.to_text().contains("class: SSR\n"));
        assert!(r.csv_row().starts_with("P,SSR,9.500000,0.200000,"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn classification_is_scale_invariant(k in 0.01f64..100.0, f in 2.0f64..24.0) {
            let s = sampled(2000.0, 1.0, |t| (-3.0 * t).exp() * (2.0 * PI * f * t).sin());
            let scaled: Vec<f64> = s.iter().map(|x| x * k).collect();
            let a = classify_signal(&s, 2000.0);
            let b = classify_signal(&scaled, 2000.0);
            prop_assert_eq!(a.class, b.class);
            prop_assert!((a.freq_hz - b.freq_hz).abs() < 1e-6);
        }

        #[test]
        fn bands_are_exclusive(f in 0.01f64..200.0) {
            let b = Bands::default();
            for kind in [ChannelKind::Power, ChannelKind::Current] {
                let c = b.band(f, 50.0, kind);
                let hits = [
                    f >= 1.0 && f <= 25.0,
                    f >= 40.0 && f <= if kind == ChannelKind::Power { 55.0 } else { 50.0 },
                    kind == ChannelKind::Current && f > 50.0 && f < 100.0,
                ];
                prop_assert!(hits.iter().filter(|h| **h).count() <= 1);
                prop_assert_eq!(c == ResonanceClass::None, !hits.iter().any(|h| *h));
            }
        }
    }
}
