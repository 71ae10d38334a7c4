//! Heart rate from phonocardiograms: low-pass, downsample, Hilbert
//! envelope, Teager energy, Savitzky-Golay and moving-average smoothing,
//! normalisation, S1 picking and windowed BPM.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::signal::{
    butterworth_lowpass, downsample, hilbert_envelope, mean_var_normalize, median, moving_average, savitzky_golay,
    teager_energy, FilterSpec, SampledSignal,
};
use crate::{Error, Result};

pub const LOWPASS_ORDER: usize = 6;
pub const LOWPASS_CUTOFF_HZ: f64 = 100.0;
/// Rate after downsampling for the nominal 800 Hz input.
pub const TARGET_RATE_HZ: f64 = 400.0;
pub const MIN_RATE_HZ: f64 = 250.0;
pub const MIN_DURATION_S: f64 = 3.0;
pub const SG_ORDER: usize = 5;
pub const SG_FRAME: usize = 11;
pub const MA_WINDOW: usize = 11;
/// Peak threshold in standard units of the normalised envelope.
pub const S1_THRESHOLD: f64 = 1.0;
pub const S1_MIN_DISTANCE_S: f64 = 0.25;
/// Peaks below this fraction of the 90th-percentile peak height are S2.
pub const S2_REJECT_FRACTION: f64 = 0.6;
pub const WINDOW_S: f64 = 2.0;
pub const OVERLAP: f64 = 0.7;
pub const NORMAL_BPM: (f64, f64) = (70.0, 200.0);
/// One 16-bit quantisation step; anything quieter is treated as silence.
const SILENCE_PEAK: f64 = 1.0 / 32768.0;

/// Sixth-order 100 Hz Butterworth low-pass, then decimation to roughly
/// 400 Hz (factor 2 at 800 Hz; never below 1).
pub fn pcg_preprocess(raw: &SampledSignal) -> Result<SampledSignal> {
    let fs = raw.sample_rate_hz();
    if fs < MIN_RATE_HZ {
        return Err(Error::invalid("PCG sample rate must be at least 250 Hz"));
    }
    let filtered = butterworth_lowpass(raw, &FilterSpec::lowpass(LOWPASS_ORDER, LOWPASS_CUTOFF_HZ))?;
    let factor = (libm::round(fs / TARGET_RATE_HZ) as usize).max(1);
    downsample(&filtered, factor)
}

/// Normalised (zero-mean, unit-variance) PCG envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct PcgEnvelope {
    signal: SampledSignal,
}

impl PcgEnvelope {
    pub fn samples(&self) -> &[f64] {
        self.signal.samples()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.signal.sample_rate_hz()
    }

    pub fn signal(&self) -> &SampledSignal {
        &self.signal
    }

    pub fn duration_s(&self) -> f64 {
        self.signal.duration_s()
    }
}

/// Hilbert envelope, Teager energy, Savitzky-Golay (5, 11), moving
/// average (11), mean/variance normalisation, in that order.
///
/// The Teager output loses one sample at each end; it is padded by
/// repeating the edge values so envelope indices stay aligned with the
/// input. Inputs quieter than one 16-bit step are rejected as degenerate.
pub fn pcg_envelope(pre: &SampledSignal) -> Result<PcgEnvelope> {
    if pre.duration_s() < MIN_DURATION_S {
        return Err(Error::insufficient("PCG envelope needs at least 3 s"));
    }
    let peak = pre.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak < SILENCE_PEAK {
        return Err(Error::degenerate("PCG signal is silent"));
    }
    let env = hilbert_envelope(pre)?;
    let teo = teager_energy(&env)?;
    let t = teo.samples();
    let mut padded = Vec::with_capacity(t.len() + 2);
    padded.push(t[0]);
    padded.extend_from_slice(t);
    padded.push(t[t.len() - 1]);
    let smoothed = savitzky_golay(&pre.with_samples(padded), SG_ORDER, SG_FRAME)?;
    let averaged = moving_average(&smoothed, MA_WINDOW)?;
    Ok(PcgEnvelope {
        signal: mean_var_normalize(&averaged)?,
    })
}

/// S1 times in seconds.
///
/// Local maxima above [`S1_THRESHOLD`] are accepted greedily by height
/// with at least [`S1_MIN_DISTANCE_S`] between accepted peaks; survivors
/// weaker than [`S2_REJECT_FRACTION`] of the 90th-percentile height are
/// discarded as S2.
pub fn detect_s1(env: &PcgEnvelope) -> Vec<f64> {
    let x = env.samples();
    let fs = env.sample_rate_hz();
    let mut candidates: Vec<usize> = (1..x.len().saturating_sub(1))
        .filter(|&i| x[i] > S1_THRESHOLD && x[i] > x[i - 1] && x[i] >= x[i + 1])
        .collect();
    candidates.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let min_dist = libm::ceil(S1_MIN_DISTANCE_S * fs) as usize;
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept.iter().all(|&k| k.abs_diff(c) >= min_dist) {
            kept.push(c);
        }
    }
    if kept.is_empty() {
        return Vec::new();
    }
    let mut heights: Vec<f64> = kept.iter().map(|&k| x[k]).collect();
    heights.sort_by(|a, b| a.total_cmp(b));
    let p90 = heights[((heights.len() - 1) as f64 * 0.9) as usize];
    kept.retain(|&k| x[k] >= S2_REJECT_FRACTION * p90);
    kept.sort_unstable();
    kept.into_iter().map(|k| k as f64 / fs).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeartRateWindow {
    pub t_start_s: f64,
    pub bpm: Option<f64>,
    pub abnormal: bool,
}

/// Per-window BPM; serialises as a bare JSON array of windows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HeartRateSeries {
    pub windows: Vec<HeartRateWindow>,
}

impl HeartRateSeries {
    /// Median over windows that have an estimate.
    pub fn median_bpm(&self) -> Option<f64> {
        let v: Vec<f64> = self.windows.iter().filter_map(|w| w.bpm).collect();
        median(&v)
    }

    pub fn any_abnormal(&self) -> bool {
        self.windows.iter().any(|w| w.abnormal)
    }
}

pub fn hop_s() -> f64 {
    // 2 s * (1 - 0.7), rounded so the window starts land on exact tenths.
    libm::round(WINDOW_S * (1.0 - OVERLAP) * 1e9) / 1e9
}

pub fn is_abnormal_bpm(bpm: f64) -> bool {
    !(NORMAL_BPM.0..=NORMAL_BPM.1).contains(&bpm)
}

/// BPM = 60 / median S1-to-S1 interval inside each 2 s window (hop 0.6 s).
/// A recording shorter than one window gets a single window spanning it.
pub fn heart_rate(events_s: &[f64], duration_s: f64) -> Result<HeartRateSeries> {
    if !(duration_s > 0.0) {
        return Err(Error::invalid("duration must be positive"));
    }
    let hop = hop_s();
    let mut starts = Vec::new();
    let mut k = 0usize;
    loop {
        let t = libm::round(k as f64 * hop * 1e9) / 1e9;
        if t + WINDOW_S > duration_s + 1e-9 {
            break;
        }
        starts.push(t);
        k += 1;
    }
    if starts.is_empty() {
        starts.push(0.0);
    }
    let windows = starts
        .into_iter()
        .map(|t0| {
            let inside: Vec<f64> = events_s.iter().copied().filter(|&e| e >= t0 && e < t0 + WINDOW_S).collect();
            let intervals: Vec<f64> = inside.windows(2).map(|w| w[1] - w[0]).collect();
            let bpm = median(&intervals).filter(|&i| i > 0.0).map(|i| 60.0 / i);
            HeartRateWindow {
                t_start_s: t0,
                bpm,
                abnormal: bpm.is_some_and(is_abnormal_bpm),
            }
        })
        .collect();
    Ok(HeartRateSeries { windows })
}

/// Raw PCG to heart-rate series.
pub fn estimate_heart_rate(raw: &SampledSignal) -> Result<HeartRateSeries> {
    let pre = pcg_preprocess(raw)?;
    let env = pcg_envelope(&pre)?;
    heart_rate(&detect_s1(&env), raw.duration_s())
}
