//! Pitch-derived voice measures and harmonics-to-noise ratio.

use alloc::vec::Vec;

use super::PitchTrack;
use crate::signal::{autocorr_normalized, rms, Window};
use crate::{Error, Result};

/// HNR ceiling in dB.
pub const HNR_CAP_DB: f64 = 40.0;
pub const FRANGE_MIN_VOICED: usize = 20;

/// Mean absolute difference of consecutive periods in ms,
/// `J1 = (1/M) * sum_{j=1}^{M-1} |T_j - T_{j+1}|` with `T_j = 1000 / F_j`
/// over the `M` voiced frames. Note the divisor is `M`, not `M - 1`.
pub fn jitter(track: &PitchTrack) -> Result<f64> {
    let periods: Vec<f64> = track.voiced().map(|f| 1000.0 / f).collect();
    jitter_from_periods(&periods)
}

pub fn jitter_from_periods(periods_ms: &[f64]) -> Result<f64> {
    let m = periods_ms.len();
    if m < 2 {
        return Err(Error::insufficient("jitter needs at least two voiced frames"));
    }
    let sum: f64 = periods_ms.windows(2).map(|w| (w[0] - w[1]).abs()).sum();
    Ok(sum / m as f64)
}

/// `(max - min) / (max + min)` over voiced F0 values.
pub fn frequency_modulation(track: &PitchTrack) -> Result<f64> {
    let f0: Vec<f64> = track.voiced().collect();
    fmod_from_f0(&f0)
}

pub fn fmod_from_f0(f0_hz: &[f64]) -> Result<f64> {
    if f0_hz.is_empty() {
        return Err(Error::insufficient("frequency modulation needs a voiced frame"));
    }
    let (lo, hi) = f0_hz
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &f| (lo.min(f), hi.max(f)));
    if !(hi > 0.0) {
        return Err(Error::invalid("F0 values must be positive"));
    }
    Ok((hi - lo) / (hi + lo))
}

/// Percentile with linear interpolation between order statistics at rank
/// `p / 100 * (n - 1)`.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=100.0).contains(&p) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = libm::floor(rank) as usize;
    let hi = (lo + 1).min(v.len() - 1);
    let frac = rank - lo as f64;
    Some(v[lo] + frac * (v[hi] - v[lo]))
}

/// 95th minus 5th percentile of voiced F0 in Hz.
pub fn frequency_range(track: &PitchTrack) -> Result<f64> {
    let f0: Vec<f64> = track.voiced().collect();
    frange_from_f0(&f0)
}

pub fn frange_from_f0(f0_hz: &[f64]) -> Result<f64> {
    if f0_hz.len() < FRANGE_MIN_VOICED {
        return Err(Error::insufficient("frequency range needs at least 20 voiced frames"));
    }
    // Both percentiles exist for a non-empty slice.
    Ok(percentile(f0_hz, 95.0).unwrap_or(0.0) - percentile(f0_hz, 5.0).unwrap_or(0.0))
}

/// `10 log10(r / (1 - r))`, capped at [`HNR_CAP_DB`]. `None` when the peak
/// is not positive.
pub fn hnr_from_peak(r: f64) -> Option<f64> {
    if !(r > 0.0) {
        return None;
    }
    if r >= 1.0 {
        return Some(HNR_CAP_DB);
    }
    Some((10.0 * libm::log10(r / (1.0 - r))).min(HNR_CAP_DB))
}

/// Harmonics-to-noise ratio of one frame.
///
/// The frame is Hann-windowed and its normalised autocorrelation divided
/// by that of the window, which undoes the taper's decay with lag. The
/// peak is searched over lags for 60-400 Hz (at most half the frame) and
/// refined by parabolic interpolation.
pub fn hnr(frame: &[f64], sample_rate_hz: f64) -> Option<f64> {
    let n = frame.len();
    if n < 8 || rms(frame) == 0.0 {
        return None;
    }
    let lag_min = libm::floor(sample_rate_hz / 400.0).max(1.0) as usize;
    let lag_max = (libm::ceil(sample_rate_hz / 60.0) as usize).min(n / 2);
    if lag_max <= lag_min + 1 {
        return None;
    }
    let w = Window::Hann.coefficients(n);
    let mean = frame.iter().sum::<f64>() / n as f64;
    let windowed: Vec<f64> = frame.iter().zip(&w).map(|(x, w)| (x - mean) * w).collect();
    let rx = autocorr_normalized(&windowed, lag_max + 1).ok()?;
    let rw = autocorr_normalized(&w, lag_max + 1).ok()?;
    let r: Vec<f64> = rx.iter().zip(&rw).map(|(a, b)| if *b > 1e-9 { a / b } else { 0.0 }).collect();
    // Start after the zero-lag lobe has decayed below its first minimum.
    let mut start = lag_min;
    while start + 1 < lag_max && r[start + 1] < r[start] {
        start += 1;
    }
    let best = (start..=lag_max).max_by(|&a, &b| r[a].total_cmp(&r[b]))?;
    let peak = if best > 0 && best + 1 < r.len() {
        let (a, b, c) = (r[best - 1], r[best], r[best + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            b - 0.125 * (a - c) * (a - c) / denom
        } else {
            b
        }
    } else {
        r[best]
    };
    hnr_from_peak(peak)
}
