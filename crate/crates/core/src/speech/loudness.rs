//! Zwicker-style loudness on a 0.1 Bark grid and sharpness.
//!
//! Calibration: a full-scale sine (amplitude 1) is 94 dB SPL.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::signal::{FrameGrid, SampledSignal, SpectrumAnalyzer, Window};
use crate::{Error, Result};

pub const N_BANDS: usize = 240;
pub const DZ: f64 = 0.1;
pub const FULL_SCALE_DB_SPL: f64 = 94.0;
/// Lower excitation slope in dB per Bark.
const LOWER_SLOPE_DB: f64 = 27.0;
const FRAME_S: f64 = 0.04;

/// Critical-band rate in Bark (Zwicker and Terhardt).
pub fn hz_to_bark(f: f64) -> f64 {
    13.0 * libm::atan(0.00076 * f) + 3.5 * libm::atan((f / 7500.0) * (f / 7500.0))
}

/// Inverse of [`hz_to_bark`] by bisection over 0-30 kHz.
pub fn bark_to_hz(z: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 30_000.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if hz_to_bark(mid) < z {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Absolute threshold of hearing in dB SPL (Terhardt).
pub fn threshold_in_quiet_db(f: f64) -> f64 {
    let k = (f / 1000.0).max(0.02);
    3.64 * libm::pow(k, -0.8) - 6.5 * libm::exp(-0.6 * (k - 3.3) * (k - 3.3)) + 1e-3 * k * k * k * k
}

/// Critical-band rate of band `i`: `z_i = (i + 1) * dz`.
pub fn band_rate(i: usize) -> f64 {
    (i + 1) as f64 * DZ
}

/// Specific loudness in sone per Bark over 240 bands of 0.1 Bark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarkSpectrum {
    specific: Vec<f64>,
}

impl BarkSpectrum {
    pub fn new(specific: Vec<f64>) -> Result<Self> {
        if specific.len() != N_BANDS {
            return Err(Error::invalid("Bark spectrum needs exactly 240 bands"));
        }
        if specific.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("specific loudness must be finite and non-negative"));
        }
        Ok(BarkSpectrum { specific })
    }

    pub fn zero() -> Self {
        BarkSpectrum {
            specific: vec![0.0; N_BANDS],
        }
    }

    pub fn specific(&self) -> &[f64] {
        &self.specific
    }

    /// Total loudness `sum N'(z) dz` in sone.
    pub fn total_sone(&self) -> f64 {
        self.specific.iter().sum::<f64>() * DZ
    }
}

/// Loudness level in phon from sone (`40 + 33.22 log10 N` above 1 sone,
/// `40 (N + 0.0005)^0.35` below). Zero sone maps to 0 phon.
pub fn sone_to_phon(n: f64) -> f64 {
    if n <= 0.0 {
        0.0
    } else if n >= 1.0 {
        40.0 + 33.22 * libm::log10(n)
    } else {
        40.0 * libm::pow(n + 0.0005, 0.35)
    }
}

/// Per-band constants shared by every frame.
#[derive(Debug, Clone)]
pub struct LoudnessModel {
    analyzer: SpectrumAnalyzer,
    frame_len: usize,
    /// Band index of each FFT bin, `None` above 24 Bark or at DC.
    bin_band: Vec<Option<usize>>,
    /// Threshold excitation per band, linear re 0 dB.
    e_tq: Vec<f64>,
    band_hz: Vec<f64>,
    window_energy: f64,
}

impl LoudnessModel {
    pub fn new(sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz >= 8000.0) {
            return Err(Error::invalid("loudness needs at least 8 kHz audio"));
        }
        let frame_len = (FRAME_S * sample_rate_hz).max(2.0) as usize;
        let n_fft = frame_len.next_power_of_two();
        let analyzer = SpectrumAnalyzer::new(frame_len, n_fft, Window::Hann, sample_rate_hz)?;
        let bin_band = (0..analyzer.n_bins())
            .map(|k| {
                let z = hz_to_bark(k as f64 * analyzer.bin_width_hz());
                (k > 0 && z < N_BANDS as f64 * DZ).then(|| ((z / DZ) as usize).min(N_BANDS - 1))
            })
            .collect();
        let band_hz: Vec<f64> = (0..N_BANDS).map(|i| bark_to_hz(band_rate(i) - 0.5 * DZ)).collect();
        let e_tq = band_hz.iter().map(|&f| libm::pow(10.0, threshold_in_quiet_db(f) / 10.0)).collect();
        let window_energy = Window::Hann.coefficients(frame_len).iter().map(|w| w * w).sum();
        Ok(LoudnessModel {
            analyzer,
            frame_len,
            bin_band,
            e_tq,
            band_hz,
            window_energy,
        })
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.frame_len / 2
    }

    /// Band intensities in units of the 0 dB SPL reference.
    fn band_intensity(&self, frame: &[f64]) -> Vec<f64> {
        let spec = self.analyzer.analyze(frame);
        let mut bands = vec![0.0; N_BANDS];
        // Mean-square of the frame, then 0.5 mean-square is 94 dB SPL.
        let to_ref = 2.0 * libm::pow(10.0, FULL_SCALE_DB_SPL / 10.0) / self.window_energy;
        for (p, band) in spec.power.iter().zip(&self.bin_band) {
            if let Some(b) = band {
                bands[*b] += p * to_ref;
            }
        }
        bands
    }

    /// Specific loudness of one frame.
    ///
    /// Each band spreads its intensity flat over +-0.5 Bark, then falls at
    /// 27 dB/Bark downward and `24 + 230/f - 0.2 L` dB/Bark upward.
    /// Specific loudness follows
    /// `N' = 0.08 (E_TQ)^0.23 [(0.5 + 0.5 E / E_TQ)^0.23 - 1]`.
    pub fn frame_specific(&self, frame: &[f64]) -> Vec<f64> {
        let intensity = self.band_intensity(frame);
        let mut excitation = vec![0.0; N_BANDS];
        for (j, &ij) in intensity.iter().enumerate() {
            if ij <= 0.0 {
                continue;
            }
            let level = 10.0 * libm::log10(ij);
            // Sources 30 dB below threshold cannot lift any band above it.
            if level < threshold_in_quiet_db(self.band_hz[j]) - 30.0 {
                continue;
            }
            let upper = (24.0 + 230.0 / self.band_hz[j] - 0.2 * level).max(4.0);
            for (i, e) in excitation.iter_mut().enumerate() {
                let dz = (i as f64 - j as f64) * DZ;
                let atten = if dz < -0.5 {
                    LOWER_SLOPE_DB * (-dz - 0.5)
                } else if dz > 0.5 {
                    upper * (dz - 0.5)
                } else {
                    0.0
                };
                if atten < 80.0 {
                    *e += ij * libm::pow(10.0, -atten / 10.0);
                }
            }
        }
        excitation
            .iter()
            .zip(&self.e_tq)
            .map(|(&e, &tq)| {
                if e <= 0.0 {
                    return 0.0;
                }
                let n = 0.08 * libm::pow(tq, 0.23) * (libm::pow(0.5 + 0.5 * e / tq, 0.23) - 1.0);
                n.max(0.0)
            })
            .collect()
    }
}

/// Time-averaged specific loudness over non-silent 40 ms frames (hop
/// 20 ms) and the corresponding loudness level in phon.
pub fn loudness_zwicker(signal: &SampledSignal) -> Result<(f64, BarkSpectrum)> {
    let model = LoudnessModel::new(signal.sample_rate_hz())?;
    let x = signal.samples();
    let grid = FrameGrid::new(x.len(), model.frame_len(), model.hop())?;
    let mut acc = vec![0.0; N_BANDS];
    let mut live = 0usize;
    for frame in grid.frames(x) {
        if frame.iter().all(|&v| v == 0.0) {
            continue;
        }
        for (a, n) in acc.iter_mut().zip(model.frame_specific(frame)) {
            *a += n;
        }
        live += 1;
    }
    if live == 0 {
        return Ok((0.0, BarkSpectrum::zero()));
    }
    acc.iter_mut().for_each(|a| *a /= live as f64);
    let bark = BarkSpectrum { specific: acc };
    Ok((sone_to_phon(bark.total_sone()), bark))
}

/// Sharpness weighting: 1 up to 16 Bark, `0.066 e^(0.171 z)` above.
pub fn sharpness_weight(z: f64) -> f64 {
    if z <= 16.0 {
        1.0
    } else {
        0.066 * libm::exp(0.171 * z)
    }
}

/// `S = 0.11 * sum N' g(z) z dz / sum N' dz` in acum.
pub fn sharpness(bark: &BarkSpectrum) -> Result<f64> {
    let total: f64 = bark.specific.iter().sum::<f64>() * DZ;
    if !(total > 0.0) {
        return Err(Error::degenerate("sharpness of zero loudness is undefined"));
    }
    let weighted: f64 = bark
        .specific
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let z = band_rate(i);
            n * sharpness_weight(z) * z * DZ
        })
        .sum();
    Ok(0.11 * weighted / total)
}
