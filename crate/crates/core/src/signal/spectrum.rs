use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::fft::FftPlan;
use crate::{Error, Result};

/// Analysis window applied before the DFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    Rectangular,
    /// Periodic Hann, `0.5 - 0.5 cos(2 pi n / N)`.
    Hann,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * libm::cos(2.0 * PI * n as f64 / len as f64))
                .collect(),
        }
    }
}

/// One-sided power spectrum.
///
/// Bin `k` holds power at `k * bin_width_hz`. Scaling: `power[0] =
/// |X0|^2 / N`, interior bins carry `2 |Xk|^2 / N` (positive plus
/// conjugate frequency) and the Nyquist bin of an even-length transform
/// `|X_{N/2}|^2 / N`, so the bins sum to the energy of the windowed frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub power: Vec<f64>,
    pub bin_width_hz: f64,
}

impl Spectrum {
    pub fn new(power: Vec<f64>, bin_width_hz: f64) -> Result<Self> {
        if power.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("spectrum power must be finite and non-negative"));
        }
        if !(bin_width_hz > 0.0) {
            return Err(Error::invalid("bin width must be positive"));
        }
        Ok(Spectrum { power, bin_width_hz })
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width_hz
    }

    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }
}

/// Reusable windowed power-spectrum analyser for a fixed frame length and
/// transform size.
#[derive(Debug, Clone)]
pub struct SpectrumAnalyzer {
    plan: FftPlan,
    window: Vec<f64>,
    bin_width_hz: f64,
}

impl SpectrumAnalyzer {
    pub fn new(frame_len: usize, n_fft: usize, window: Window, sample_rate_hz: f64) -> Result<Self> {
        if frame_len == 0 {
            return Err(Error::invalid("empty frame"));
        }
        if frame_len > n_fft {
            return Err(Error::invalid("frame longer than the transform"));
        }
        Ok(SpectrumAnalyzer {
            plan: FftPlan::new(n_fft),
            window: window.coefficients(frame_len),
            bin_width_hz: sample_rate_hz / n_fft as f64,
        })
    }

    pub fn n_fft(&self) -> usize {
        self.plan.len()
    }

    pub fn n_bins(&self) -> usize {
        self.plan.len() / 2 + 1
    }

    pub fn bin_width_hz(&self) -> f64 {
        self.bin_width_hz
    }

    pub fn analyze(&self, frame: &[f64]) -> Spectrum {
        assert_eq!(frame.len(), self.window.len(), "frame length mismatch");
        let windowed: Vec<f64> = frame.iter().zip(&self.window).map(|(x, w)| x * w).collect();
        let bins = self.plan.forward_real(&windowed);
        let n = self.plan.len();
        let scale = 1.0 / n as f64;
        let power = (0..self.n_bins())
            .map(|k| {
                let p = bins[k].norm_sqr() * scale;
                if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
                    p
                } else {
                    2.0 * p
                }
            })
            .collect();
        Spectrum {
            power,
            bin_width_hz: self.bin_width_hz,
        }
    }
}

/// Windowed, zero-padded one-sided power spectrum of one frame.
pub fn power_spectrum(frame: &[f64], n_fft: usize, window: Window, sample_rate_hz: f64) -> Result<Spectrum> {
    Ok(SpectrumAnalyzer::new(frame.len(), n_fft, window, sample_rate_hz)?.analyze(frame))
}

/// Autocorrelation `R(l) = sum x[n] x[n+l] / sum x[n]^2` for
/// `l = 0..=max_lag` (clamped to `len - 1`), computed through the FFT.
///
/// `R(0) = 1` and `|R(l)| <= 1` by Cauchy-Schwarz.
pub fn autocorr_normalized(frame: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if frame.is_empty() {
        return Err(Error::invalid("empty frame"));
    }
    let energy: f64 = frame.iter().map(|x| x * x).sum();
    if !(energy > 0.0) {
        return Err(Error::degenerate("zero-energy frame"));
    }
    let max_lag = max_lag.min(frame.len() - 1);
    let raw = raw_autocorr(frame, max_lag);
    let mut r: Vec<f64> = raw.iter().map(|v| v / raw[0]).collect();
    r[0] = 1.0;
    for v in r.iter_mut().skip(1) {
        *v = v.clamp(-1.0, 1.0);
    }
    Ok(r)
}

/// Unnormalised autocorrelation for lags `0..=max_lag`.
pub(crate) fn raw_autocorr(frame: &[f64], max_lag: usize) -> Vec<f64> {
    let n_fft = (2 * frame.len()).next_power_of_two();
    let plan = FftPlan::new(n_fft);
    let mut spec = plan.forward_real(frame);
    for v in spec.iter_mut() {
        *v = num_complex::Complex64::new(v.norm_sqr(), 0.0);
    }
    plan.inverse(&mut spec);
    spec[..=max_lag].iter().map(|c| c.re).collect()
}
