//! Shared DSP primitives used by the speech, PCG and ECG pipelines.
//!
//! All functions are pure: they borrow their input and return a new buffer.

mod envelope;
mod filter;
mod frame;
mod resample;
mod smooth;
mod spectrum;

pub use envelope::{hilbert_envelope, teager_energy};
pub use filter::{apply_filter, butterworth_lowpass, Biquad, FilterKind, FilterSpec, SosFilter};
pub use frame::{frame_signal, FrameGrid};
pub use resample::{downsample, resample_rational};
pub use smooth::{mean_var_normalize, moving_average, savitzky_golay};
pub use spectrum::{autocorr_normalized, power_spectrum, Spectrum, SpectrumAnalyzer, Window};

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A uniformly sampled real-valued signal.
///
/// Audio is expected in `[-1, 1]`; ECG may carry ADC units. The sample
/// rate is always positive and every sample is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("samples must be finite"));
        }
        Ok(SampledSignal {
            samples,
            sample_rate_hz,
        })
    }

    /// Internal constructor for outputs whose finiteness follows from the
    /// operation itself.
    pub(crate) fn from_parts(samples: Vec<f64>, sample_rate_hz: f64) -> Self {
        debug_assert!(sample_rate_hz > 0.0);
        debug_assert!(samples.iter().all(|x| x.is_finite()));
        SampledSignal {
            samples,
            sample_rate_hz,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Same signal multiplied by a constant gain.
    pub fn scaled(&self, gain: f64) -> Self {
        SampledSignal::from_parts(
            self.samples.iter().map(|x| x * gain).collect(),
            self.sample_rate_hz,
        )
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        SampledSignal::from_parts(samples, self.sample_rate_hz)
    }
}

pub(crate) fn energy(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum()
}

pub fn rms(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        libm::sqrt(energy(xs) / xs.len() as f64)
    }
}

/// Median of a slice; `None` when empty.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
