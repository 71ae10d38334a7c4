use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SampledSignal;
use crate::{Error, Result};

/// Filter family and its cutoff parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FilterKind {
    /// Butterworth low-pass.
    LowPass { cutoff_hz: f64 },
    /// Butterworth high-pass at `low_hz` cascaded with a low-pass at
    /// `high_hz`, each of the given order.
    BandPass { low_hz: f64, high_hz: f64 },
    /// Delayed all-pass minus a moving-average low-pass of `window`
    /// samples: `y[n] = x[n - window/2] - mean(x[n-window+1..=n])`.
    HighPassBySubtraction { window: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub order: usize,
}

impl FilterSpec {
    pub fn lowpass(order: usize, cutoff_hz: f64) -> Self {
        FilterSpec {
            kind: FilterKind::LowPass { cutoff_hz },
            order,
        }
    }

    pub fn bandpass(order: usize, low_hz: f64, high_hz: f64) -> Self {
        FilterSpec {
            kind: FilterKind::BandPass { low_hz, high_hz },
            order,
        }
    }

    pub fn high_pass_by_subtraction(window: usize) -> Self {
        FilterSpec {
            kind: FilterKind::HighPassBySubtraction { window },
            order: 1,
        }
    }

    fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if self.order == 0 {
            return Err(Error::invalid("filter order must be positive"));
        }
        let nyquist = sample_rate_hz / 2.0;
        let check = |f: f64| {
            if f > 0.0 && f < nyquist {
                Ok(())
            } else {
                Err(Error::invalid("cutoff must lie strictly between 0 and Nyquist"))
            }
        };
        match self.kind {
            FilterKind::LowPass { cutoff_hz } => check(cutoff_hz),
            FilterKind::BandPass { low_hz, high_hz } => {
                check(low_hz)?;
                check(high_hz)?;
                if low_hz >= high_hz {
                    return Err(Error::invalid("band-pass needs low < high"));
                }
                Ok(())
            }
            FilterKind::HighPassBySubtraction { window } => {
                if window < 2 {
                    Err(Error::invalid("subtraction window must be at least 2"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// One second-order section, `b0 + b1 z^-1 + b2 z^-2 / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

/// Cascade of second-order sections, run forward (causal) in
/// transposed direct form II.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// Butterworth low-pass via the bilinear transform with pre-warping, so
    /// the digital response is exactly -3 dB at the cutoff.
    pub fn butterworth_lowpass(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        Self::butterworth(order, cutoff_hz, sample_rate_hz, false)
    }

    pub fn butterworth_highpass(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        Self::butterworth(order, cutoff_hz, sample_rate_hz, true)
    }

    fn butterworth(order: usize, cutoff_hz: f64, sample_rate_hz: f64, highpass: bool) -> Self {
        let k = libm::tan(PI * cutoff_hz / sample_rate_hz);
        let k2 = k * k;
        let mut sections = Vec::with_capacity(order.div_ceil(2));
        for i in 0..order / 2 {
            // Pole pair at angle (2i+1)pi/(2N) from the imaginary axis.
            let q = 1.0 / (2.0 * libm::sin(PI * (2 * i + 1) as f64 / (2 * order) as f64));
            let norm = 1.0 / (1.0 + k / q + k2);
            let a = [2.0 * (k2 - 1.0) * norm, (1.0 - k / q + k2) * norm];
            let b = if highpass {
                [norm, -2.0 * norm, norm]
            } else {
                [k2 * norm, 2.0 * k2 * norm, k2 * norm]
            };
            sections.push(Biquad { b, a });
        }
        if order % 2 == 1 {
            let norm = 1.0 / (1.0 + k);
            let a = [(k - 1.0) * norm, 0.0];
            let b = if highpass {
                [norm, -norm, 0.0]
            } else {
                [k * norm, k * norm, 0.0]
            };
            sections.push(Biquad { b, a });
        }
        SosFilter { sections }
    }

    pub fn then(mut self, other: SosFilter) -> Self {
        self.sections.extend(other.sections);
        self
    }

    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = input.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for x in out.iter_mut() {
                let xin = *x;
                let y = s.b[0] * xin + z1;
                z1 = s.b[1] * xin - s.a[0] * y + z2;
                z2 = s.b[2] * xin - s.a[1] * y;
                *x = y;
            }
        }
        out
    }

    /// Magnitude response at `freq_hz`.
    pub fn gain_at(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        use num_complex::Complex64;
        let w = 2.0 * PI * freq_hz / sample_rate_hz;
        let z1 = Complex64::new(libm::cos(w), -libm::sin(w));
        let z2 = z1 * z1;
        self.sections.iter().fold(1.0, |g, s| {
            let num = s.b[0] + z1 * s.b[1] + z2 * s.b[2];
            let den = 1.0 + z1 * s.a[0] + z2 * s.a[1];
            g * (num / den).norm()
        })
    }
}

/// Causal Butterworth low-pass. Rejects any spec that is not `LowPass`.
pub fn butterworth_lowpass(signal: &SampledSignal, spec: &FilterSpec) -> Result<SampledSignal> {
    let FilterKind::LowPass { cutoff_hz } = spec.kind else {
        return Err(Error::invalid("butterworth_lowpass needs a low-pass spec"));
    };
    spec.validate(signal.sample_rate_hz())?;
    let sos = SosFilter::butterworth_lowpass(spec.order, cutoff_hz, signal.sample_rate_hz());
    Ok(signal.with_samples(sos.apply(signal.samples())))
}

/// Applies any [`FilterSpec`].
pub fn apply_filter(signal: &SampledSignal, spec: &FilterSpec) -> Result<SampledSignal> {
    spec.validate(signal.sample_rate_hz())?;
    let fs = signal.sample_rate_hz();
    let out = match spec.kind {
        FilterKind::LowPass { .. } => return butterworth_lowpass(signal, spec),
        FilterKind::BandPass { low_hz, high_hz } => SosFilter::butterworth_highpass(spec.order, low_hz, fs)
            .then(SosFilter::butterworth_lowpass(spec.order, high_hz, fs))
            .apply(signal.samples()),
        FilterKind::HighPassBySubtraction { window } => {
            high_pass_by_subtraction(signal.samples(), window)
        }
    };
    Ok(signal.with_samples(out))
}

fn high_pass_by_subtraction(x: &[f64], window: usize) -> Vec<f64> {
    let delay = window / 2;
    let mut running = 0.0;
    let mut out = Vec::with_capacity(x.len());
    for n in 0..x.len() {
        running += x[n];
        if n >= window {
            running -= x[n - window];
        }
        let delayed = if n >= delay { x[n - delay] } else { 0.0 };
        out.push(delayed - running / window as f64);
    }
    out
}
