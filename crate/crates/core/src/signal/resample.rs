use alloc::vec::Vec;
use core::f64::consts::PI;

use super::SampledSignal;
use crate::{Error, Result};

/// Keeps every `factor`-th sample, `floor(N / factor)` samples in total.
///
/// The caller is responsible for low-passing below the new Nyquist first.
pub fn downsample(signal: &SampledSignal, factor: usize) -> Result<SampledSignal> {
    if factor == 0 {
        return Err(Error::invalid("downsample factor must be positive"));
    }
    let x = signal.samples();
    let out: Vec<f64> = (0..x.len() / factor).map(|i| x[i * factor]).collect();
    Ok(SampledSignal::from_parts(out, signal.sample_rate_hz() / factor as f64))
}

/// Zero crossings of the interpolation kernel on each side.
const KERNEL_ZEROS: f64 = 16.0;

/// Band-limited rational resampling by `up / down` with a
/// Blackman-windowed sinc kernel. The anti-alias cutoff sits at 95% of the
/// lower of the two Nyquist frequencies.
pub fn resample_rational(signal: &SampledSignal, up: usize, down: usize) -> Result<SampledSignal> {
    if up == 0 || down == 0 {
        return Err(Error::invalid("resampling factors must be positive"));
    }
    let x = signal.samples();
    let fs_out = signal.sample_rate_hz() * up as f64 / down as f64;
    if up == down {
        return Ok(SampledSignal::from_parts(x.to_vec(), fs_out));
    }
    // Cutoff expressed as a fraction of the input sample rate's Nyquist.
    let cutoff = 0.95 * (up as f64 / down as f64).min(1.0);
    let half_width = KERNEL_ZEROS / cutoff;
    let n_out = x.len() * up / down;
    let out = (0..n_out)
        .map(|m| {
            let t = (m * down) as f64 / up as f64;
            let lo = libm::ceil(t - half_width).max(0.0) as usize;
            let hi = (libm::floor(t + half_width) as usize).min(x.len().saturating_sub(1));
            (lo..=hi)
                .map(|n| {
                    let tau = t - n as f64;
                    x[n] * cutoff * sinc(cutoff * tau) * blackman(tau / half_width)
                })
                .sum()
        })
        .collect();
    Ok(SampledSignal::from_parts(out, fs_out))
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        libm::sin(PI * x) / (PI * x)
    }
}

/// Blackman window on `u` in `[-1, 1]`.
fn blackman(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let p = PI * (u + 1.0);
    0.42 - 0.5 * libm::cos(p) + 0.08 * libm::cos(2.0 * p)
}
