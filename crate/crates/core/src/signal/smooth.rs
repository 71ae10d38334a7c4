use alloc::vec;
use alloc::vec::Vec;

use super::SampledSignal;
use crate::{Error, Result};

/// Least-squares projection onto polynomials of degree `order` over `len`
/// equally spaced points. Row `p` gives the weights that evaluate the
/// fitted polynomial at point `p`.
///
/// The basis is orthonormalised (modified Gram-Schmidt, two passes) on
/// coordinates scaled to `[-1, 1]`, which keeps the weights accurate to
/// round-off even for order 5.
fn polynomial_projection(order: usize, len: usize) -> Vec<Vec<f64>> {
    let half = (len - 1) as f64 / 2.0;
    let scale = if half > 0.0 { half } else { 1.0 };
    let t: Vec<f64> = (0..len).map(|j| (j as f64 - half) / scale).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
    for d in 0..=order {
        let mut v: Vec<f64> = t.iter().map(|&x| libm::pow(x, d as f64)).collect();
        for _ in 0..2 {
            for q in &basis {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= dot * qi;
                }
            }
        }
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        basis.push(v);
    }
    (0..len)
        .map(|p| {
            (0..len)
                .map(|j| basis.iter().map(|q| q[p] * q[j]).sum())
                .collect()
        })
        .collect()
}

/// Savitzky-Golay smoothing with polynomial `order` over an odd
/// `frame_len`.
///
/// Interior samples use the centred least-squares fit; the first and last
/// `frame_len/2` samples are evaluated from the fit of the first and last
/// full frame, so polynomials of degree `<= order` pass through unchanged
/// everywhere.
pub fn savitzky_golay(signal: &SampledSignal, order: usize, frame_len: usize) -> Result<SampledSignal> {
    if frame_len.is_multiple_of(2) {
        return Err(Error::invalid("Savitzky-Golay frame length must be odd"));
    }
    if order >= frame_len {
        return Err(Error::invalid("Savitzky-Golay order must be below the frame length"));
    }
    let x = signal.samples();
    let n = x.len();
    if n < frame_len {
        return Err(Error::invalid("signal shorter than the Savitzky-Golay frame"));
    }
    let proj = polynomial_projection(order, frame_len);
    let half = frame_len / 2;
    let dot = |row: &[f64], window: &[f64]| -> f64 { row.iter().zip(window).map(|(a, b)| a * b).sum() };
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        *o = if i < half {
            dot(&proj[i], &x[..frame_len])
        } else if i + half >= n {
            dot(&proj[i + frame_len - n], &x[n - frame_len..])
        } else {
            dot(&proj[half], &x[i - half..=i + half])
        };
    }
    Ok(signal.with_samples(out))
}

/// Centred moving average over an odd `window`; near the edges the window
/// shrinks to the samples that exist.
pub fn moving_average(signal: &SampledSignal, window: usize) -> Result<SampledSignal> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::invalid("moving-average window must be odd and positive"));
    }
    let x = signal.samples();
    let n = x.len();
    let half = window / 2;
    let out = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n.saturating_sub(1));
            let span = &x[lo..=hi];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect();
    Ok(signal.with_samples(out))
}

/// Zero mean, unit population standard deviation.
pub fn mean_var_normalize(signal: &SampledSignal) -> Result<SampledSignal> {
    let x = signal.samples();
    if x.len() < 2 {
        return Err(Error::invalid("normalisation needs at least two samples"));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = mean.abs().max(x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    if !(var > 0.0) || libm::sqrt(var) <= 1e-14 * scale {
        return Err(Error::degenerate("zero variance"));
    }
    let sd = libm::sqrt(var);
    Ok(signal.with_samples(x.iter().map(|v| (v - mean) / sd).collect()))
}
