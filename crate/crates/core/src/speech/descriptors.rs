//! Spectral centroid, flux, entropy and flatness.

use alloc::vec::Vec;

use crate::signal::Spectrum;
use crate::{Error, Result};

/// Magnitude-weighted mean frequency in Hz, `sum f_k |F_k| / sum |F_k|`
/// with `|F_k| = sqrt(power_k)`. `None` for a zero spectrum.
pub fn spectral_centroid(spec: &Spectrum) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, p) in spec.power.iter().enumerate() {
        let m = libm::sqrt(*p);
        num += spec.frequency(k) * m;
        den += m;
    }
    (den > 0.0).then(|| num / den)
}

/// Shannon entropy of the power distribution, divided by `ln M` so that
/// a flat spectrum scores 1 and a single bin scores 0.
pub fn spectral_entropy(spec: &Spectrum) -> Option<f64> {
    let total = spec.total();
    let m = spec.len();
    if !(total > 0.0) || m < 2 {
        return None;
    }
    let h: f64 = spec
        .power
        .iter()
        .map(|&p| p / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * libm::log(p))
        .sum();
    Some((h / libm::log(m as f64)).clamp(0.0, 1.0))
}

/// Geometric over arithmetic mean of the power bins. Any empty bin makes
/// the geometric mean, and so the flatness, zero.
pub fn spectral_flatness(spec: &Spectrum) -> Option<f64> {
    flatness_of(&spec.power)
}

fn flatness_of(power: &[f64]) -> Option<f64> {
    let m = power.len();
    if m == 0 {
        return None;
    }
    let mean = power.iter().sum::<f64>() / m as f64;
    if !(mean > 0.0) {
        return None;
    }
    if power.iter().any(|&p| p <= 0.0) {
        return Some(0.0);
    }
    let log_mean = power.iter().map(|p| libm::log(*p)).sum::<f64>() / m as f64;
    Some((libm::exp(log_mean) / mean).clamp(0.0, 1.0))
}

/// L2 distance between the two power spectra after scaling each to unit
/// L2 norm.
pub fn spectral_flux(prev: &Spectrum, next: &Spectrum) -> Result<Option<f64>> {
    if prev.len() != next.len() {
        return Err(Error::invalid("spectra differ in length"));
    }
    let na = libm::sqrt(prev.power.iter().map(|p| p * p).sum::<f64>());
    let nb = libm::sqrt(next.power.iter().map(|p| p * p).sum::<f64>());
    if !(na > 0.0 && nb > 0.0) {
        return Ok(None);
    }
    let d: f64 = prev
        .power
        .iter()
        .zip(&next.power)
        .map(|(a, b)| (a / na - b / nb) * (a / na - b / nb))
        .sum();
    Ok(Some(libm::sqrt(d)))
}

/// Recording-level descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpectralSummary {
    pub centroid_hz: Option<f64>,
    pub flux: Option<f64>,
    pub entropy: Option<f64>,
    pub flatness: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Means of per-frame centroid, entropy and flux over non-silent frames.
/// Flux pairs are consecutive non-silent frames.
///
/// Flatness is taken from the frame-averaged spectrum rather than averaged
/// per frame: a single periodogram of white noise has flatness near
/// `exp(-0.577) = 0.56` because of its exponential bin statistics, while
/// the averaged estimate converges to 1.
pub fn spectral_descriptors(frames: &[Spectrum]) -> Result<SpectralSummary> {
    let live: Vec<&Spectrum> = frames.iter().filter(|s| s.total() > 0.0).collect();
    if live.is_empty() {
        return Ok(SpectralSummary::default());
    }
    let m = live[0].len();
    if live.iter().any(|s| s.len() != m) {
        return Err(Error::invalid("spectra differ in length"));
    }
    let centroids: Vec<f64> = live.iter().filter_map(|s| spectral_centroid(s)).collect();
    let entropies: Vec<f64> = live.iter().filter_map(|s| spectral_entropy(s)).collect();
    let mut fluxes = Vec::new();
    for w in live.windows(2) {
        if let Some(f) = spectral_flux(w[0], w[1])? {
            fluxes.push(f);
        }
    }
    let mut avg = alloc::vec![0.0; m];
    for s in &live {
        for (a, p) in avg.iter_mut().zip(&s.power) {
            *a += p / live.len() as f64;
        }
    }
    Ok(SpectralSummary {
        centroid_hz: mean(&centroids),
        flux: mean(&fluxes),
        entropy: mean(&entropies),
        flatness: flatness_of(&avg),
    })
}
