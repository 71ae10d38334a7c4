//! Syllable-nucleus counting on the intensity contour.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::vad::{frame_energy_db, VadLabels};
use crate::signal::SampledSignal;
use crate::{Error, Result};

/// A nucleus must stand this far above the dip separating it from the
/// previous one.
pub const NUCLEUS_PROMINENCE_DB: f64 = 2.0;
const SMOOTHING_FRAMES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeechRates {
    pub syllables: usize,
    /// Syllables per second of the whole recording.
    pub speech_rate: f64,
    /// Syllables per second of speech-labelled time.
    pub articulation_rate: f64,
    pub phonation_s: f64,
}

/// Frame indices of syllable nuclei: local maxima of the smoothed
/// intensity contour inside speech frames, each at least 2 dB above the
/// lowest point since the previous nucleus. Of two maxima without such a
/// dip between them, the louder one is kept.
pub fn syllable_nuclei(signal: &SampledSignal, labels: &VadLabels) -> Result<Vec<usize>> {
    if labels.grid.signal_len() != signal.len() || labels.labels.len() != labels.grid.n_frames {
        return Err(Error::invalid("labels do not match the signal's frame grid"));
    }
    let raw = frame_energy_db(signal.samples(), &labels.grid);
    let n = raw.len();
    let half = SMOOTHING_FRAMES / 2;
    let contour: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n.saturating_sub(1));
            raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();

    let mut nuclei: Vec<usize> = Vec::new();
    let mut dip = f64::INFINITY;
    for i in 0..n {
        dip = dip.min(contour[i]);
        let left = if i > 0 { contour[i - 1] } else { f64::NEG_INFINITY };
        let right = if i + 1 < n { contour[i + 1] } else { f64::NEG_INFINITY };
        if !labels.labels[i] || contour[i] <= left || contour[i] < right {
            continue;
        }
        if contour[i] - dip >= NUCLEUS_PROMINENCE_DB {
            nuclei.push(i);
            dip = contour[i];
        } else if let Some(last) = nuclei.last_mut() {
            if contour[i] > contour[*last] {
                *last = i;
                dip = contour[i];
            }
        }
    }
    Ok(nuclei)
}

/// Speech and articulation rates. Phonation time is the duration owned by
/// speech-labelled frames.
pub fn speech_rates(signal: &SampledSignal, labels: &VadLabels) -> Result<SpeechRates> {
    let total = signal.duration_s();
    if total <= 0.0 {
        return Err(Error::invalid("zero-duration signal"));
    }
    let syllables = syllable_nuclei(signal, labels)?.len();
    let owned: usize = labels
        .labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l)
        .map(|(i, _)| labels.grid.owned_span(i).len())
        .sum();
    let phonation_s = owned as f64 / signal.sample_rate_hz();
    let articulation_rate = if phonation_s > 0.0 { syllables as f64 / phonation_s } else { 0.0 };
    Ok(SpeechRates {
        syllables,
        speech_rate: syllables as f64 / total,
        articulation_rate,
        phonation_s,
    })
}
