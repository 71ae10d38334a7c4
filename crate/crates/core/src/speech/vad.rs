//! Energy-based voice activity detection on the 25 ms / 10 ms grid and
//! trimming to the speech-labelled spans.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::signal::{frame_signal, FrameGrid, SampledSignal};
use crate::Result;

pub const FRAME_MS: f64 = 25.0;
pub const HOP_MS: f64 = 10.0;
/// A posteriori SNR over the noise floor that marks speech.
pub const SNR_THRESHOLD_DB: f64 = 3.0;
/// Speech gaps up to this many frames are bridged.
pub const HANGOVER_FRAMES: usize = 5;
/// Frames quieter than this are never speech.
pub const ABSOLUTE_FLOOR_DBFS: f64 = -50.0;
/// The noise floor is never placed closer than this to the loudest frame.
pub const MIN_FLOOR_SPAN_DB: f64 = 6.0;
const FLOOR_PERCENTILE: f64 = 0.05;

/// Per-frame speech labels on a frame grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VadLabels {
    pub grid: FrameGrid,
    pub labels: Vec<bool>,
}

impl VadLabels {
    pub fn speech_frames(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn speech_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            0.0
        } else {
            self.speech_frames() as f64 / self.labels.len() as f64
        }
    }

    /// Maximal runs of speech frames as `start..end` frame ranges.
    pub fn runs(&self) -> Vec<core::ops::Range<usize>> {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, &l) in self.labels.iter().enumerate() {
            match (l, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push(s..i);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push(s..self.labels.len());
        }
        runs
    }
}

/// Mean-square frame energies in dB full scale (a full-scale sine is
/// -3 dBFS under this convention).
pub fn frame_energy_db(x: &[f64], grid: &FrameGrid) -> Vec<f64> {
    grid.frames(x)
        .map(|f| {
            let ms = f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64;
            10.0 * libm::log10(ms + 1e-12)
        })
        .collect()
}

/// Labels a frame as speech when its energy is at least 3 dB above the
/// noise floor and above -50 dBFS; gaps of up to five frames between
/// speech frames are then filled.
///
/// The floor is the 5th-percentile frame energy, but never closer than
/// 6 dB to the loudest frame, so a recording that is speech throughout
/// still has a floor below it. The flip side is that loud stationary noise
/// with no quieter stretch reads as speech; the denoiser runs first.
pub fn detect_speech_activity(signal: &SampledSignal) -> Result<VadLabels> {
    let grid = frame_signal(signal, FRAME_MS, HOP_MS)?;
    let energy = frame_energy_db(signal.samples(), &grid);
    if energy.is_empty() {
        return Ok(VadLabels { grid, labels: Vec::new() });
    }
    let mut sorted = energy.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let p = sorted[((sorted.len() - 1) as f64 * FLOOR_PERCENTILE) as usize];
    let loudest = sorted[sorted.len() - 1];
    let floor = p.min(loudest - MIN_FLOOR_SPAN_DB);
    let mut labels: Vec<bool> = energy
        .iter()
        .map(|&e| e >= floor + SNR_THRESHOLD_DB && e >= ABSOLUTE_FLOOR_DBFS)
        .collect();
    let mut last_speech: Option<usize> = None;
    for i in 0..labels.len() {
        if labels[i] {
            if let Some(j) = last_speech {
                if i - j > 1 && i - j - 1 <= HANGOVER_FRAMES {
                    labels[j + 1..i].iter_mut().for_each(|l| *l = true);
                }
            }
            last_speech = Some(i);
        }
    }
    Ok(VadLabels { grid, labels })
}

/// Result of trimming: the concatenated speech, or a distinct marker when
/// nothing was labelled speech.
#[derive(Debug, Clone, PartialEq)]
pub enum Trimmed {
    Speech { signal: SampledSignal, phonation_s: f64 },
    NoSpeech,
}

impl Trimmed {
    pub fn phonation_s(&self) -> f64 {
        match self {
            Trimmed::Speech { phonation_s, .. } => *phonation_s,
            Trimmed::NoSpeech => 0.0,
        }
    }

    pub fn signal(&self) -> Option<&SampledSignal> {
        match self {
            Trimmed::Speech { signal, .. } => Some(signal),
            Trimmed::NoSpeech => None,
        }
    }
}

/// Concatenates the samples owned by speech-labelled frames (one hop per
/// frame, the last frame owning the tail).
pub fn trim(signal: &SampledSignal, labels: &VadLabels) -> Result<Trimmed> {
    if labels.grid.signal_len() != signal.len() || labels.labels.len() != labels.grid.n_frames {
        return Err(crate::Error::invalid("labels do not match the signal's frame grid"));
    }
    let x = signal.samples();
    let mut out = Vec::new();
    for (i, &l) in labels.labels.iter().enumerate() {
        if l {
            out.extend_from_slice(&x[labels.grid.owned_span(i)]);
        }
    }
    if out.is_empty() {
        return Ok(Trimmed::NoSpeech);
    }
    let signal = signal.with_samples(out);
    Ok(Trimmed::Speech {
        phonation_s: signal.duration_s(),
        signal,
    })
}
