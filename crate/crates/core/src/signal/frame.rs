use core::ops::Range;

use serde::{Deserialize, Serialize};

use super::SampledSignal;
use crate::{Error, Result};

/// Windowing plan mapping frame indices to sample spans.
///
/// `n_frames = floor((N - frame_len) / hop) + 1` when `N >= frame_len`,
/// otherwise zero. A trailing partial frame is discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameGrid {
    pub frame_len_samples: usize,
    pub hop_samples: usize,
    pub n_frames: usize,
    signal_len: usize,
}

impl FrameGrid {
    pub fn new(signal_len: usize, frame_len_samples: usize, hop_samples: usize) -> Result<Self> {
        if frame_len_samples == 0 || hop_samples == 0 {
            return Err(Error::invalid("frame length and hop must be positive"));
        }
        let n_frames = if signal_len >= frame_len_samples {
            (signal_len - frame_len_samples) / hop_samples + 1
        } else {
            0
        };
        Ok(FrameGrid {
            frame_len_samples,
            hop_samples,
            n_frames,
            signal_len,
        })
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    /// Analysis span of frame `i`.
    pub fn span(&self, i: usize) -> Range<usize> {
        let start = i * self.hop_samples;
        start..start + self.frame_len_samples
    }

    /// Samples a frame "owns" when frames are used as labels: one hop each,
    /// with the last frame extending to the end of the signal so that the
    /// owned spans tile the whole buffer.
    pub fn owned_span(&self, i: usize) -> Range<usize> {
        let start = i * self.hop_samples;
        if i + 1 == self.n_frames {
            start..self.signal_len
        } else {
            start..start + self.hop_samples
        }
    }

    /// Centre of frame `i` in seconds.
    pub fn center_s(&self, i: usize, sample_rate_hz: f64) -> f64 {
        (i * self.hop_samples) as f64 / sample_rate_hz
            + 0.5 * self.frame_len_samples as f64 / sample_rate_hz
    }

    pub fn frames<'a>(&self, samples: &'a [f64]) -> impl Iterator<Item = &'a [f64]> + 'a {
        let grid = *self;
        (0..grid.n_frames).map(move |i| &samples[grid.span(i)])
    }
}

/// Builds the frame grid for a signal from durations in milliseconds.
///
/// Sample counts are rounded to the nearest integer (25 ms at 8 kHz gives
/// 200 samples, 10 ms gives 80).
pub fn frame_signal(signal: &SampledSignal, frame_ms: f64, hop_ms: f64) -> Result<FrameGrid> {
    if !(hop_ms > 0.0 && frame_ms >= hop_ms && frame_ms.is_finite()) {
        return Err(Error::invalid("need frame_ms >= hop_ms > 0"));
    }
    let fs = signal.sample_rate_hz();
    let frame_len = libm::round(frame_ms * fs / 1000.0).max(1.0) as usize;
    let hop = libm::round(hop_ms * fs / 1000.0).max(1.0) as usize;
    FrameGrid::new(signal.len(), frame_len, hop)
}
