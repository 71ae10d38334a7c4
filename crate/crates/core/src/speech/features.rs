//! The per-recording feature set.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    denoise, detect_speech_activity, estimate_pitch_pefac, frequency_modulation, frequency_range, hnr, jitter,
    loudness_zwicker, sharpness, spectral_descriptors, speech_rates, trim, PitchTrack, Trimmed,
};
use crate::signal::{frame_signal, SampledSignal, SpectrumAnalyzer, Window};
use crate::Error;

/// The seven recorded speech exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskId {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
}

impl TaskId {
    pub const ALL: [TaskId; 7] = [TaskId::T1, TaskId::T2, TaskId::T3, TaskId::T4, TaskId::T5, TaskId::T6, TaskId::T7];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::T1 => "t1",
            TaskId::T2 => "t2",
            TaskId::T3 => "t3",
            TaskId::T4 => "t4",
            TaskId::T5 => "t5",
            TaskId::T6 => "t6",
            TaskId::T7 => "t7",
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let name = lower.strip_prefix("task").unwrap_or(&lower);
        let name = name.strip_prefix('t').unwrap_or(name);
        match name {
            "1" => Ok(TaskId::T1),
            "2" => Ok(TaskId::T2),
            "3" => Ok(TaskId::T3),
            "4" => Ok(TaskId::T4),
            "5" => Ok(TaskId::T5),
            "6" => Ok(TaskId::T6),
            "7" => Ok(TaskId::T7),
            _ => Err(Error::invalid("unknown speech task id")),
        }
    }
}

/// Clinical features of one recording. A feature that could not be
/// computed (no speech, too few voiced frames) is `None` and serialises as
/// `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechFeatureSet {
    pub task_id: TaskId,
    pub phonation_s: f64,
    pub loudness_phon: Option<f64>,
    pub f0_mean_hz: Option<f64>,
    pub f0_std_hz: Option<f64>,
    pub jitter_ms: Option<f64>,
    pub fmod: Option<f64>,
    pub frange_hz: Option<f64>,
    pub hnr_db: Option<f64>,
    pub spectral_centroid_hz: Option<f64>,
    pub spectral_flux: Option<f64>,
    pub spectral_entropy: Option<f64>,
    pub spectral_flatness: Option<f64>,
    pub sharpness_acum: Option<f64>,
    pub speech_rate_syll_per_s: Option<f64>,
    pub articulation_rate_syll_per_s: Option<f64>,
}

impl SpeechFeatureSet {
    pub fn empty(task_id: TaskId) -> Self {
        SpeechFeatureSet {
            task_id,
            phonation_s: 0.0,
            loudness_phon: None,
            f0_mean_hz: None,
            f0_std_hz: None,
            jitter_ms: None,
            fmod: None,
            frange_hz: None,
            hnr_db: None,
            spectral_centroid_hz: None,
            spectral_flux: None,
            spectral_entropy: None,
            spectral_flatness: None,
            sharpness_acum: None,
            speech_rate_syll_per_s: None,
            articulation_rate_syll_per_s: None,
        }
    }

    pub fn has_speech(&self) -> bool {
        self.phonation_s > 0.0
    }

    /// Names of the features that are absent.
    pub fn missing(&self) -> Vec<String> {
        let fields = [
            ("loudness_phon", self.loudness_phon),
            ("f0_mean_hz", self.f0_mean_hz),
            ("f0_std_hz", self.f0_std_hz),
            ("jitter_ms", self.jitter_ms),
            ("fmod", self.fmod),
            ("frange_hz", self.frange_hz),
            ("hnr_db", self.hnr_db),
            ("spectral_centroid_hz", self.spectral_centroid_hz),
            ("spectral_flux", self.spectral_flux),
            ("spectral_entropy", self.spectral_entropy),
            ("spectral_flatness", self.spectral_flatness),
            ("sharpness_acum", self.sharpness_acum),
            ("speech_rate_syll_per_s", self.speech_rate_syll_per_s),
            ("articulation_rate_syll_per_s", self.articulation_rate_syll_per_s),
        ];
        fields.iter().filter(|(_, v)| v.is_none()).map(|(k, _)| String::from(*k)).collect()
    }
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (Some(mean), Some(libm::sqrt(var)))
}

/// Mean HNR over the pitch track's voiced frames.
fn mean_hnr(signal: &SampledSignal, track: &PitchTrack) -> Option<f64> {
    let grid = frame_signal(signal, super::pitch::FRAME_MS, super::pitch::HOP_MS).ok()?;
    let values: Vec<f64> = grid
        .frames(signal.samples())
        .zip(&track.f0_hz)
        .filter(|(_, f0)| **f0 > 0.0)
        .filter_map(|(frame, _)| hnr(frame, signal.sample_rate_hz()))
        .collect();
    mean_std(&values).0
}

fn spectra(signal: &SampledSignal) -> Vec<crate::signal::Spectrum> {
    let Ok(grid) = frame_signal(signal, super::vad::FRAME_MS, super::vad::HOP_MS) else {
        return Vec::new();
    };
    if grid.n_frames == 0 {
        return Vec::new();
    }
    let n_fft = grid.frame_len_samples.next_power_of_two();
    let Ok(analyzer) = SpectrumAnalyzer::new(grid.frame_len_samples, n_fft, Window::Hann, signal.sample_rate_hz()) else {
        return Vec::new();
    };
    grid.frames(signal.samples()).map(|f| analyzer.analyze(f)).collect()
}

/// Denoise, label speech, trim to it, track pitch and compute every
/// feature. Individual features that cannot be computed are left absent;
/// a recording with no speech yields [`SpeechFeatureSet::empty`].
pub fn extract_speech_features(signal: &SampledSignal, task_id: TaskId) -> SpeechFeatureSet {
    // Inputs too short for the denoiser are analysed as they are.
    let clean = denoise(signal).unwrap_or_else(|_| signal.clone());
    let Ok(labels) = detect_speech_activity(&clean) else {
        return SpeechFeatureSet::empty(task_id);
    };
    let speech = match trim(&clean, &labels) {
        Ok(Trimmed::Speech { signal, .. }) => signal,
        _ => return SpeechFeatureSet::empty(task_id),
    };
    let mut out = SpeechFeatureSet::empty(task_id);
    out.phonation_s = speech.duration_s();

    if let Ok(track) = estimate_pitch_pefac(&speech) {
        let voiced: Vec<f64> = track.voiced().collect();
        (out.f0_mean_hz, out.f0_std_hz) = mean_std(&voiced);
        out.jitter_ms = jitter(&track).ok();
        out.fmod = frequency_modulation(&track).ok();
        out.frange_hz = frequency_range(&track).ok();
        out.hnr_db = mean_hnr(&speech, &track);
    }
    if let Ok((phon, bark)) = loudness_zwicker(&speech) {
        out.loudness_phon = Some(phon);
        out.sharpness_acum = sharpness(&bark).ok();
    }
    if let Ok(summary) = spectral_descriptors(&spectra(&speech)) {
        out.spectral_centroid_hz = summary.centroid_hz;
        out.spectral_flux = summary.flux;
        out.spectral_entropy = summary.entropy;
        out.spectral_flatness = summary.flatness;
    }
    if let Ok(rates) = speech_rates(&clean, &labels) {
        out.speech_rate_syll_per_s = Some(rates.speech_rate);
        out.articulation_rate_syll_per_s = Some(rates.articulation_rate);
    }
    out
}
