//! Clinical speech chain: denoise, voice activity, trimming, pitch and the
//! perceptual and spectral feature set.

mod denoise;
mod descriptors;
mod features;
mod loudness;
mod pitch;
mod rates;
mod vad;
mod voice;

pub use denoise::{denoise, denoise_with, expint_e1, lsa_gain, segmental_snr_db, DenoiseConfig};
pub use descriptors::{spectral_centroid, spectral_descriptors, spectral_entropy, spectral_flatness, spectral_flux, SpectralSummary};
pub use features::{extract_speech_features, SpeechFeatureSet, TaskId};
pub use loudness::{
    band_rate, bark_to_hz, hz_to_bark, loudness_zwicker, sharpness, sharpness_weight, sone_to_phon,
    threshold_in_quiet_db, BarkSpectrum, LoudnessModel, DZ, FULL_SCALE_DB_SPL, N_BANDS,
};
pub use pitch::{estimate_pitch_pefac, estimate_pitch_with, pefac_frames, PefacConfig, PefacFrame, F0_MAX_HZ, F0_MIN_HZ};
pub use rates::{speech_rates, syllable_nuclei, SpeechRates, NUCLEUS_PROMINENCE_DB};
pub use vad::{
    detect_speech_activity, frame_energy_db, trim, Trimmed, VadLabels, ABSOLUTE_FLOOR_DBFS, FRAME_MS, HANGOVER_FRAMES, HOP_MS,
    SNR_THRESHOLD_DB,
};
pub use voice::{
    fmod_from_f0, frange_from_f0, frequency_modulation, frequency_range, hnr, hnr_from_peak, jitter,
    jitter_from_periods, percentile, HNR_CAP_DB,
};

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Per-frame F0 in Hz, 0 for unvoiced frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    pub f0_hz: Vec<f64>,
    pub hop_s: f64,
}

impl PitchTrack {
    pub fn new(f0_hz: Vec<f64>, hop_s: f64) -> Self {
        PitchTrack { f0_hz, hop_s }
    }

    /// Voiced F0 values in frame order.
    pub fn voiced(&self) -> impl Iterator<Item = f64> + '_ {
        self.f0_hz.iter().copied().filter(|&f| f > 0.0)
    }

    pub fn n_voiced(&self) -> usize {
        self.voiced().count()
    }

    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }
}
