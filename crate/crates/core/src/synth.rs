//! Seeded synthetic signals with known ground truth.
//!
//! These back the test suites, the acceptance checks and the demo corpus
//! written by `fog synth`. Every generator is deterministic for a given
//! seed.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::signal::SampledSignal;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn white_noise(n: usize, std: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| std * r.sample::<f64, _>(StandardNormal)).collect()
}

/// Pink (1/f) noise from white noise through Paul Kellet's refined
/// filter, scaled to unit RMS.
pub fn pink_noise(n: usize, seed: u64) -> Vec<f64> {
    let white = white_noise(n, 1.0, seed);
    let mut b = [0.0f64; 7];
    let mut out: Vec<f64> = white
        .iter()
        .map(|&w| {
            b[0] = 0.99886 * b[0] + w * 0.0555179;
            b[1] = 0.99332 * b[1] + w * 0.0750759;
            b[2] = 0.96900 * b[2] + w * 0.1538520;
            b[3] = 0.86650 * b[3] + w * 0.3104856;
            b[4] = 0.55000 * b[4] + w * 0.5329522;
            b[5] = -0.7616 * b[5] - w * 0.0168980;
            let y = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + w * 0.5362;
            b[6] = w * 0.115926;
            y
        })
        .collect();
    let rms = crate::signal::rms(&out);
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v /= rms);
    }
    out
}

/// Adds `noise` scaled so that `10 log10(P_signal / P_noise) = snr_db`.
pub fn mix_at_snr(clean: &[f64], noise: &[f64], snr_db: f64) -> Vec<f64> {
    let ps = crate::signal::energy(clean) / clean.len().max(1) as f64;
    let pn = crate::signal::energy(&noise[..clean.len()]) / clean.len().max(1) as f64;
    let gain = if pn > 0.0 {
        libm::sqrt(ps / (pn * libm::pow(10.0, snr_db / 10.0)))
    } else {
        0.0
    };
    clean.iter().zip(noise).map(|(s, n)| s + gain * n).collect()
}

/// Sum of `n_harmonics` harmonics of `f0_hz` with `1/k` amplitudes, peak
/// normalised to `amplitude`. Harmonics above 0.45 fs are dropped.
pub fn harmonic_source(fs: f64, f0_hz: f64, n_harmonics: usize, duration_s: f64, amplitude: f64) -> Vec<f64> {
    let weights: Vec<f64> = (1..=n_harmonics).map(|k| 1.0 / k as f64).collect();
    harmonic_with_weights(fs, f0_hz, &weights, duration_s, amplitude)
}

fn harmonic_with_weights(fs: f64, f0_hz: f64, weights: &[f64], duration_s: f64, amplitude: f64) -> Vec<f64> {
    let n = (fs * duration_s) as usize;
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            weights
                .iter()
                .enumerate()
                .filter(|(k, _)| (*k + 1) as f64 * f0_hz < 0.45 * fs)
                .map(|(k, w)| w * libm::sin(2.0 * PI * (k + 1) as f64 * f0_hz * t + 0.3 * k as f64))
                .sum()
        })
        .collect();
    normalize_peak(&mut out, amplitude);
    out
}

fn normalize_peak(x: &mut [f64], amplitude: f64) {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v *= amplitude / peak);
    }
}

/// Harmonic amplitudes shaped by three formant resonances of an /a/-like
/// vowel (700, 1220, 2600 Hz).
fn vowel_weights(f0_hz: f64, fs: f64) -> Vec<f64> {
    const FORMANTS: [(f64, f64); 3] = [(700.0, 90.0), (1220.0, 110.0), (2600.0, 160.0)];
    let max_k = ((0.45 * fs).min(5000.0) / f0_hz) as usize;
    (1..=max_k)
        .map(|k| {
            let f = k as f64 * f0_hz;
            let gain: f64 = FORMANTS
                .iter()
                .map(|&(fc, bw)| {
                    let x = f / fc;
                    1.0 / libm::sqrt((1.0 - x * x) * (1.0 - x * x) + (x * bw / fc) * (x * bw / fc))
                })
                .product();
            gain / libm::sqrt(k as f64)
        })
        .collect()
}

/// Sustained vowel at `f0_hz`, peak amplitude `amplitude`.
pub fn sustained_vowel(fs: f64, f0_hz: f64, duration_s: f64, amplitude: f64) -> SampledSignal {
    let w = vowel_weights(f0_hz, fs);
    SampledSignal::from_parts(harmonic_with_weights(fs, f0_hz, &w, duration_s, amplitude), fs)
}

/// Layout of a syllable-like burst train.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstTrain {
    pub signal: SampledSignal,
    /// `(start, end)` sample index of each burst.
    pub bursts: Vec<(usize, usize)>,
}

/// Raised-cosine windowed vowel bursts of `burst_s` separated by `gap_s`
/// of silence, starting after `lead_s` of silence and padded with silence
/// to `total_s`. Burst F0 alternates slightly around `f0_hz` for a
/// speech-like prosody.
#[allow(clippy::too_many_arguments)]
pub fn syllable_train(fs: f64, f0_hz: f64, n_bursts: usize, burst_s: f64, gap_s: f64, lead_s: f64, total_s: f64, amplitude: f64) -> BurstTrain {
    let n_total = (fs * total_s) as usize;
    let mut out = vec![0.0; n_total];
    let mut bursts = Vec::with_capacity(n_bursts);
    let burst_len = libm::round(burst_s * fs) as usize;
    for b in 0..n_bursts {
        let start = libm::round((lead_s + b as f64 * (burst_s + gap_s)) * fs) as usize;
        if start + burst_len > n_total {
            break;
        }
        let f0 = f0_hz * (1.0 + 0.04 * libm::sin(b as f64 * 1.7));
        let v = sustained_vowel(fs, f0, burst_s + 1.0 / fs, amplitude);
        for i in 0..burst_len {
            let env = 0.5 - 0.5 * libm::cos(2.0 * PI * (i as f64 + 0.5) / burst_len as f64);
            out[start + i] = v.samples()[i] * libm::sqrt(env);
        }
        bursts.push((start, start + burst_len));
    }
    BurstTrain {
        signal: SampledSignal::from_parts(out, fs),
        bursts,
    }
}

/// Demo speech recording: syllables with pauses, light room noise.
pub fn speech_recording(fs: f64, duration_s: f64, seed: u64) -> SampledSignal {
    let mut r = rng(seed);
    let f0 = r.random_range(110.0..210.0);
    let mut out = vec![0.0; (fs * duration_s) as usize];
    let mut t = r.random_range(0.2..0.5);
    let mut syllable = 0usize;
    while t < duration_s - 0.6 {
        let len_s = r.random_range(0.15..0.3);
        let f = f0 * (1.0 + 0.08 * libm::sin(syllable as f64 * 0.9));
        let amp = r.random_range(0.25..0.6);
        let v = sustained_vowel(fs, f, len_s + 0.01, amp);
        let start = (t * fs) as usize;
        let len = (len_s * fs) as usize;
        for i in 0..len.min(out.len() - start) {
            let env = 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / len as f64);
            out[start + i] += v.samples()[i] * env;
        }
        syllable += 1;
        t += len_s + if syllable.is_multiple_of(4) { r.random_range(0.3..0.5) } else { r.random_range(0.05..0.12) };
    }
    let noise = white_noise(out.len(), 0.002, seed ^ 0x5eed);
    let samples = out.iter().zip(&noise).map(|(s, n)| (s + n).clamp(-1.0, 1.0)).collect();
    SampledSignal::from_parts(samples, fs)
}

/// Synthetic phonocardiogram with known S1 times.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPcg {
    pub signal: SampledSignal,
    /// Centre of each S1 burst in seconds.
    pub s1_times_s: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgSynthConfig {
    pub sample_rate_hz: f64,
    pub period_s: f64,
    pub duration_s: f64,
    pub snr_db: Option<f64>,
    /// Relative S2 amplitude (0 disables S2).
    pub s2_amplitude: f64,
    pub seed: u64,
}

impl Default for PcgSynthConfig {
    fn default() -> Self {
        PcgSynthConfig {
            sample_rate_hz: 800.0,
            period_s: 0.8,
            duration_s: 10.0,
            snr_db: None,
            s2_amplitude: 0.0,
            seed: 1,
        }
    }
}

/// S1 as a Gaussian-windowed 40 Hz burst (sigma 20 ms), S2 as a
/// Gaussian-windowed 60 Hz burst (sigma 15 ms) a third of a cycle later.
pub fn pcg(cfg: &PcgSynthConfig) -> SyntheticPcg {
    let fs = cfg.sample_rate_hz;
    let n = (fs * cfg.duration_s) as usize;
    let mut out = vec![0.0; n];
    let mut s1 = Vec::new();
    let add_burst = |center: f64, freq: f64, sigma: f64, amp: f64, out: &mut [f64]| {
        let lo = ((center - 4.0 * sigma) * fs).max(0.0) as usize;
        let hi = (((center + 4.0 * sigma) * fs) as usize).min(n);
        for (i, o) in out.iter_mut().enumerate().take(hi).skip(lo) {
            let t = i as f64 / fs - center;
            *o += amp * libm::exp(-0.5 * t * t / (sigma * sigma)) * libm::cos(2.0 * PI * freq * t);
        }
    };
    let mut t = 0.3 * cfg.period_s.min(1.0);
    while t < cfg.duration_s - 0.1 {
        add_burst(t, 40.0, 0.020, 0.8, &mut out);
        s1.push(t);
        if cfg.s2_amplitude > 0.0 {
            add_burst(t + cfg.period_s / 3.0, 60.0, 0.015, 0.8 * cfg.s2_amplitude, &mut out);
        }
        t += cfg.period_s;
    }
    if let Some(snr) = cfg.snr_db {
        out = mix_at_snr(&out, &white_noise(n, 1.0, cfg.seed), snr);
    }
    SyntheticPcg {
        signal: SampledSignal::from_parts(out, fs),
        s1_times_s: s1,
    }
}

/// Sample positions of one synthetic beat's waves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeatMarks {
    pub p: (usize, usize),
    pub qrs: (usize, usize),
    pub t: (usize, usize),
    pub r_peak: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEcg {
    pub signal: SampledSignal,
    pub beats: Vec<BeatMarks>,
}

impl SyntheticEcg {
    pub fn r_peaks(&self) -> Vec<usize> {
        self.beats.iter().map(|b| b.r_peak).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcgSynthConfig {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub bpm: f64,
    pub qrs_ms: f64,
    /// Beat-level RR jitter as a fraction of the mean RR.
    pub rr_jitter: f64,
    pub snr_db: Option<f64>,
    /// Peak baseline-wander amplitude in mV (0.3 Hz sinusoid).
    pub wander_mv: f64,
    pub seed: u64,
}

impl Default for EcgSynthConfig {
    fn default() -> Self {
        EcgSynthConfig {
            sample_rate_hz: 200.0,
            duration_s: 30.0,
            bpm: 60.0,
            qrs_ms: 90.0,
            rr_jitter: 0.0,
            snr_db: None,
            wander_mv: 0.0,
            seed: 1,
        }
    }
}

/// Raised-cosine pulse of width `w` centred at 0.
fn pulse(t: f64, w: f64) -> f64 {
    if t.abs() >= w / 2.0 {
        0.0
    } else {
        0.5 + 0.5 * libm::cos(2.0 * PI * t / w)
    }
}

fn gaussian(t: f64, sigma: f64) -> f64 {
    libm::exp(-0.5 * t * t / (sigma * sigma))
}

/// Synthetic ECG in mV with P, QRS and T waves.
///
/// The QRS spans exactly `qrs_ms`: a Q dip over its first quarter, the R
/// wave over the middle half and an S dip over the last quarter. P and T
/// are Gaussian bumps 200 ms before and 300 ms after the R peak.
pub fn ecg(cfg: &EcgSynthConfig) -> SyntheticEcg {
    let fs = cfg.sample_rate_hz;
    let n = (fs * cfg.duration_s) as usize;
    let rr = 60.0 / cfg.bpm;
    let d = cfg.qrs_ms / 1000.0;
    let mut r = rng(cfg.seed);
    let mut out = vec![0.0; n];
    let mut beats = Vec::new();
    let mut t_r = 0.5 * rr;
    const P_SIGMA: f64 = 0.025;
    const T_SIGMA: f64 = 0.045;
    while t_r < cfg.duration_s - 0.45 {
        let lo = ((t_r - 0.3) * fs).max(0.0) as usize;
        let hi = (((t_r + 0.45) * fs) as usize).min(n);
        for (i, o) in out.iter_mut().enumerate().take(hi).skip(lo) {
            let t = i as f64 / fs - t_r;
            let qrs = -0.12 * pulse(t + 0.375 * d, 0.25 * d) + 1.0 * pulse(t, 0.5 * d) - 0.25 * pulse(t - 0.375 * d, 0.25 * d);
            let p = 0.15 * gaussian(t + 0.2, P_SIGMA);
            let tw = 0.3 * gaussian(t - 0.3, T_SIGMA);
            *o += qrs + p + tw;
        }
        let idx = |t: f64| libm::round(t * fs).max(0.0) as usize;
        beats.push(BeatMarks {
            p: (idx(t_r - 0.2 - 2.5 * P_SIGMA), idx(t_r - 0.2 + 2.5 * P_SIGMA)),
            qrs: (idx(t_r - d / 2.0), idx(t_r + d / 2.0)),
            t: (idx(t_r + 0.3 - 2.5 * T_SIGMA), idx(t_r + 0.3 + 2.5 * T_SIGMA)),
            r_peak: idx(t_r),
        });
        let jitter = if cfg.rr_jitter > 0.0 { r.random_range(-cfg.rr_jitter..cfg.rr_jitter) } else { 0.0 };
        t_r += rr * (1.0 + jitter);
    }
    if cfg.wander_mv > 0.0 {
        for (i, o) in out.iter_mut().enumerate() {
            *o += cfg.wander_mv * libm::sin(2.0 * PI * 0.3 * i as f64 / fs);
        }
    }
    if let Some(snr) = cfg.snr_db {
        out = mix_at_snr(&out, &white_noise(n, 1.0, cfg.seed ^ 0xecec), snr);
    }
    SyntheticEcg {
        signal: SampledSignal::from_parts(out, fs),
        beats,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_mixing_hits_target() {
        let clean = harmonic_source(8000.0, 150.0, 8, 1.0, 0.5);
        let noise = white_noise(clean.len(), 1.0, 4);
        let mixed = mix_at_snr(&clean, &noise, 5.0);
        let resid: Vec<f64> = mixed.iter().zip(&clean).map(|(m, c)| m - c).collect();
        let snr = 10.0 * libm::log10(crate::signal::energy(&clean) / crate::signal::energy(&resid));
        assert!((snr - 5.0).abs() < 1e-9);
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(pink_noise(100, 3), pink_noise(100, 3));
        assert_ne!(pink_noise(100, 3), pink_noise(100, 4));
        let cfg = EcgSynthConfig { snr_db: Some(20.0), ..Default::default() };
        assert_eq!(ecg(&cfg), ecg(&cfg));
    }

    #[test]
    fn ecg_beat_count() {
        let e = ecg(&EcgSynthConfig::default());
        assert_eq!(e.beats.len(), 30);
        assert!(e.r_peaks().windows(2).all(|w| w[1] - w[0] == 200));
    }
}
