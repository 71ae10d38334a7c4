//! PEFAC-style pitch tracking: log-frequency power spectrum normalised by
//! its smoothed long-term average, correlated with a harmonic comb whose
//! teeth are broadened cosine resonances.

use alloc::vec;
use alloc::vec::Vec;

use super::PitchTrack;
use crate::signal::{frame_signal, SampledSignal, SpectrumAnalyzer, Window};
use crate::Result;

pub const F0_MIN_HZ: f64 = 60.0;
pub const F0_MAX_HZ: f64 = 400.0;
pub const FRAME_MS: f64 = 25.0;
pub const HOP_MS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PefacConfig {
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    /// Log-frequency resolution.
    pub points_per_octave: usize,
    /// Number of comb teeth.
    pub harmonics: usize,
    /// Comb sharpness: teeth are `1 / (gamma - cos(2 pi e^q))`.
    pub gamma: f64,
    /// Upper analysis frequency.
    pub max_freq_hz: f64,
    /// Width of the long-term average smoothing, in octaves.
    pub ltas_smoothing_octaves: f64,
    /// Voicing threshold on [`PefacFrame::salience`].
    pub voicing_threshold: f64,
}

impl Default for PefacConfig {
    fn default() -> Self {
        PefacConfig {
            f0_min_hz: F0_MIN_HZ,
            f0_max_hz: F0_MAX_HZ,
            points_per_octave: 96,
            harmonics: 10,
            gamma: 1.8,
            max_freq_hz: 5000.0,
            ltas_smoothing_octaves: 1.0,
            voicing_threshold: 5.0,
        }
    }
}

/// Per-frame comb response summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PefacFrame {
    pub f0_hz: f64,
    /// Height of the comb peak above the mean response, in units of the
    /// response's mean absolute deviation across candidate pitches.
    pub salience: f64,
    pub energy: f64,
}

struct LogGrid {
    q0: f64,
    dq: f64,
    len: usize,
}

impl LogGrid {
    fn freq(&self, i: usize) -> f64 {
        libm::exp(self.q0 + i as f64 * self.dq)
    }
}

/// Comb filter over log-frequency offsets from `ln 0.5` to `ln(K + 0.5)`,
/// shifted to zero mean so that a flat spectrum scores zero.
fn comb(cfg: &PefacConfig, dq: f64) -> (Vec<f64>, isize) {
    let lo = libm::log(0.5);
    let hi = libm::log(cfg.harmonics as f64 + 0.5);
    let start = libm::floor(lo / dq) as isize;
    let end = libm::ceil(hi / dq) as isize;
    let mut h: Vec<f64> = (start..=end)
        .map(|i| 1.0 / (cfg.gamma - libm::cos(2.0 * core::f64::consts::PI * libm::exp(i as f64 * dq))))
        .collect();
    let mean = h.iter().sum::<f64>() / h.len() as f64;
    h.iter_mut().for_each(|v| *v -= mean);
    (h, start)
}

fn interpolate(power: &[f64], bin_hz: f64, f: f64) -> f64 {
    let pos = f / bin_hz;
    let k = libm::floor(pos) as usize;
    if k + 1 >= power.len() {
        return 0.0;
    }
    let frac = pos - k as f64;
    power[k] * (1.0 - frac) + power[k + 1] * frac
}

/// Comb analysis of every 25 ms frame (10 ms hop).
pub fn pefac_frames(signal: &SampledSignal, cfg: &PefacConfig) -> Result<Vec<PefacFrame>> {
    let fs = signal.sample_rate_hz();
    let grid = frame_signal(signal, FRAME_MS, HOP_MS)?;
    if grid.n_frames == 0 {
        return Ok(Vec::new());
    }
    let n_fft = (4 * grid.frame_len_samples).next_power_of_two();
    let analyzer = SpectrumAnalyzer::new(grid.frame_len_samples, n_fft, Window::Hann, fs)?;
    let dq = libm::log(2.0) / cfg.points_per_octave as f64;
    let f_lo = 0.5 * cfg.f0_min_hz;
    let f_hi = cfg.max_freq_hz.min(0.5 * fs);
    let log_grid = LogGrid {
        q0: libm::log(f_lo),
        dq,
        len: (libm::log(f_hi / f_lo) / dq) as usize + 1,
    };
    let bin_hz = analyzer.bin_width_hz();
    let x = signal.samples();

    let spectra: Vec<Vec<f64>> = grid
        .frames(x)
        .map(|frame| {
            let s = analyzer.analyze(frame);
            (0..log_grid.len).map(|i| interpolate(&s.power, bin_hz, log_grid.freq(i))).collect()
        })
        .collect();
    let energies: Vec<f64> = grid.frames(x).map(|f| f.iter().map(|v| v * v).sum()).collect();

    // Long-term average over frames with signal, smoothed across
    // log-frequency so harmonic ripple does not survive into it.
    let live = energies.iter().filter(|&&e| e > 0.0).count().max(1);
    let mut ltas = vec![0.0; log_grid.len];
    for (s, &e) in spectra.iter().zip(&energies) {
        if e > 0.0 {
            for (a, p) in ltas.iter_mut().zip(s) {
                *a += p / live as f64;
            }
        }
    }
    let half = ((cfg.ltas_smoothing_octaves * cfg.points_per_octave as f64) / 2.0) as usize;
    let smoothed: Vec<f64> = (0..log_grid.len)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(log_grid.len - 1);
            ltas[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let floor = smoothed.iter().fold(0.0f64, |m, v| m.max(*v)) * 1e-12;

    let (h, h_start) = comb(cfg, dq);
    let cand_lo = (libm::log(cfg.f0_min_hz / f_lo) / dq).round() as usize;
    let cand_hi = ((libm::log(cfg.f0_max_hz / f_lo) / dq).round() as usize).min(log_grid.len - 1);

    Ok(spectra
        .iter()
        .zip(&energies)
        .map(|(s, &energy)| {
            if energy <= 0.0 {
                return PefacFrame { f0_hz: 0.0, salience: 0.0, energy };
            }
            let norm: Vec<f64> = s.iter().zip(&smoothed).map(|(p, l)| p / l.max(floor).max(f64::MIN_POSITIVE)).collect();
            let z: Vec<f64> = (cand_lo..=cand_hi)
                .map(|c| {
                    h.iter()
                        .enumerate()
                        .map(|(j, hv)| {
                            let idx = c as isize + h_start + j as isize;
                            if idx >= 0 && (idx as usize) < norm.len() {
                                hv * norm[idx as usize]
                            } else {
                                0.0
                            }
                        })
                        .sum::<f64>()
                })
                .collect();
            let best = (0..z.len()).max_by(|&a, &b| z[a].total_cmp(&z[b])).unwrap_or(0);
            let mut offset = 0.0;
            if best > 0 && best + 1 < z.len() {
                let (a, b, c) = (z[best - 1], z[best], z[best + 1]);
                let d = a - 2.0 * b + c;
                if d < 0.0 {
                    offset = 0.5 * (a - c) / d;
                }
            }
            let q = log_grid.q0 + (cand_lo as f64 + best as f64 + offset) * dq;
            let f0 = libm::exp(q).clamp(cfg.f0_min_hz, cfg.f0_max_hz);
            let zm = z.iter().sum::<f64>() / z.len() as f64;
            let spread = z.iter().map(|v| (v - zm).abs()).sum::<f64>() / z.len() as f64;
            let salience = if spread > 0.0 { (z[best] - zm) / spread } else { 0.0 };
            PefacFrame { f0_hz: f0, salience, energy }
        })
        .collect())
}

/// Pitch track with default parameters; unvoiced frames report 0.
pub fn estimate_pitch_pefac(signal: &SampledSignal) -> Result<PitchTrack> {
    estimate_pitch_with(signal, &PefacConfig::default())
}

pub fn estimate_pitch_with(signal: &SampledSignal, cfg: &PefacConfig) -> Result<PitchTrack> {
    let frames = pefac_frames(signal, cfg)?;
    let f0 = frames
        .iter()
        .map(|f| if f.salience >= cfg.voicing_threshold { f.f0_hz } else { 0.0 })
        .collect();
    Ok(PitchTrack::new(f0, HOP_MS / 1000.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{harmonic_source, mix_at_snr, pink_noise, white_noise};

    const FS: f64 = 44_100.0;

    fn track(x: Vec<f64>) -> PitchTrack {
        estimate_pitch_pefac(&SampledSignal::new(x, FS).unwrap()).unwrap()
    }

    #[test]
    fn clean_harmonic_sources() {
        for f0 in [100.0, 150.0, 220.0] {
            let t = track(harmonic_source(FS, f0, 8, 2.0, 0.5));
            let voiced: Vec<f64> = t.voiced().collect();
            assert!(voiced.len() as f64 >= 0.9 * t.len() as f64, "{f0}: {} of {}", voiced.len(), t.len());
            let close = voiced.iter().filter(|v| (*v - f0).abs() <= 3.0).count();
            assert!(close as f64 >= 0.9 * t.len() as f64, "{f0}");
            let med = crate::signal::median(&voiced).unwrap();
            assert!((med - f0).abs() <= 3.0, "{f0}: {med}");
        }
    }

    #[test]
    fn white_noise_is_unvoiced() {
        for seed in 1..4 {
            let t = track(white_noise(88_200, 0.1, seed));
            let unvoiced = t.f0_hz.iter().filter(|v| **v == 0.0).count();
            assert!(unvoiced as f64 >= 0.9 * t.len() as f64, "seed {seed}: {unvoiced}/{}", t.len());
        }
    }

    #[test]
    fn pink_noise_gross_errors() {
        let f0 = 150.0;
        let clean = harmonic_source(FS, f0, 8, 2.0, 0.5);
        for seed in 1..4 {
            let noisy = mix_at_snr(&clean, &pink_noise(clean.len(), seed), 0.0);
            let frames = pefac_frames(&SampledSignal::new(noisy, FS).unwrap(), &PefacConfig::default()).unwrap();
            let gross = frames.iter().filter(|f| (f.f0_hz - f0).abs() > 0.2 * f0).count();
            assert!(gross as f64 <= 0.2 * frames.len() as f64, "seed {seed}: {gross}/{}", frames.len());
        }
    }

    #[test]
    fn silence_and_short_input() {
        let t = track(vec![0.0; 22_050]);
        assert!(t.n_voiced() == 0 && !t.is_empty());
        assert!(track(vec![0.1; 100]).is_empty());
    }

    #[test]
    fn works_at_speech_rates() {
        for fs in [8_000.0, 16_000.0] {
            let x = harmonic_source(fs, 130.0, 8, 1.0, 0.5);
            let t = estimate_pitch_pefac(&SampledSignal::new(x, fs).unwrap()).unwrap();
            let med = crate::signal::median(&t.voiced().collect::<Vec<_>>()).unwrap();
            assert!((med - 130.0).abs() <= 3.0, "{fs}: {med}");
        }
    }
}
