//! Spectral-gain noise suppression: minima-controlled recursive averaging
//! (MCRA) noise tracking with a decision-directed log-spectral-amplitude
//! gain.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::fft::FftPlan;
use crate::signal::{SampledSignal, Window};
use crate::{Error, Result};

pub const MIN_RATE_HZ: f64 = 8000.0;
pub const MIN_DURATION_S: f64 = 0.5;

/// Suppressor parameters. Defaults are the values the pipeline uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseConfig {
    /// Analysis frame in seconds (50% overlap).
    pub frame_s: f64,
    /// Decision-directed smoothing of the a priori SNR.
    pub dd_alpha: f64,
    /// Minimum-tracking window in seconds.
    pub min_window_s: f64,
    pub gain_floor_db: f64,
    /// Time smoothing of the power used for minimum tracking.
    pub alpha_s: f64,
    /// Noise update smoothing when speech is absent.
    pub alpha_d: f64,
    /// Smoothing of the speech-presence probability.
    pub alpha_p: f64,
    /// Ratio of smoothed power to its minimum that signals speech.
    pub delta: f64,
    pub xi_min_db: f64,
    /// Leading stretch averaged for the initial noise estimate.
    pub init_s: f64,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            frame_s: 0.032,
            dd_alpha: 0.98,
            min_window_s: 1.5,
            gain_floor_db: -18.0,
            alpha_s: 0.7,
            alpha_d: 0.95,
            alpha_p: 0.2,
            delta: 5.0,
            xi_min_db: -25.0,
            init_s: 0.1,
        }
    }
}

/// Exponential integral `E1(x) = int_x^inf e^-t / t dt` for `x > 0`.
pub fn expint_e1(x: f64) -> f64 {
    const EULER: f64 = 0.577_215_664_901_532_9;
    if !(x > 0.0) {
        return f64::INFINITY;
    }
    if x > 700.0 {
        return 0.0;
    }
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return -EULER - libm::log(x) + sum;
    }
    // Modified Lentz evaluation of the continued fraction.
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..200 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * libm::exp(-x)
}

/// Log-spectral-amplitude gain `xi/(1+xi) * exp(E1(v)/2)` with
/// `v = xi gamma / (1 + xi)`.
pub fn lsa_gain(xi: f64, gamma: f64) -> f64 {
    let r = xi / (1.0 + xi);
    let v = r * gamma;
    if v <= 0.0 {
        return 0.0;
    }
    r * libm::exp(0.5 * expint_e1(v))
}

/// Per-bin MCRA state.
struct NoiseTracker {
    smoothed: Vec<f64>,
    minimum: Vec<f64>,
    running_min: Vec<f64>,
    presence: Vec<f64>,
    noise: Vec<f64>,
    frames_in_window: usize,
    window_frames: usize,
}

impl NoiseTracker {
    fn new(initial: Vec<f64>, window_frames: usize) -> Self {
        let s = smooth_frequency(&initial);
        NoiseTracker {
            minimum: s.clone(),
            running_min: s.clone(),
            smoothed: s,
            presence: vec![0.0; initial.len()],
            noise: initial,
            frames_in_window: 0,
            window_frames: window_frames.max(1),
        }
    }

    fn update(&mut self, power: &[f64], cfg: &DenoiseConfig) {
        let sf = smooth_frequency(power);
        self.frames_in_window += 1;
        let reset = self.frames_in_window >= self.window_frames;
        for k in 0..power.len() {
            let s = cfg.alpha_s * self.smoothed[k] + (1.0 - cfg.alpha_s) * sf[k];
            self.smoothed[k] = s;
            if reset {
                self.minimum[k] = self.running_min[k].min(s);
                self.running_min[k] = s;
            } else {
                self.minimum[k] = self.minimum[k].min(s);
                self.running_min[k] = self.running_min[k].min(s);
            }
            let speech = if s > cfg.delta * self.minimum[k] { 1.0 } else { 0.0 };
            self.presence[k] = cfg.alpha_p * self.presence[k] + (1.0 - cfg.alpha_p) * speech;
            let a = cfg.alpha_d + (1.0 - cfg.alpha_d) * self.presence[k];
            self.noise[k] = a * self.noise[k] + (1.0 - a) * power[k];
        }
        if reset {
            self.frames_in_window = 0;
        }
    }
}

fn smooth_frequency(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    (0..n)
        .map(|k| {
            let left = p[k.saturating_sub(1)];
            let right = p[(k + 1).min(n - 1)];
            0.25 * left + 0.5 * p[k] + 0.25 * right
        })
        .collect()
}

/// Suppress stationary background noise with default parameters.
pub fn denoise(noisy: &SampledSignal) -> Result<SampledSignal> {
    denoise_with(noisy, &DenoiseConfig::default())
}

pub fn denoise_with(noisy: &SampledSignal, cfg: &DenoiseConfig) -> Result<SampledSignal> {
    let fs = noisy.sample_rate_hz();
    if fs < MIN_RATE_HZ {
        return Err(Error::invalid("denoising needs at least 8 kHz audio"));
    }
    if noisy.duration_s() < MIN_DURATION_S {
        return Err(Error::invalid("denoising needs at least 0.5 s of audio"));
    }
    let hop = libm::round(0.5 * cfg.frame_s * fs) as usize;
    let n = 2 * hop;
    let x = noisy.samples();
    // Square-root periodic Hann: analysis times synthesis sums to one at
    // 50% overlap.
    let window: Vec<f64> = Window::Hann.coefficients(n).iter().map(|w| libm::sqrt(*w)).collect();
    let mut padded = vec![0.0; hop];
    padded.extend_from_slice(x);
    padded.resize(padded.len() + n, 0.0);
    let n_frames = (padded.len() - n) / hop + 1;
    let plan = FftPlan::new(n);
    let half = n / 2 + 1;
    let window_frames = libm::round(cfg.min_window_s / (hop as f64 / fs)) as usize;
    let g_min = libm::pow(10.0, cfg.gain_floor_db / 20.0);
    let xi_min = libm::pow(10.0, cfg.xi_min_db / 10.0);
    // Keeps ratios finite on digital silence.
    let eps = 1e-20;

    let spectrum = |start: usize, buf: &mut [Complex64]| {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(padded[start + i] * window[i], 0.0);
        }
        plan.forward(buf);
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let init_frames = (libm::round(cfg.init_s / (hop as f64 / fs)) as usize).clamp(1, n_frames);
    let mut initial = vec![0.0; half];
    for l in 0..init_frames {
        spectrum(l * hop, &mut buf);
        for (a, c) in initial.iter_mut().zip(&buf[..half]) {
            *a += c.norm_sqr() / init_frames as f64;
        }
    }
    let mut tracker = NoiseTracker::new(initial, window_frames);

    let mut out = vec![0.0; padded.len()];
    let mut prev_clean = vec![0.0; half];
    for l in 0..n_frames {
        let start = l * hop;
        spectrum(start, &mut buf);
        let power: Vec<f64> = buf[..half].iter().map(|c| c.norm_sqr()).collect();
        let t = &mut tracker;
        t.update(&power, cfg);
        for k in 0..half {
            let lambda = t.noise[k].max(eps);
            let gamma = power[k] / lambda;
            let xi = (cfg.dd_alpha * prev_clean[k] / lambda + (1.0 - cfg.dd_alpha) * (gamma - 1.0).max(0.0)).max(xi_min);
            let g = lsa_gain(xi, gamma).clamp(g_min, 1.0);
            prev_clean[k] = g * g * power[k];
            buf[k] *= g;
            if k > 0 && k < n - k {
                buf[n - k] *= g;
            }
        }
        plan.inverse(&mut buf);
        for i in 0..n {
            out[start + i] += buf[i].re * window[i];
        }
    }
    let y = out[hop..hop + x.len()].to_vec();
    SampledSignal::new(y, fs)
}

/// Segmental SNR in dB against a clean reference: mean of per-frame SNR
/// clamped to [-10, 35] dB over frames whose clean energy is within 40 dB
/// of the loudest frame.
pub fn segmental_snr_db(clean: &[f64], test: &[f64], frame_len: usize) -> Option<f64> {
    let n = clean.len().min(test.len());
    let frames: Vec<(f64, f64)> = (0..n / frame_len)
        .map(|f| {
            let r = f * frame_len..(f + 1) * frame_len;
            let s: f64 = clean[r.clone()].iter().map(|v| v * v).sum();
            let e: f64 = clean[r.clone()].iter().zip(&test[r]).map(|(a, b)| (a - b) * (a - b)).sum();
            (s, e)
        })
        .collect();
    let loudest = frames.iter().fold(0.0f64, |m, f| m.max(f.0));
    if loudest <= 0.0 {
        return None;
    }
    let snrs: Vec<f64> = frames
        .iter()
        .filter(|f| f.0 >= loudest * 1e-4)
        .map(|&(s, e)| (10.0 * libm::log10(s / e.max(1e-30))).clamp(-10.0, 35.0))
        .collect();
    Some(snrs.iter().sum::<f64>() / snrs.len() as f64)
}
