//! ECG analytics: Pan-Tompkins QRS detection, RR intervals, DTW distance
//! and DTW-based P/QRS/T pattern mining.

mod dtw;
mod mining;
mod pan_tompkins;

pub use dtw::{dtw_cost, dtw_distance, euclidean_distance, DtwResult};
pub use mining::{
    decode_occurrences, dtw_pattern_mine, encode_occurrences, reduction_percent, reduction_report, synthetic_templates,
    Occurrence, PatternTemplate, ReductionReport, OCCURRENCE_BYTES, TAU_FRACTION,
};
pub use pan_tompkins::{
    detect_qrs, pt_bandpass, pt_derivative_square_integrate, pt_detect, pt_stages, qrs_durations_ms, PtStages, BANDPASS_DELAY,
    CANONICAL_RATE_HZ, INTEGRATION_WINDOW, WIDE_QRS_MS,
};

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::signal::{resample_rational, SampledSignal};
use crate::{Error, Result};

/// An ECG recording at one of the accepted rates.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    signal: SampledSignal,
}

impl EcgRecord {
    pub fn new(signal: SampledSignal) -> Result<Self> {
        let fs = signal.sample_rate_hz();
        if ![200.0, 250.0, 360.0].iter().any(|r| (r - fs).abs() < 1e-9) {
            return Err(Error::invalid("ECG sample rate must be 200, 250 or 360 Hz"));
        }
        Ok(EcgRecord { signal })
    }

    pub fn signal(&self) -> &SampledSignal {
        &self.signal
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.signal.sample_rate_hz()
    }

    /// The record at 200 Hz (360 Hz by 5/9, 250 Hz by 4/5).
    pub fn canonical(&self) -> Result<SampledSignal> {
        let fs = self.sample_rate_hz();
        if (fs - CANONICAL_RATE_HZ).abs() < 1e-9 {
            return Ok(self.signal.clone());
        }
        let (up, down) = if (fs - 360.0).abs() < 1e-9 { (5, 9) } else { (4, 5) };
        resample_rational(&self.signal, up, down)
    }

    /// Pan-Tompkins on the canonical-rate signal, with R-peak indices mapped
    /// back to this record's sample rate.
    pub fn detect_qrs(&self) -> Result<QrsAnnotations> {
        let canonical = self.canonical()?;
        let mut ann = detect_qrs(&canonical)?;
        let ratio = self.sample_rate_hz() / CANONICAL_RATE_HZ;
        if (ratio - 1.0).abs() > 1e-12 {
            let last = self.signal.len().saturating_sub(1);
            for r in ann.r_peaks.iter_mut() {
                *r = (libm::round(*r as f64 * ratio) as usize).min(last);
            }
            ann.sample_rate_hz = self.sample_rate_hz();
        }
        Ok(ann)
    }
}

/// Detected beats with derived intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrsAnnotations {
    /// Rate the `r_peaks` indices refer to.
    pub sample_rate_hz: f64,
    pub r_peaks: Vec<usize>,
    pub rr_s: Vec<f64>,
    pub qrs_ms: Vec<f64>,
    #[serde(rename = "wide")]
    pub wide_qrs: Vec<bool>,
}

impl QrsAnnotations {
    pub fn from_peaks(r_peaks: Vec<usize>, qrs_ms: Vec<f64>, sample_rate_hz: f64) -> Self {
        let rr_s = r_peaks
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64 / sample_rate_hz)
            .collect();
        let wide_qrs = qrs_ms.iter().map(|&d| d > WIDE_QRS_MS).collect();
        QrsAnnotations {
            sample_rate_hz,
            r_peaks,
            rr_s,
            qrs_ms,
            wide_qrs,
        }
    }

    pub fn mean_rr_s(&self) -> Option<f64> {
        if self.rr_s.is_empty() {
            None
        } else {
            Some(self.rr_s.iter().sum::<f64>() / self.rr_s.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{ecg, EcgSynthConfig};

    #[test]
    fn rate_validation() {
        let s = SampledSignal::new(alloc::vec![0.0; 10], 500.0).unwrap();
        assert!(EcgRecord::new(s).is_err());
    }

    #[test]
    fn detects_at_360_and_250_hz() {
        for fs in [360.0, 250.0] {
            let e = ecg(&EcgSynthConfig { sample_rate_hz: fs, snr_db: Some(20.0), ..Default::default() });
            let ann = EcgRecord::new(e.signal.clone()).unwrap().detect_qrs().unwrap();
            assert_eq!(ann.sample_rate_hz, fs);
            assert_eq!(ann.r_peaks.len(), e.beats.len());
            let tol = (0.02 * fs) as usize;
            for (d, t) in ann.r_peaks.iter().zip(e.r_peaks()) {
                assert!(d.abs_diff(t) <= tol, "{fs}: {d} vs {t}");
            }
            assert!(ann.rr_s.iter().all(|rr| (rr - 1.0).abs() <= 0.02));
        }
    }

    #[test]
    fn derived_intervals() {
        let ann = QrsAnnotations::from_peaks(alloc::vec![100, 300], alloc::vec![90.0, 130.0], 200.0);
        assert_eq!(ann.rr_s, alloc::vec![1.0]);
        assert_eq!(ann.wide_qrs, alloc::vec![false, true]);
        assert_eq!(ann.mean_rr_s(), Some(1.0));
    }
}
