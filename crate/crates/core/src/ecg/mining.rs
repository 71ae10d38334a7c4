//! DTW template search for P, QRS and T waves, and the compact index
//! encoding that stands in for the raw record upstream.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::dtw::dtw_distance;
use crate::signal::SampledSignal;
use crate::synth::{self, EcgSynthConfig};
use crate::{Error, Result};

/// Match threshold as a fraction of the template's amplitude range.
pub const TAU_FRACTION: f64 = 0.06;
/// Windows whose amplitude range differs from the template's by more than
/// this factor are skipped before DTW.
pub const RANGE_GATE: f64 = 1.5;
/// Bytes per encoded occurrence: big-endian u32 template id, u32 offset.
pub const OCCURRENCE_BYTES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternTemplate {
    pub id: u32,
    pub name: String,
    pub samples: Vec<f64>,
}

impl PatternTemplate {
    pub fn new(id: u32, name: &str, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("template is empty"));
        }
        Ok(PatternTemplate {
            id,
            name: name.into(),
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn range(&self) -> f64 {
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    /// Copy with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        PatternTemplate {
            samples: self.samples.iter().map(|v| v * gain).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub template_id: u32,
    pub offset: usize,
}

/// Average P, QRS and T segments over the beats of a clean synthetic ECG at
/// `sample_rate_hz` (ids 0, 1, 2). Amplitudes are in mV.
pub fn synthetic_templates(sample_rate_hz: f64) -> Result<Vec<PatternTemplate>> {
    if !(sample_rate_hz > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let e = synth::ecg(&EcgSynthConfig {
        sample_rate_hz,
        duration_s: 10.0,
        ..Default::default()
    });
    let x = e.signal.samples();
    let average = |pick: fn(&synth::BeatMarks) -> (usize, usize)| -> Vec<f64> {
        let len = e.beats.iter().map(|b| pick(b).1 - pick(b).0).min().unwrap_or(0) + 1;
        let mut acc = alloc::vec![0.0; len];
        for b in &e.beats {
            let (lo, _) = pick(b);
            for (a, v) in acc.iter_mut().zip(&x[lo..lo + len]) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / e.beats.len() as f64).collect()
    };
    Ok(alloc::vec![
        PatternTemplate::new(0, "P", average(|b| b.p))?,
        PatternTemplate::new(1, "QRS", average(|b| b.qrs))?,
        PatternTemplate::new(2, "T", average(|b| b.t))?,
    ])
}

fn demeaned(x: &[f64]) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - m).collect()
}

/// Slide each template over the record with a stride of a quarter of its length and
/// report windows whose DTW distance per path step is below
/// `TAU_FRACTION * range`. Window and template are compared after removing
/// their means, so baseline offsets do not matter. Matches from all
/// templates then compete, best score relative to threshold first: a
/// window is dropped when half of it, or half of an already kept window,
/// lies in the overlap. A small P template thus cannot re-match the flanks
/// of a QRS or T wave.
///
/// Results are sorted by offset, then template id.
pub fn dtw_pattern_mine(record: &SampledSignal, templates: &[PatternTemplate]) -> Result<Vec<Occurrence>> {
    let x = record.samples();
    // (score relative to the template's threshold, offset, template index)
    let mut hits: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, t) in templates.iter().enumerate() {
        let len = t.len();
        if len == 0 {
            return Err(Error::invalid("template is empty"));
        }
        if len > x.len() {
            return Err(Error::invalid("template longer than record"));
        }
        let tau = TAU_FRACTION * t.range();
        let reference = demeaned(&t.samples);
        let stride = (len / 4).max(1);
        let mut start = 0;
        while start + len <= x.len() {
            let raw = &x[start..start + len];
            let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if hi - lo <= RANGE_GATE * t.range() && hi - lo >= t.range() / RANGE_GATE {
                let d = dtw_distance(&reference, &demeaned(raw))?.normalized_distance();
                if d < tau {
                    hits.push((d / tau, start, ti));
                }
            }
            start += stride;
        }
    }
    // Greedy suppression across templates, best relative score first.
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut claimed: Vec<(usize, usize)> = Vec::new();
    let mut found = Vec::new();
    for (_, offset, ti) in hits {
        let end = offset + templates[ti].len();
        let free = claimed.iter().all(|&(lo, hi)| {
            let overlap = end.min(hi).saturating_sub(offset.max(lo));
            2 * overlap < (end - offset).min(hi - lo)
        });
        if free {
            claimed.push((offset, end));
            found.push(Occurrence { template_id: templates[ti].id, offset });
        }
    }
    found.sort_by_key(|o| (o.offset, o.template_id));
    Ok(found)
}

pub fn encode_occurrences(occurrences: &[Occurrence]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(occurrences.len() * OCCURRENCE_BYTES);
    for o in occurrences {
        let offset = u32::try_from(o.offset).map_err(|_| Error::invalid("offset exceeds u32"))?;
        out.extend_from_slice(&o.template_id.to_be_bytes());
        out.extend_from_slice(&offset.to_be_bytes());
    }
    Ok(out)
}

pub fn decode_occurrences(bytes: &[u8]) -> Result<Vec<Occurrence>> {
    if !bytes.len().is_multiple_of(OCCURRENCE_BYTES) {
        return Err(Error::invalid("occurrence stream length is not a multiple of 8"));
    }
    Ok(bytes
        .chunks_exact(OCCURRENCE_BYTES)
        .map(|c| Occurrence {
            template_id: u32::from_be_bytes([c[0], c[1], c[2], c[3]]),
            offset: u32::from_be_bytes([c[4], c[5], c[6], c[7]]) as usize,
        })
        .collect())
}

/// `100 * (1 - out / in)`.
pub fn reduction_percent(in_bytes: usize, out_bytes: usize) -> Result<f64> {
    if in_bytes == 0 {
        return Err(Error::invalid("input is empty"));
    }
    Ok(100.0 * (1.0 - out_bytes as f64 / in_bytes as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub raw_bytes: usize,
    pub dtw_bytes: usize,
    pub zip_bytes: usize,
    pub dtw_reduction_pct: f64,
    pub zip_reduction_pct: f64,
}

pub fn reduction_report(raw_bytes: usize, dtw_bytes: usize, zip_bytes: usize) -> Result<ReductionReport> {
    Ok(ReductionReport {
        raw_bytes,
        dtw_bytes,
        zip_bytes,
        dtw_reduction_pct: reduction_percent(raw_bytes, dtw_bytes)?,
        zip_reduction_pct: reduction_percent(raw_bytes, zip_bytes)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn templates_have_expected_shapes() {
        let t = synthetic_templates(360.0).unwrap();
        assert_eq!(t.iter().map(|t| t.name.as_str()).collect::<Vec<_>>(), ["P", "QRS", "T"]);
        assert!((t[1].range() - 1.1).abs() < 0.2);
        assert!(t[0].len() < t[2].len());
    }

    #[test]
    fn repeated_template_found_at_offsets() {
        let tpl = synthetic_templates(200.0).unwrap().remove(1);
        let gap = 47;
        let mut x = vec![0.0; 13];
        let mut offsets = Vec::new();
        for _ in 0..10 {
            offsets.push(x.len());
            x.extend_from_slice(&tpl.samples);
            x.extend(core::iter::repeat_n(0.0, gap));
        }
        let rec = SampledSignal::new(x, 200.0).unwrap();
        let occ = dtw_pattern_mine(&rec, core::slice::from_ref(&tpl)).unwrap();
        assert_eq!(occ.len(), 10, "{occ:?}");
        let stride = tpl.len() / 2;
        for (o, &want) in occ.iter().zip(&offsets) {
            assert!(o.offset.abs_diff(want) <= stride);
        }
    }

    #[test]
    fn noise_has_no_occurrences() {
        let templates = synthetic_templates(200.0).unwrap();
        let noise = synth::white_noise(4000, 1.0, 99);
        let rec = SampledSignal::new(noise, 200.0).unwrap();
        assert!(dtw_pattern_mine(&rec, &templates).unwrap().is_empty());
    }

    #[test]
    fn whole_record_template() {
        let tpl = synthetic_templates(200.0).unwrap().remove(2);
        let rec = SampledSignal::new(tpl.samples.clone(), 200.0).unwrap();
        let occ = dtw_pattern_mine(&rec, core::slice::from_ref(&tpl)).unwrap();
        assert_eq!(occ, vec![Occurrence { template_id: 2, offset: 0 }]);
    }

    #[test]
    fn template_longer_than_record() {
        let tpl = PatternTemplate::new(0, "x", vec![0.0; 10]).unwrap();
        let rec = SampledSignal::new(vec![0.0; 9], 200.0).unwrap();
        assert!(dtw_pattern_mine(&rec, &[tpl]).is_err());
    }

    #[test]
    fn synthetic_ecg_finds_every_wave() {
        let e = synth::ecg(&EcgSynthConfig { snr_db: Some(25.0), duration_s: 10.0, ..Default::default() });
        let templates = synthetic_templates(200.0).unwrap();
        let occ = dtw_pattern_mine(&e.signal, &templates).unwrap();
        for (id, pick) in [(0u32, 0usize), (1, 1), (2, 2)] {
            let hits: Vec<_> = occ.iter().filter(|o| o.template_id == id).collect();
            assert_eq!(hits.len(), e.beats.len(), "template {id}");
            for b in &e.beats {
                let start = [b.p.0, b.qrs.0, b.t.0][pick];
                assert!(hits.iter().any(|o| o.offset.abs_diff(start) <= templates[pick].len() / 2));
            }
        }
    }

    #[test]
    fn encoding_round_trip() {
        let occ = vec![Occurrence { template_id: 1, offset: 300 }, Occurrence { template_id: 2, offset: 70_000 }];
        let bytes = encode_occurrences(&occ).unwrap();
        assert_eq!(bytes.len(), 16);
        assert_eq!(&bytes[..8], &[0, 0, 0, 1, 0, 0, 1, 44]);
        assert_eq!(decode_occurrences(&bytes).unwrap(), occ);
        assert!(decode_occurrences(&bytes[..7]).is_err());
    }

    #[test]
    fn reduction_arithmetic() {
        assert!((reduction_percent(30_000, 300).unwrap() - 99.0).abs() < 1e-12);
        assert!(reduction_percent(0, 0).is_err());
        let r = reduction_report(1000, 10, 90).unwrap();
        assert!((r.dtw_reduction_pct - 99.0).abs() < 1e-12);
        assert!((r.zip_reduction_pct - 91.0).abs() < 1e-12);
    }
}
