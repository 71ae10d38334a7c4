//! Plot-ready series: tidy `date,patient,metric,value` rows from the
//! feature store or from a bench report. Rendering is left to external
//! tools.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};

use crate::bench::BenchReport;
use crate::error::{NodeError, Result};
use crate::records::{FeaturePayload, FeatureRecord};

pub const CSV_HEADER: &str = "date,patient,metric,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Loudness,
    F0Mean,
    F0Std,
    Jitter,
    Fmod,
    Frange,
    Hnr,
    SpectralCentroid,
    SpectralFlux,
    SpectralEntropy,
    SpectralFlatness,
    Sharpness,
    SpeechRate,
    ArticulationRate,
    Phonation,
    HeartRate,
    RrMean,
    QrsDuration,
    FeatureReduction,
    ZipReduction,
    DtwReduction,
}

const NAMES: [(Metric, &str); 21] = [
    (Metric::Loudness, "loudness_phon"),
    (Metric::F0Mean, "f0_mean_hz"),
    (Metric::F0Std, "f0_std_hz"),
    (Metric::Jitter, "jitter_ms"),
    (Metric::Fmod, "fmod"),
    (Metric::Frange, "frange_hz"),
    (Metric::Hnr, "hnr_db"),
    (Metric::SpectralCentroid, "spectral_centroid_hz"),
    (Metric::SpectralFlux, "spectral_flux"),
    (Metric::SpectralEntropy, "spectral_entropy"),
    (Metric::SpectralFlatness, "spectral_flatness"),
    (Metric::Sharpness, "sharpness_acum"),
    (Metric::SpeechRate, "speech_rate_syll_per_s"),
    (Metric::ArticulationRate, "articulation_rate_syll_per_s"),
    (Metric::Phonation, "phonation_s"),
    (Metric::HeartRate, "heart_rate_bpm"),
    (Metric::RrMean, "rr_mean_s"),
    (Metric::QrsDuration, "qrs_mean_ms"),
    (Metric::FeatureReduction, "feature_reduction_pct"),
    (Metric::ZipReduction, "zip_reduction_pct"),
    (Metric::DtwReduction, "dtw_reduction_pct"),
];

impl Metric {
    pub fn all() -> impl Iterator<Item = Metric> {
        NAMES.iter().map(|(m, _)| *m)
    }

    pub fn name(self) -> &'static str {
        NAMES.iter().find(|(m, _)| *m == self).map_or("", |(_, n)| n)
    }

    /// Whether the metric comes from a bench report rather than the store.
    pub fn is_reduction(self) -> bool {
        matches!(self, Metric::FeatureReduction | Metric::ZipReduction | Metric::DtwReduction)
    }

    /// The metric's value in one record, if it has one.
    pub fn value(self, payload: &FeaturePayload) -> Option<f64> {
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        match payload {
            FeaturePayload::Speech(s) => match self {
                Metric::Loudness => s.loudness_phon,
                Metric::F0Mean => s.f0_mean_hz,
                Metric::F0Std => s.f0_std_hz,
                Metric::Jitter => s.jitter_ms,
                Metric::Fmod => s.fmod,
                Metric::Frange => s.frange_hz,
                Metric::Hnr => s.hnr_db,
                Metric::SpectralCentroid => s.spectral_centroid_hz,
                Metric::SpectralFlux => s.spectral_flux,
                Metric::SpectralEntropy => s.spectral_entropy,
                Metric::SpectralFlatness => s.spectral_flatness,
                Metric::Sharpness => s.sharpness_acum,
                Metric::SpeechRate => s.speech_rate_syll_per_s,
                Metric::ArticulationRate => s.articulation_rate_syll_per_s,
                Metric::Phonation => Some(s.phonation_s),
                _ => None,
            },
            FeaturePayload::Pcg(hr) => match self {
                Metric::HeartRate => hr.median_bpm(),
                _ => None,
            },
            FeaturePayload::Ecg(q) => match self {
                Metric::HeartRate => q.mean_rr_s().filter(|rr| *rr > 0.0).map(|rr| 60.0 / rr),
                Metric::RrMean => q.mean_rr_s(),
                Metric::QrsDuration => mean(&q.qrs_ms),
                _ => None,
            },
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = NodeError;

    fn from_str(s: &str) -> Result<Self> {
        NAMES.iter().find(|(_, n)| *n == s.trim()).map(|(m, _)| *m).ok_or_else(|| {
            let valid: Vec<&str> = NAMES.iter().map(|(_, n)| *n).collect();
            NodeError::input(format!("unknown metric {s:?}; valid metrics: {}", valid.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    /// Empty for bench-report rows, which have no date.
    pub date: Option<NaiveDate>,
    /// Patient id, or the file name for bench-report rows.
    pub patient: String,
    pub metric: Metric,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bucket {
    #[default]
    Day,
    /// ISO week, dated by its Monday.
    Week,
}

fn bucket_date(d: NaiveDate, bucket: Bucket) -> NaiveDate {
    match bucket {
        Bucket::Day => d,
        Bucket::Week => d - Duration::days(i64::from(d.weekday().num_days_from_monday())),
    }
}

/// Mean of `metric` per date bucket and patient, ordered by date then
/// patient. Records without the metric are left out.
pub fn series(records: &[FeatureRecord], metric: Metric, bucket: Bucket) -> Vec<PlotRow> {
    let mut acc: BTreeMap<(NaiveDate, String), (f64, usize)> = BTreeMap::new();
    for r in records {
        if let Some(v) = metric.value(&r.payload).filter(|v| v.is_finite()) {
            let key = (bucket_date(r.manifest.received_at.date_naive(), bucket), r.manifest.patient_id.clone());
            let e = acc.entry(key).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|((date, patient), (sum, n))| PlotRow { date: Some(date), patient, metric, value: sum / n as f64 })
        .collect()
}

/// One row per benchmarked file for a reduction metric.
pub fn reduction_rows(report: &BenchReport, metric: Metric) -> Result<Vec<PlotRow>> {
    if !metric.is_reduction() {
        return Err(NodeError::input(format!("{metric} is not in bench reports")));
    }
    Ok(report
        .rows
        .iter()
        .filter_map(|r| {
            let v = match metric {
                Metric::FeatureReduction => Some(r.feature_reduction_pct),
                Metric::ZipReduction => Some(r.zip_reduction_pct),
                _ => r.dtw_reduction_pct,
            };
            v.map(|value| PlotRow { date: None, patient: r.file.clone(), metric, value })
        })
        .collect())
}

pub fn to_csv(rows: &[PlotRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let date = r.date.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default();
        out.push_str(&format!("{date},{},{},{}\n", r.patient, r.metric, r.value));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::ManifestRef;
    use chrono::{DateTime, TimeZone, Utc};
    use fog_core::speech::{SpeechFeatureSet, TaskId};

    fn record(patient: &str, at: DateTime<Utc>, jitter: Option<f64>) -> FeatureRecord {
        let mut s = SpeechFeatureSet::empty(TaskId::T1);
        s.jitter_ms = jitter;
        FeatureRecord {
            manifest: ManifestRef { manifest_id: 1, patient_id: patient.into(), task_id: "t1".into(), sha256: String::new(), received_at: at },
            produced_at: at,
            payload: FeaturePayload::Speech(s),
        }
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::all() {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        let err = "pitch".parse::<Metric>().unwrap_err().to_string();
        assert!(err.contains("jitter_ms") && err.contains("heart_rate_bpm"), "{err}");
    }

    #[test]
    fn weekly_means() {
        // 2026-10-12 is a Monday.
        let day = |d: u32| Utc.with_ymd_and_hms(2026, 10, d, 9, 0, 0).unwrap();
        let recs = vec![
            record("p2", day(13), Some(0.4)),
            record("p1", day(12), Some(0.2)),
            record("p1", day(18), Some(0.4)),
            record("p1", day(19), Some(1.0)),
            record("p1", day(20), None),
        ];
        let rows = series(&recs, Metric::Jitter, Bucket::Week);
        let csv = to_csv(&rows);
        assert_eq!(
            csv,
            "date,patient,metric,value\n2026-10-12,p1,jitter_ms,0.30000000000000004\n2026-10-12,p2,jitter_ms,0.4\n2026-10-19,p1,jitter_ms,1\n"
        );
        assert_eq!(series(&recs, Metric::Jitter, Bucket::Day).len(), 4);
        assert_eq!(to_csv(&series(&[], Metric::Jitter, Bucket::Day)), "date,patient,metric,value\n");
    }
}
