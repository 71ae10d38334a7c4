//! Data-reduction benchmark: feature extraction against gzip (and DTW
//! pattern indices for ECG), with timing and a storage projection.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use flate2::write::GzEncoder;
use flate2::Compression;
use fog_core::ecg::{dtw_pattern_mine, encode_occurrences, reduction_percent, synthetic_templates};
use fog_core::speech::TaskId;
use serde::{Deserialize, Serialize};

use crate::error::{NodeError, Result};
use crate::io::{decode_ecg_csv, decode_wav};
use crate::pool::map_ordered;
use crate::protocol::DataKind;
use crate::records::extract;

/// WAV files at or below this rate are treated as heart sounds.
pub const PCG_MAX_RATE_HZ: u32 = 2_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub file: String,
    pub kind: DataKind,
    pub raw_bytes: u64,
    pub feature_bytes: u64,
    pub zip_bytes: u64,
    /// Encoded DTW pattern index; ECG only.
    pub dtw_bytes: Option<u64>,
    pub feature_reduction_pct: f64,
    pub zip_reduction_pct: f64,
    pub dtw_reduction_pct: Option<f64>,
    pub processing_s: f64,
    pub media_s: f64,
    pub rtf: f64,
}

/// Raw and feature volume per patient-population per day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageProjection {
    pub kind: DataKind,
    pub patients: u32,
    pub minutes_per_day: f64,
    pub raw_bytes_per_s: f64,
    pub feature_bytes_per_s: f64,
    pub raw_gb_per_day: f64,
    pub feature_gb_per_day: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub totals: BenchRow,
    pub projection: Vec<StorageProjection>,
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchOptions {
    pub workers: usize,
    pub patients: u32,
    pub minutes_per_day: f64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { workers: 1, patients: 100, minutes_per_day: 23.0 }
    }
}

pub fn gzip_len(bytes: &[u8]) -> Result<u64> {
    let mut z = GzEncoder::new(Vec::new(), Compression::default());
    z.write_all(bytes)?;
    Ok(z.finish()?.len() as u64)
}

fn pct(raw: u64, out: u64) -> Result<f64> {
    Ok(reduction_percent(raw as usize, out as usize)?)
}

/// Kind from the extension, and for WAV from the sample rate.
pub fn infer_kind(path: &Path, bytes: &[u8]) -> Result<DataKind> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("csv") => Ok(DataKind::Ecg),
        Some("wav") => {
            let reader = hound::WavReader::new(bytes)?;
            Ok(if reader.spec().sample_rate <= PCG_MAX_RATE_HZ { DataKind::Pcg } else { DataKind::Speech })
        }
        _ => Err(NodeError::input(format!("{}: cannot tell the data kind", path.display()))),
    }
}

/// Speech task from a `_tN` token in the file name, else `t1`.
pub fn infer_task(path: &Path, kind: DataKind) -> String {
    if kind != DataKind::Speech {
        return kind.as_str().to_owned();
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    stem.split(['_', '-', '.'])
        .filter(|t| t.starts_with(['t', 'T']))
        .find_map(|t| t.parse::<TaskId>().ok())
        .unwrap_or(TaskId::T1)
        .as_str()
        .to_owned()
}

/// Benchmarks one file.
pub fn bench_file(name: &str, kind: DataKind, task_id: &str, bytes: &[u8]) -> Result<BenchRow> {
    let start = Instant::now();
    let payload = extract(kind, task_id, bytes)?;
    let feature_bytes = payload.to_json()?.len() as u64;
    let processing_s = start.elapsed().as_secs_f64();
    let raw_bytes = bytes.len() as u64;
    let zip_bytes = gzip_len(bytes)?;
    let (media_s, dtw_bytes) = match kind {
        DataKind::Speech | DataKind::Pcg => (decode_wav(bytes)?.duration_s(), None),
        DataKind::Ecg => {
            let signal = decode_ecg_csv(bytes)?;
            let templates = synthetic_templates(signal.sample_rate_hz())?;
            let index = encode_occurrences(&dtw_pattern_mine(&signal, &templates)?)?;
            (signal.duration_s(), Some(index.len() as u64))
        }
    };
    Ok(BenchRow {
        file: name.to_owned(),
        kind,
        raw_bytes,
        feature_bytes,
        zip_bytes,
        dtw_bytes,
        feature_reduction_pct: pct(raw_bytes, feature_bytes)?,
        zip_reduction_pct: pct(raw_bytes, zip_bytes)?,
        dtw_reduction_pct: dtw_bytes.map(|d| pct(raw_bytes, d)).transpose()?,
        processing_s,
        media_s,
        rtf: processing_s / media_s,
    })
}

/// Sums the rows; DTW columns are kept only when every row has them.
pub fn totals(rows: &[BenchRow]) -> Result<BenchRow> {
    let sum = |f: fn(&BenchRow) -> u64| rows.iter().map(f).sum::<u64>();
    let (raw_bytes, feature_bytes, zip_bytes) = (sum(|r| r.raw_bytes), sum(|r| r.feature_bytes), sum(|r| r.zip_bytes));
    let dtw_bytes = rows.iter().map(|r| r.dtw_bytes).sum::<Option<u64>>();
    let processing_s = rows.iter().map(|r| r.processing_s).sum::<f64>();
    let media_s = rows.iter().map(|r| r.media_s).sum::<f64>();
    let kind = rows.first().map_or(DataKind::Speech, |r| r.kind);
    Ok(BenchRow {
        file: "TOTAL".into(),
        kind,
        raw_bytes,
        feature_bytes,
        zip_bytes,
        dtw_bytes,
        feature_reduction_pct: pct(raw_bytes, feature_bytes)?,
        zip_reduction_pct: pct(raw_bytes, zip_bytes)?,
        dtw_reduction_pct: dtw_bytes.map(|d| pct(raw_bytes, d)).transpose()?,
        processing_s,
        media_s,
        rtf: processing_s / media_s,
    })
}

/// Daily volume for `patients` each recording `minutes_per_day`, from the
/// bytes-per-second rates seen in `rows`.
pub fn project_storage(rows: &[BenchRow], patients: u32, minutes_per_day: f64) -> Vec<StorageProjection> {
    DataKind::ALL
        .into_iter()
        .filter_map(|kind| {
            let of_kind: Vec<&BenchRow> = rows.iter().filter(|r| r.kind == kind).collect();
            let media: f64 = of_kind.iter().map(|r| r.media_s).sum();
            if of_kind.is_empty() || media <= 0.0 {
                return None;
            }
            let raw_bps = of_kind.iter().map(|r| r.raw_bytes as f64).sum::<f64>() / media;
            let feat_bps = of_kind.iter().map(|r| r.feature_bytes as f64).sum::<f64>() / media;
            let seconds = f64::from(patients) * minutes_per_day * 60.0;
            Some(StorageProjection {
                kind,
                patients,
                minutes_per_day,
                raw_bytes_per_s: raw_bps,
                feature_bytes_per_s: feat_bps,
                raw_gb_per_day: raw_bps * seconds / 1e9,
                feature_gb_per_day: feat_bps * seconds / 1e9,
            })
        })
        .collect()
}

/// Benchmarks every regular file in `dir` (sorted by name). Empty files
/// and files that cannot be classified are skipped with a warning; a
/// directory with nothing to benchmark is an error.
pub fn bench_dir(dir: &Path, opts: &BenchOptions) -> Result<BenchReport> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| NodeError::input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut skipped = Vec::new();
    let mut jobs = Vec::new();
    for path in paths {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let bytes = std::fs::read(&path)?;
        if bytes.is_empty() {
            log::warn!("skipping empty file {name}");
            skipped.push(name);
            continue;
        }
        match infer_kind(&path, &bytes) {
            Ok(kind) => jobs.push((name, kind, infer_task(&path, kind), bytes)),
            Err(e) => {
                log::warn!("skipping {name}: {e}");
                skipped.push(name);
            }
        }
    }
    if jobs.is_empty() {
        return Err(NodeError::input(format!("{}: no files to benchmark", dir.display())));
    }
    let rows = map_ordered(jobs, opts.workers, |(name, kind, task, bytes)| bench_file(&name, kind, &task, &bytes))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchReport {
        totals: totals(&rows)?,
        projection: project_storage(&rows, opts.patients, opts.minutes_per_day),
        rows,
        skipped,
    })
}

pub const CSV_HEADER: &str = "file,kind,raw_bytes,feature_bytes,zip_bytes,dtw_bytes,feature_reduction_pct,zip_reduction_pct,dtw_reduction_pct,processing_s,media_s,rtf";

fn csv_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl BenchReport {
    /// Per-file rows then the totals row. Floats use the shortest form that
    /// reads back to the same value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in self.rows.iter().chain(std::iter::once(&self.totals)) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.file,
                r.kind.as_str(),
                r.raw_bytes,
                r.feature_bytes,
                r.zip_bytes,
                csv_opt(r.dtw_bytes),
                r.feature_reduction_pct,
                r.zip_reduction_pct,
                csv_opt(r.dtw_reduction_pct),
                r.processing_s,
                r.media_s,
                r.rtf
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `<prefix>.csv` and `<prefix>.json`.
    pub fn write(&self, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
        let with_ext = |ext: &str| {
            let mut p = prefix.as_os_str().to_owned();
            p.push(ext);
            PathBuf::from(p)
        };
        let (csv, json) = (with_ext(".csv"), with_ext(".json"));
        if let Some(parent) = prefix.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&json, self.to_json()?)?;
        Ok((csv, json))
    }
}
