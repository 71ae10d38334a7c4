//! Synthetic recordings for demos, benchmarks and tests. Every file is a
//! pure function of its seed.

use std::fs;
use std::path::{Path, PathBuf};

use fog_core::synth::{self, EcgSynthConfig, PcgSynthConfig};

use crate::error::Result;
use crate::io::{encode_ecg_csv, encode_wav};
use crate::protocol::DataKind;

pub const SPEECH_RATE_HZ: f64 = 44_100.0;
pub const PCG_RATE_HZ: f64 = 800.0;
pub const ECG_RATE_HZ: f64 = 360.0;

/// Durations of the five-file latency set; they add up to 29.08 s.
pub const LATENCY_SET_S: [f64; 5] = [5.2, 5.5, 5.8, 6.2, 6.38];
/// S1 periods of the heart-sound set.
pub const PCG_PERIODS_S: [f64; 4] = [0.4, 0.6, 0.8, 1.0];
/// ECG record lengths; the CSVs land between 16 and 37 kB.
pub const ECG_DURATIONS_S: [f64; 3] = [10.0, 14.0, 20.0];

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusFile {
    pub name: String,
    pub kind: DataKind,
    pub task_id: String,
    pub bytes: Vec<u8>,
}

/// Speech WAV (44.1 kHz, 16-bit mono) of `duration_s` seconds.
pub fn speech_file(index: usize, duration_s: f64, seed: u64) -> Result<CorpusFile> {
    let task = format!("t{}", index % 7 + 1);
    let signal = synth::speech_recording(SPEECH_RATE_HZ, duration_s, seed);
    Ok(CorpusFile { name: format!("speech_{index:02}_{task}.wav"), kind: DataKind::Speech, task_id: task, bytes: encode_wav(&signal)? })
}

/// `n` speech files of 5 to 7 s.
pub fn speech_set(n: usize, seed: u64) -> Result<Vec<CorpusFile>> {
    (0..n).map(|i| speech_file(i, 5.0 + 2.0 * (i % 5) as f64 / 4.0, seed + i as u64)).collect()
}

/// Five speech files totalling about 29 s.
pub fn latency_set(seed: u64) -> Result<Vec<CorpusFile>> {
    LATENCY_SET_S.iter().enumerate().map(|(i, &d)| speech_file(i, d, seed + 100 + i as u64)).collect()
}

/// PCG WAV (800 Hz) with S1 period `period_s` at 20 dB SNR.
pub fn pcg_file(period_s: f64, seed: u64) -> Result<CorpusFile> {
    let p = synth::pcg(&PcgSynthConfig {
        sample_rate_hz: PCG_RATE_HZ,
        period_s,
        duration_s: 12.0,
        snr_db: Some(20.0),
        s2_amplitude: 0.5,
        seed,
    });
    let ms = (period_s * 1000.0).round() as u32;
    Ok(CorpusFile { name: format!("pcg_{ms:04}ms.wav"), kind: DataKind::Pcg, task_id: "pcg".into(), bytes: encode_wav(&p.signal)? })
}

/// ECG CSV at 360 Hz, 72 BPM with 2% RR jitter and light noise.
pub fn ecg_file(duration_s: f64, seed: u64) -> CorpusFile {
    let e = synth::ecg(&EcgSynthConfig {
        sample_rate_hz: ECG_RATE_HZ,
        duration_s,
        bpm: 72.0,
        rr_jitter: 0.02,
        snr_db: Some(ECG_SNR_DB),
        seed,
        ..Default::default()
    });
    CorpusFile {
        name: format!("ecg_{:02}s.csv", duration_s.round() as u32),
        kind: DataKind::Ecg,
        task_id: "ecg".into(),
        bytes: encode_ecg_csv(&e.signal).into_bytes(),
    }
}

/// Noise level of the ECG records; it sets how well they gzip.
pub const ECG_SNR_DB: f64 = 48.0;

/// The full demo corpus: ten speech files, the latency set, the PCG
/// periods and the ECG records.
pub fn demo_corpus(seed: u64) -> Result<Vec<CorpusFile>> {
    let mut out = speech_set(10, seed)?;
    for (i, mut f) in latency_set(seed)?.into_iter().enumerate() {
        f.name = format!("latency_{i}_{}.wav", f.task_id);
        out.push(f);
    }
    for (i, &t) in PCG_PERIODS_S.iter().enumerate() {
        out.push(pcg_file(t, seed + 200 + i as u64)?);
    }
    for (i, &d) in ECG_DURATIONS_S.iter().enumerate() {
        out.push(ecg_file(d, seed + 300 + i as u64));
    }
    Ok(out)
}

/// Writes `files` into `dir`, returning the paths.
pub fn write_files(dir: &Path, files: &[CorpusFile]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    files
        .iter()
        .map(|f| {
            let p = dir.join(&f.name);
            fs::write(&p, &f.bytes)?;
            Ok(p)
        })
        .collect()
}
