//! File formats: WAV audio and ECG records (CSV text or raw 16-bit with a
//! JSON side-car).

use std::io::Cursor;
use std::path::Path;

use fog_core::SampledSignal;
use serde::{Deserialize, Serialize};

use crate::error::{NodeError, Result};

/// ADC units per millivolt in stored ECG records.
pub const ECG_ADC_GAIN: f64 = 200.0;
/// ADC value of 0 mV.
pub const ECG_ADC_BASELINE: f64 = 1024.0;

/// Decodes PCM (8-32 bit integer or 32-bit float) WAV; channels are
/// averaged and integer samples scaled to [-1, 1).
pub fn decode_wav(bytes: &[u8]) -> Result<SampledSignal> {
    let mut reader = hound::WavReader::new(Cursor::new(bytes))?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader.samples::<f32>().map(|s| s.map(f64::from)).collect::<std::result::Result<_, _>>()?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / f64::from(1u32 << (spec.bits_per_sample.clamp(1, 32) - 1));
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) * scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let mono: Vec<f64> = interleaved.chunks_exact(channels).map(|c| c.iter().sum::<f64>() / channels as f64).collect();
    if mono.iter().any(|v| !v.is_finite()) {
        return Err(NodeError::input("wav contains non-finite samples"));
    }
    Ok(SampledSignal::new(mono, f64::from(spec.sample_rate))?)
}

pub fn read_wav(path: &Path) -> Result<SampledSignal> {
    decode_wav(&std::fs::read(path)?)
}

/// 16-bit mono PCM; samples are clipped to [-1, 1].
pub fn encode_wav(signal: &SampledSignal) -> Result<Vec<u8>> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate_hz().round() as u32,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::with_capacity(44 + 2 * signal.len()));
    {
        let mut w = hound::WavWriter::new(&mut buf, spec)?;
        for &v in signal.samples() {
            w.write_sample((v.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
        }
        w.finalize()?;
    }
    Ok(buf.into_inner())
}

pub fn write_wav(path: &Path, signal: &SampledSignal) -> Result<()> {
    std::fs::write(path, encode_wav(signal)?)?;
    Ok(())
}

/// Stored ECG scaling: `mV = (adc - baseline) / gain`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcgMeta {
    pub fs: f64,
    #[serde(default = "default_gain")]
    pub gain: f64,
    #[serde(default = "default_baseline")]
    pub baseline: f64,
}

fn default_gain() -> f64 {
    ECG_ADC_GAIN
}

fn default_baseline() -> f64 {
    ECG_ADC_BASELINE
}

impl EcgMeta {
    pub fn new(fs: f64) -> Self {
        EcgMeta { fs, gain: ECG_ADC_GAIN, baseline: ECG_ADC_BASELINE }
    }

    fn to_mv(self, adc: f64) -> f64 {
        (adc - self.baseline) / self.gain
    }

    fn to_adc(self, mv: f64) -> f64 {
        (mv * self.gain + self.baseline).round()
    }
}

/// CSV record: a header line `fs=<hz>` (optionally `,gain=<adu/mV>,baseline=<adu>`)
/// followed by one integer ADC sample per line.
pub fn encode_ecg_csv(signal: &SampledSignal) -> String {
    let meta = EcgMeta::new(signal.sample_rate_hz());
    let mut out = String::with_capacity(6 * signal.len() + 16);
    out.push_str(&format!("fs={}\n", meta.fs));
    for &v in signal.samples() {
        out.push_str(&format!("{}\n", meta.to_adc(v) as i64));
    }
    out
}

fn parse_header(line: &str) -> Result<EcgMeta> {
    let mut meta: Option<EcgMeta> = None;
    let mut gain = ECG_ADC_GAIN;
    let mut baseline = ECG_ADC_BASELINE;
    for field in line.split([',', ';', ' ']).filter(|f| !f.is_empty()) {
        let (k, v) = field.split_once('=').ok_or_else(|| NodeError::input(format!("bad ECG header field {field:?}")))?;
        let v: f64 = v.trim().parse().map_err(|_| NodeError::input(format!("bad ECG header value {field:?}")))?;
        match k.trim() {
            "fs" => meta = Some(EcgMeta::new(v)),
            "gain" => gain = v,
            "baseline" => baseline = v,
            other => return Err(NodeError::input(format!("unknown ECG header key {other:?}"))),
        }
    }
    let mut meta = meta.ok_or_else(|| NodeError::input("ECG header lacks fs="))?;
    if !(gain.is_finite() && gain != 0.0) {
        return Err(NodeError::input("ECG gain must be non-zero"));
    }
    meta.gain = gain;
    meta.baseline = baseline;
    Ok(meta)
}

pub fn decode_ecg_csv(bytes: &[u8]) -> Result<SampledSignal> {
    let text = std::str::from_utf8(bytes).map_err(|_| NodeError::input("ECG CSV is not UTF-8"))?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| NodeError::input("empty ECG record"))?;
    if !header.starts_with("fs=") {
        return Err(NodeError::input("ECG CSV must start with an fs=<hz> header"));
    }
    let meta = parse_header(header)?;
    let samples = lines
        .enumerate()
        .map(|(i, l)| {
            let first = l.split(',').next().unwrap_or(l).trim();
            first
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(|v| meta.to_mv(v))
                .ok_or_else(|| NodeError::input(format!("bad ECG sample on data line {}", i + 1)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SampledSignal::new(samples, meta.fs)?)
}

/// Raw little-endian i16 samples described by a side-car.
pub fn decode_ecg_raw(bytes: &[u8], meta: &EcgMeta) -> Result<SampledSignal> {
    if !bytes.len().is_multiple_of(2) {
        return Err(NodeError::input("raw ECG length is not a whole number of 16-bit samples"));
    }
    let samples = bytes.chunks_exact(2).map(|c| meta.to_mv(f64::from(i16::from_le_bytes([c[0], c[1]])))).collect();
    Ok(SampledSignal::new(samples, meta.fs)?)
}

pub fn encode_ecg_raw(signal: &SampledSignal) -> (Vec<u8>, EcgMeta) {
    let meta = EcgMeta::new(signal.sample_rate_hz());
    let bytes = signal
        .samples()
        .iter()
        .flat_map(|&v| (meta.to_adc(v).clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16).to_le_bytes())
        .collect();
    (bytes, meta)
}

/// Reads an ECG file: `.csv` directly, anything else as raw i16 with a
/// `<file>.json` side-car.
pub fn read_ecg(path: &Path) -> Result<SampledSignal> {
    let bytes = std::fs::read(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) || bytes.starts_with(b"fs=") {
        return decode_ecg_csv(&bytes);
    }
    let mut side = path.as_os_str().to_owned();
    side.push(".json");
    let meta_text = std::fs::read(&side).map_err(|e| NodeError::input(format!("raw ECG needs side-car {side:?}: {e}")))?;
    let meta: EcgMeta = serde_json::from_slice(&meta_text).map_err(|e| NodeError::input(format!("bad ECG side-car: {e}")))?;
    decode_ecg_raw(&bytes, &meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_round_trip_within_quantisation() {
        let x: Vec<f64> = (0..1000).map(|i| 0.5 * (i as f64 * 0.05).sin()).collect();
        let s = SampledSignal::new(x.clone(), 16_000.0).unwrap();
        let bytes = encode_wav(&s).unwrap();
        assert_eq!(bytes.len(), 44 + 2000);
        let back = decode_wav(&bytes).unwrap();
        assert_eq!(back.sample_rate_hz(), 16_000.0);
        for (a, b) in x.iter().zip(back.samples()) {
            assert!((a - b).abs() < 1.0 / 32768.0 + 1e-9);
        }
    }

    #[test]
    fn corrupt_wav_is_an_input_error() {
        assert!(matches!(decode_wav(b"RIFF\x00\x00garbage"), Err(NodeError::Input(_))));
    }

    #[test]
    fn ecg_csv_round_trip() {
        let s = SampledSignal::new(vec![0.0, 1.0, -0.5, 0.25], 360.0).unwrap();
        let text = encode_ecg_csv(&s);
        assert_eq!(text, "fs=360\n1024\n1224\n924\n1074\n");
        let back = decode_ecg_csv(text.as_bytes()).unwrap();
        assert_eq!(back.samples(), s.samples());
        let custom = decode_ecg_csv(b"fs=250,gain=100,baseline=0\n100\n-50\n").unwrap();
        assert_eq!((custom.sample_rate_hz(), custom.samples()), (250.0, &[1.0, -0.5][..]));
        assert!(decode_ecg_csv(b"1024\n1025\n").is_err());
        assert!(decode_ecg_csv(b"fs=360\n10x\n").is_err());
    }

    #[test]
    fn ecg_raw_round_trip() {
        let s = SampledSignal::new(vec![0.0, 2.0, -1.0], 360.0).unwrap();
        let (bytes, meta) = encode_ecg_raw(&s);
        assert_eq!(decode_ecg_raw(&bytes, &meta).unwrap().samples(), s.samples());
        assert!(decode_ecg_raw(&bytes[..5], &meta).is_err());
    }
}
