//! Upload framing, big-endian:
//!
//! ```text
//! "FOG1" | kind u8 | patient_len u8 | patient | task_len u8 | task | payload_len u64 | payload | sha256[32]
//! ```
//!
//! The server answers with a single status byte and closes the connection.

use std::fmt;
use std::io::{self, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::NodeError;

pub const MAGIC: &[u8; 4] = b"FOG1";
/// Uploads larger than this are refused as malformed.
pub const DEFAULT_MAX_PAYLOAD: u64 = 256 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Speech,
    Pcg,
    Ecg,
}

impl DataKind {
    pub const ALL: [DataKind; 3] = [DataKind::Speech, DataKind::Pcg, DataKind::Ecg];

    pub fn code(self) -> u8 {
        match self {
            DataKind::Speech => 1,
            DataKind::Pcg => 2,
            DataKind::Ecg => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        DataKind::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DataKind::Speech => "speech",
            DataKind::Pcg => "pcg",
            DataKind::Ecg => "ecg",
        }
    }

    /// Extension used for the stored raw file.
    pub fn extension(self) -> &'static str {
        match self {
            DataKind::Speech | DataKind::Pcg => "wav",
            DataKind::Ecg => "csv",
        }
    }
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataKind {
    type Err = NodeError;

    fn from_str(s: &str) -> Result<Self, NodeError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "speech" => Ok(DataKind::Speech),
            "pcg" => Ok(DataKind::Pcg),
            "ecg" => Ok(DataKind::Ecg),
            other => Err(NodeError::input(format!("unknown data kind {other:?} (speech, pcg, ecg)"))),
        }
    }
}

/// Server reply byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reply {
    Ok = 0,
    ChecksumFail = 1,
    Malformed = 2,
}

impl Reply {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Reply::Ok),
            1 => Some(Reply::ChecksumFail),
            2 => Some(Reply::Malformed),
            _ => None,
        }
    }
}

/// One decoded upload. `kind_code` is kept raw: unknown kinds are
/// accepted at the wire level and fail at dispatch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Upload {
    pub kind_code: u8,
    pub patient_id: String,
    pub task_id: String,
    pub payload: Vec<u8>,
    pub sha256: [u8; 32],
}

impl Upload {
    pub fn new(kind: DataKind, patient_id: &str, task_id: &str, payload: Vec<u8>) -> Self {
        let sha256 = Sha256::digest(&payload).into();
        Upload {
            kind_code: kind.code(),
            patient_id: patient_id.to_owned(),
            task_id: task_id.to_owned(),
            payload,
            sha256,
        }
    }

    pub fn kind(&self) -> Option<DataKind> {
        DataKind::from_code(self.kind_code)
    }

    pub fn sha256_hex(&self) -> String {
        hex::encode(self.sha256)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("malformed upload: {0}")]
    Malformed(String),
    #[error("payload checksum mismatch")]
    Checksum,
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl FrameError {
    pub fn reply(&self) -> Option<Reply> {
        match self {
            FrameError::Malformed(_) => Some(Reply::Malformed),
            FrameError::Checksum => Some(Reply::ChecksumFail),
            FrameError::Io(_) => None,
        }
    }
}

/// Identifiers end up in file names, so they are restricted to
/// `[A-Za-z0-9_-]`, 1-64 bytes.
pub fn valid_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

pub fn write_upload<W: Write>(w: &mut W, upload: &Upload) -> io::Result<()> {
    let too_long = |what: &str| io::Error::new(io::ErrorKind::InvalidInput, format!("{what} longer than 255 bytes"));
    let patient = upload.patient_id.as_bytes();
    let task = upload.task_id.as_bytes();
    let mut head = Vec::with_capacity(16 + patient.len() + task.len());
    head.extend_from_slice(MAGIC);
    head.push(upload.kind_code);
    head.push(u8::try_from(patient.len()).map_err(|_| too_long("patient id"))?);
    head.extend_from_slice(patient);
    head.push(u8::try_from(task.len()).map_err(|_| too_long("task id"))?);
    head.extend_from_slice(task);
    head.extend_from_slice(&(upload.payload.len() as u64).to_be_bytes());
    w.write_all(&head)?;
    w.write_all(&upload.payload)?;
    w.write_all(&upload.sha256)?;
    w.flush()
}

pub fn encode_upload(upload: &Upload) -> io::Result<Vec<u8>> {
    let mut out = Vec::with_capacity(upload.payload.len() + 64);
    write_upload(&mut out, upload)?;
    Ok(out)
}

fn read_exact_or_malformed<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), FrameError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FrameError::Malformed(format!("stream ended inside {what}")),
        _ => FrameError::Io(e),
    })
}

fn read_id<R: Read>(r: &mut R, what: &str) -> Result<String, FrameError> {
    let mut len = [0u8; 1];
    read_exact_or_malformed(r, &mut len, what)?;
    let mut buf = vec![0u8; len[0] as usize];
    read_exact_or_malformed(r, &mut buf, what)?;
    let id = String::from_utf8(buf).map_err(|_| FrameError::Malformed(format!("{what} is not UTF-8")))?;
    if !valid_id(&id) {
        return Err(FrameError::Malformed(format!("{what} {id:?} has characters outside [A-Za-z0-9_-]")));
    }
    Ok(id)
}

/// Reads one framed upload and verifies its digest.
pub fn read_upload<R: Read>(r: &mut R, max_payload: u64) -> Result<Upload, FrameError> {
    let mut magic = [0u8; 4];
    read_exact_or_malformed(r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(FrameError::Malformed("bad magic".into()));
    }
    let mut kind = [0u8; 1];
    read_exact_or_malformed(r, &mut kind, "kind")?;
    let patient_id = read_id(r, "patient id")?;
    let task_id = read_id(r, "task id")?;
    let mut len = [0u8; 8];
    read_exact_or_malformed(r, &mut len, "payload length")?;
    let len = u64::from_be_bytes(len);
    if len > max_payload {
        return Err(FrameError::Malformed(format!("payload of {len} bytes exceeds the {max_payload} byte limit")));
    }
    let mut payload = Vec::with_capacity(len.min(1 << 24) as usize);
    let got = r.by_ref().take(len).read_to_end(&mut payload)?;
    if got as u64 != len {
        return Err(FrameError::Malformed(format!("payload truncated at {got} of {len} bytes")));
    }
    let mut sha256 = [0u8; 32];
    read_exact_or_malformed(r, &mut sha256, "checksum")?;
    if Sha256::digest(&payload).as_slice() != sha256 {
        return Err(FrameError::Checksum);
    }
    Ok(Upload { kind_code: kind[0], patient_id, task_id, payload, sha256 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Upload {
        Upload::new(DataKind::Speech, "p001", "t1", b"RIFF....WAVEfmt ".to_vec())
    }

    #[test]
    fn round_trip() {
        let up = sample();
        let bytes = encode_upload(&up).unwrap();
        assert_eq!(&bytes[..5], b"FOG1\x01");
        assert_eq!(bytes.len(), 4 + 1 + 1 + 4 + 1 + 2 + 8 + up.payload.len() + 32);
        assert_eq!(read_upload(&mut bytes.as_slice(), DEFAULT_MAX_PAYLOAD).unwrap(), up);
    }

    #[test]
    fn flipped_payload_byte_fails_checksum() {
        let mut bytes = encode_upload(&sample()).unwrap();
        bytes[25] ^= 0x01;
        assert!(matches!(read_upload(&mut bytes.as_slice(), DEFAULT_MAX_PAYLOAD), Err(FrameError::Checksum)));
    }

    #[test]
    fn malformed_frames() {
        let good = encode_upload(&sample()).unwrap();
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        let truncated = &good[..good.len() - 10];
        let mut bad_id = good.clone();
        bad_id[7] = b'/';
        for frame in [&bad_magic[..], truncated, &bad_id[..], b"FOG"] {
            let err = read_upload(&mut &frame[..], DEFAULT_MAX_PAYLOAD).unwrap_err();
            assert_eq!(err.reply(), Some(Reply::Malformed), "{err}");
        }
        assert_eq!(read_upload(&mut good.as_slice(), 4).unwrap_err().reply(), Some(Reply::Malformed));
    }

    #[test]
    fn unknown_kind_is_carried_through() {
        let mut up = sample();
        up.kind_code = 9;
        let bytes = encode_upload(&up).unwrap();
        let back = read_upload(&mut bytes.as_slice(), DEFAULT_MAX_PAYLOAD).unwrap();
        assert_eq!(back.kind(), None);
    }

    #[test]
    fn kinds_parse() {
        for k in DataKind::ALL {
            assert_eq!(k.as_str().parse::<DataKind>().unwrap(), k);
            assert_eq!(DataKind::from_code(k.code()), Some(k));
        }
        assert!("eeg".parse::<DataKind>().is_err());
    }
}
