//! Feature records: the compact analytics that replace raw files upstream.

use chrono::{DateTime, Utc};
use fog_core::ecg::{EcgRecord, QrsAnnotations};
use fog_core::pcg::{estimate_heart_rate, HeartRateSeries};
use fog_core::speech::{extract_speech_features, SpeechFeatureSet, TaskId};
use serde::{Deserialize, Serialize};

use crate::error::{NodeError, Result};
use crate::io::{decode_ecg_csv, decode_wav};
use crate::protocol::DataKind;

/// Pipeline output, tagged by data kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "lowercase")]
pub enum FeaturePayload {
    Speech(SpeechFeatureSet),
    Pcg(HeartRateSeries),
    Ecg(QrsAnnotations),
}

impl FeaturePayload {
    pub fn kind(&self) -> DataKind {
        match self {
            FeaturePayload::Speech(_) => DataKind::Speech,
            FeaturePayload::Pcg(_) => DataKind::Pcg,
            FeaturePayload::Ecg(_) => DataKind::Ecg,
        }
    }

    /// Canonical serialisation; the service stores and syncs exactly these
    /// bytes inside the record, and `fog process` prints them.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Identity of the ingested file a record was derived from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRef {
    pub manifest_id: i64,
    pub patient_id: String,
    pub task_id: String,
    pub sha256: String,
    pub received_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub manifest: ManifestRef,
    pub produced_at: DateTime<Utc>,
    #[serde(flatten)]
    pub payload: FeaturePayload,
}

impl FeatureRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Runs the pipeline for `kind` on raw file bytes.
pub fn extract(kind: DataKind, task_id: &str, bytes: &[u8]) -> Result<FeaturePayload> {
    match kind {
        DataKind::Speech => {
            let task: TaskId = task_id.parse().map_err(|_| NodeError::input(format!("speech task id {task_id:?} is not t1..t7")))?;
            let signal = decode_wav(bytes)?;
            Ok(FeaturePayload::Speech(extract_speech_features(&signal, task)))
        }
        DataKind::Pcg => {
            let signal = decode_wav(bytes)?;
            Ok(FeaturePayload::Pcg(estimate_heart_rate(&signal)?))
        }
        DataKind::Ecg => {
            let record = EcgRecord::new(decode_ecg_csv(bytes)?)?;
            Ok(FeaturePayload::Ecg(record.detect_qrs()?))
        }
    }
}
