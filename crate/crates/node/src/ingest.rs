//! Persisting uploads: timestamped names, atomic placement and start-up
//! recovery.
//!
//! An upload is written to `tmp/`, fsynced, renamed into `raw/` and only
//! then recorded as a manifest; the client is acknowledged after the
//! manifest commits. A crash before the commit leaves at most an orphan
//! file, which [`Ingestor::recover`] removes (the client never got an
//! acknowledgement, so nothing is lost).

use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};

use crate::error::{NodeError, Result};
use crate::faults::{CrashPoint, Faults};
use crate::protocol::{read_upload, DataKind, Reply, Upload, DEFAULT_MAX_PAYLOAD};
use crate::store::{to_millis, Manifest, NewManifest, Status, Store};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataDirs {
    pub root: PathBuf,
    pub raw: PathBuf,
    pub tmp: PathBuf,
}

impl DataDirs {
    pub fn create(root: &Path) -> Result<Self> {
        let dirs = DataDirs { root: root.to_owned(), raw: root.join("raw"), tmp: root.join("tmp") };
        fs::create_dir_all(&dirs.raw)?;
        fs::create_dir_all(&dirs.tmp)?;
        Ok(dirs)
    }

    pub fn raw_path(&self, m: &Manifest) -> PathBuf {
        self.raw.join(&m.stored_name)
    }
}

/// `<patient>_<task>_<UTC timestamp>.<ext>`, e.g.
/// `p001_t1_20261014T093012.345Z.wav`.
pub fn stored_name(patient_id: &str, task_id: &str, kind_code: u8, at: DateTime<Utc>) -> String {
    let ext = DataKind::from_code(kind_code).map_or("bin", DataKind::extension);
    format!("{patient_id}_{task_id}_{}.{ext}", at.format("%Y%m%dT%H%M%S%.3fZ"))
}

fn sync_dir(dir: &Path) -> Result<()> {
    File::open(dir)?.sync_all()?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecoveryReport {
    pub temp_files_removed: usize,
    pub orphans_removed: usize,
    pub missing_raw_failed: usize,
}

pub struct Ingestor {
    store: Arc<Store>,
    dirs: DataDirs,
    faults: Faults,
    max_payload: u64,
    placement: Mutex<()>,
}

impl Ingestor {
    pub fn new(store: Arc<Store>, dirs: DataDirs, faults: Faults) -> Self {
        Ingestor { store, dirs, faults, max_payload: DEFAULT_MAX_PAYLOAD, placement: Mutex::new(()) }
    }

    pub fn dirs(&self) -> &DataDirs {
        &self.dirs
    }

    /// Durably stores a verified upload and creates its manifest.
    pub fn persist(&self, upload: &Upload, original_name: Option<&str>) -> Result<Manifest> {
        let at = to_millis(Utc::now());
        let base = stored_name(&upload.patient_id, &upload.task_id, upload.kind_code, at);
        let tmp = self.dirs.tmp.join(format!("{base}.{}.part", uuid::Uuid::new_v4().simple()));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&upload.payload)?;
            f.sync_all()?;
        }
        self.faults.hit(CrashPoint::AfterTempWrite);

        let _guard = self.placement.lock().unwrap_or_else(|p| p.into_inner());
        let mut name = base.clone();
        let mut n = 1;
        while self.dirs.raw.join(&name).exists() || self.store.manifest_by_stored_name(&name)?.is_some() {
            let (stem, ext) = base.rsplit_once('.').unwrap_or((&base, "bin"));
            name = format!("{stem}-{n}.{ext}");
            n += 1;
        }
        fs::rename(&tmp, self.dirs.raw.join(&name))?;
        sync_dir(&self.dirs.raw)?;
        self.faults.hit(CrashPoint::AfterRename);

        let manifest = self.store.insert_manifest(&NewManifest {
            patient_id: upload.patient_id.clone(),
            task_id: upload.task_id.clone(),
            kind_code: upload.kind_code,
            original_name: original_name.map(str::to_owned),
            stored_name: name,
            received_at: at,
            sha256: upload.sha256_hex(),
            size_bytes: upload.payload.len() as u64,
        })?;
        self.faults.hit(CrashPoint::AfterManifest);
        Ok(manifest)
    }

    /// Reads one framed upload from `stream`, persists it and replies.
    /// Rejected frames get their status byte and `Ok(None)`.
    pub fn receive<S: Read + Write>(&self, stream: &mut S, peer: &str) -> Result<Option<Manifest>> {
        match read_upload(stream, self.max_payload) {
            Ok(upload) => {
                let m = self.persist(&upload, None)?;
                stream.write_all(&[Reply::Ok as u8])?;
                stream.flush()?;
                log::info!("received {} from {peer} ({} bytes)", m.stored_name, m.size_bytes);
                Ok(Some(m))
            }
            Err(e) => match e.reply() {
                Some(reply) => {
                    self.store.audit(peer, "upload_rejected", &e.to_string())?;
                    log::warn!("rejected upload from {peer}: {e}");
                    stream.write_all(&[reply as u8])?;
                    stream.flush()?;
                    Ok(None)
                }
                None => Err(NodeError::Io(match e {
                    crate::protocol::FrameError::Io(io) => io,
                    other => std::io::Error::other(other.to_string()),
                })),
            },
        }
    }

    /// Start-up cleanup after an unclean stop.
    pub fn recover(&self) -> Result<RecoveryReport> {
        let mut report = RecoveryReport::default();
        for entry in fs::read_dir(&self.dirs.tmp)? {
            let path = entry?.path();
            if path.is_file() {
                fs::remove_file(&path)?;
                report.temp_files_removed += 1;
            }
        }
        for entry in fs::read_dir(&self.dirs.raw)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if entry.path().is_file() && self.store.manifest_by_stored_name(&name)?.is_none() {
                fs::remove_file(entry.path())?;
                report.orphans_removed += 1;
            }
        }
        for m in self.store.manifests(Some(Status::Received))? {
            if !self.dirs.raw_path(&m).exists() {
                self.store.mark_failed(m.id, "raw file missing after restart")?;
                report.missing_raw_failed += 1;
            }
        }
        if report != RecoveryReport::default() {
            log::warn!("recovery: {report:?}");
        }
        Ok(report)
    }
}
