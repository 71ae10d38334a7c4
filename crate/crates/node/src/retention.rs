//! Removal of raw files once their features are safely stored.

use std::fs;

use chrono::{DateTime, Utc};

use crate::error::Result;
use crate::ingest::DataDirs;
use crate::store::{Status, Store};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PruneReport {
    pub removed: usize,
    pub bytes: u64,
}

/// Deletes raw files of processed or synced manifests received more than
/// `days` days before `now`. Failed and unprocessed uploads are kept.
pub fn prune_retention(store: &Store, dirs: &DataDirs, now: DateTime<Utc>, days: u32) -> Result<PruneReport> {
    let cutoff = now - chrono::Duration::days(i64::from(days));
    let mut report = PruneReport::default();
    for status in [Status::Processed, Status::Synced] {
        for m in store.manifests(Some(status))? {
            if !m.raw_present || m.received_at > cutoff {
                continue;
            }
            let path = dirs.raw_path(&m);
            match fs::remove_file(&path) {
                Ok(()) => report.bytes += m.size_bytes,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(e.into()),
            }
            store.set_raw_removed(m.id)?;
            report.removed += 1;
        }
    }
    if report.removed > 0 {
        log::info!("retention removed {} raw files ({} bytes)", report.removed, report.bytes);
    }
    Ok(report)
}
