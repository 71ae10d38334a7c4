//! Crash-injection points. Production nodes carry no hook; tests install
//! one that panics at a chosen point to emulate an abrupt stop there.

use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CrashPoint {
    /// Upload bytes are in the temporary file, not yet renamed.
    AfterTempWrite,
    /// Raw file renamed into place, manifest not yet written.
    AfterRename,
    /// Manifest committed, upload not yet acknowledged.
    AfterManifest,
    /// Features computed, not yet stored.
    BeforeRecordStore,
    /// Record stored and manifest processed.
    AfterRecordStore,
    /// Endpoint acknowledged the POST, manifest not yet marked synced.
    AfterSyncPost,
}

impl CrashPoint {
    pub const ALL: [CrashPoint; 6] = [
        CrashPoint::AfterTempWrite,
        CrashPoint::AfterRename,
        CrashPoint::AfterManifest,
        CrashPoint::BeforeRecordStore,
        CrashPoint::AfterRecordStore,
        CrashPoint::AfterSyncPost,
    ];
}

pub type FaultHook = Arc<dyn Fn(CrashPoint) + Send + Sync>;

#[derive(Clone, Default)]
pub struct Faults(Option<FaultHook>);

impl Faults {
    pub fn none() -> Self {
        Faults(None)
    }

    pub fn with(hook: FaultHook) -> Self {
        Faults(Some(hook))
    }

    pub(crate) fn hit(&self, point: CrashPoint) {
        if let Some(h) = &self.0 {
            h(point);
        }
    }
}

impl fmt::Debug for Faults {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.0.is_some() { "Faults(hooked)" } else { "Faults(none)" })
    }
}
