//! Durable node state in one SQLite file: manifests and their transition
//! log, feature records, users, sync bookkeeping and the audit trail.
//!
//! Writes go through a single connection behind a mutex; each write is one
//! transaction, so a crash leaves either the old or the new state. Reads
//! open their own connections and run concurrently under WAL.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use rusqlite::{params, Connection, OpenFlags, OptionalExtension, Row};
use serde::{Deserialize, Serialize};

use crate::auth::{Role, UserRecord};
use crate::error::{NodeError, Result};
use crate::protocol::DataKind;
use crate::records::FeatureRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Received,
    Processed,
    Synced,
    Failed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Received => "received",
            Status::Processed => "processed",
            Status::Synced => "synced",
            Status::Failed => "failed",
        }
    }

    /// The forward-only state machine. `failed` is reachable from the two
    /// working states; a failed manifest whose raw file is retained can be
    /// dispatched again, which moves it to `processed`.
    pub fn can_transition(self, to: Status) -> bool {
        matches!(
            (self, to),
            (Status::Received, Status::Processed)
                | (Status::Processed, Status::Synced)
                | (Status::Received, Status::Failed)
                | (Status::Processed, Status::Failed)
                | (Status::Failed, Status::Processed)
        )
    }

    fn sources(to: Status) -> Vec<Status> {
        [Status::Received, Status::Processed, Status::Synced, Status::Failed]
            .into_iter()
            .filter(|s| s.can_transition(to))
            .collect()
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = NodeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "received" => Ok(Status::Received),
            "processed" => Ok(Status::Processed),
            "synced" => Ok(Status::Synced),
            "failed" => Ok(Status::Failed),
            other => Err(NodeError::input(format!("unknown status {other:?}"))),
        }
    }
}

/// True when a manifest's history starts at `received` and every step is
/// allowed by [`Status::can_transition`].
pub fn history_is_forward(history: &[Transition]) -> bool {
    let Some(first) = history.first() else { return true };
    if first.from.is_some() || first.to != Status::Received {
        return false;
    }
    history.windows(2).all(|w| w[1].from == Some(w[0].to) && w[0].to.can_transition(w[1].to))
}

/// Durable record of one ingested file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: i64,
    pub patient_id: String,
    pub task_id: String,
    /// Wire kind byte; unknown kinds are stored and fail at dispatch.
    pub kind_code: u8,
    /// Client-side file name when one is known (socket uploads carry none).
    pub original_name: Option<String>,
    /// Name of the raw file under the node's raw directory.
    pub stored_name: String,
    pub received_at: DateTime<Utc>,
    pub sha256: String,
    pub size_bytes: u64,
    pub status: Status,
    pub reason: Option<String>,
    pub raw_present: bool,
    pub sync_attempts: u32,
}

impl Manifest {
    pub fn kind(&self) -> Option<DataKind> {
        DataKind::from_code(self.kind_code)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewManifest {
    pub patient_id: String,
    pub task_id: String,
    pub kind_code: u8,
    pub original_name: Option<String>,
    pub stored_name: String,
    pub received_at: DateTime<Utc>,
    pub sha256: String,
    pub size_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transition {
    pub manifest_id: i64,
    pub from: Option<Status>,
    pub to: Status,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditEntry {
    pub at: DateTime<Utc>,
    pub actor: String,
    pub action: String,
    pub detail: String,
}

/// Record selection. Dates are UTC calendar days of receipt, inclusive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryFilter {
    pub patient_id: Option<String>,
    pub task_id: Option<String>,
    pub kind: Option<DataKind>,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
}

pub fn timestamp(at: DateTime<Utc>) -> String {
    at.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// `at` truncated to whole milliseconds, the stored precision.
pub fn to_millis(at: DateTime<Utc>) -> DateTime<Utc> {
    DateTime::from_timestamp_millis(at.timestamp_millis()).unwrap_or(at)
}

fn parse_ts(s: &str) -> rusqlite::Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|d| d.with_timezone(&Utc))
        .map_err(|e| rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e)))
}

fn conversion<E: std::error::Error + Send + Sync + 'static>(e: E) -> rusqlite::Error {
    rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e))
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS manifests (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    patient_id TEXT NOT NULL,
    task_id TEXT NOT NULL,
    kind_code INTEGER NOT NULL,
    original_name TEXT,
    stored_name TEXT NOT NULL UNIQUE,
    received_at TEXT NOT NULL,
    sha256 TEXT NOT NULL,
    size_bytes INTEGER NOT NULL,
    status TEXT NOT NULL,
    reason TEXT,
    raw_present INTEGER NOT NULL DEFAULT 1,
    sync_attempts INTEGER NOT NULL DEFAULT 0,
    next_sync_at TEXT,
    last_sync_error TEXT
);
CREATE INDEX IF NOT EXISTS manifests_status ON manifests(status);
CREATE INDEX IF NOT EXISTS manifests_patient ON manifests(patient_id, received_at);
CREATE TABLE IF NOT EXISTS transitions (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    manifest_id INTEGER NOT NULL REFERENCES manifests(id),
    from_status TEXT,
    to_status TEXT NOT NULL,
    at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS feature_records (
    manifest_id INTEGER PRIMARY KEY REFERENCES manifests(id),
    kind TEXT NOT NULL,
    produced_at TEXT NOT NULL,
    record_json TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS users (
    user_id TEXT PRIMARY KEY,
    role TEXT NOT NULL,
    approved_by TEXT REFERENCES users(user_id),
    credential_hash TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS audit (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    at TEXT NOT NULL,
    actor TEXT NOT NULL,
    action TEXT NOT NULL,
    detail TEXT NOT NULL
);
";

const MANIFEST_COLUMNS: &str = "id, patient_id, task_id, kind_code, original_name, stored_name, received_at, sha256, size_bytes, status, reason, raw_present, sync_attempts";

fn manifest_from_row(row: &Row<'_>) -> rusqlite::Result<Manifest> {
    Ok(Manifest {
        id: row.get(0)?,
        patient_id: row.get(1)?,
        task_id: row.get(2)?,
        kind_code: row.get(3)?,
        original_name: row.get(4)?,
        stored_name: row.get(5)?,
        received_at: parse_ts(&row.get::<_, String>(6)?)?,
        sha256: row.get(7)?,
        size_bytes: row.get::<_, i64>(8)? as u64,
        status: row.get::<_, String>(9)?.parse().map_err(conversion)?,
        reason: row.get(10)?,
        raw_present: row.get(11)?,
        sync_attempts: row.get(12)?,
    })
}

pub struct Store {
    path: PathBuf,
    writer: Mutex<Connection>,
}

impl Store {
    pub fn open(path: &Path) -> Result<Store> {
        let conn = Connection::open(path)?;
        conn.busy_timeout(std::time::Duration::from_secs(10))?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "FULL")?;
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.execute_batch(SCHEMA)?;
        Ok(Store { path: path.to_owned(), writer: Mutex::new(conn) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn reader(&self) -> Result<Connection> {
        let conn = Connection::open_with_flags(&self.path, OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX)?;
        conn.busy_timeout(std::time::Duration::from_secs(10))?;
        Ok(conn)
    }

    fn write<T>(&self, f: impl FnOnce(&rusqlite::Transaction<'_>) -> Result<T>) -> Result<T> {
        let mut conn = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let tx = conn.transaction()?;
        let out = f(&tx)?;
        tx.commit()?;
        Ok(out)
    }

    pub fn insert_manifest(&self, m: &NewManifest) -> Result<Manifest> {
        let id = self.write(|tx| {
            tx.execute(
                "INSERT INTO manifests (patient_id, task_id, kind_code, original_name, stored_name, received_at, sha256, size_bytes, status)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, 'received')",
                params![
                    m.patient_id,
                    m.task_id,
                    m.kind_code,
                    m.original_name,
                    m.stored_name,
                    timestamp(m.received_at),
                    m.sha256,
                    m.size_bytes as i64
                ],
            )?;
            let id = tx.last_insert_rowid();
            log_transition(tx, id, None, Status::Received)?;
            Ok(id)
        })?;
        self.manifest(id)?.ok_or_else(|| NodeError::NotFound(format!("manifest {id}")))
    }

    pub fn manifest(&self, id: i64) -> Result<Option<Manifest>> {
        let conn = self.reader()?;
        Ok(conn
            .query_row(&format!("SELECT {MANIFEST_COLUMNS} FROM manifests WHERE id = ?1"), [id], manifest_from_row)
            .optional()?)
    }

    /// Manifests in id order, optionally of one status.
    pub fn manifests(&self, status: Option<Status>) -> Result<Vec<Manifest>> {
        let conn = self.reader()?;
        let mut stmt = conn.prepare(&format!(
            "SELECT {MANIFEST_COLUMNS} FROM manifests WHERE (?1 IS NULL OR status = ?1) ORDER BY id"
        ))?;
        let rows = stmt.query_map([status.map(Status::as_str)], manifest_from_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn manifest_by_stored_name(&self, name: &str) -> Result<Option<Manifest>> {
        let conn = self.reader()?;
        Ok(conn
            .query_row(&format!("SELECT {MANIFEST_COLUMNS} FROM manifests WHERE stored_name = ?1"), [name], manifest_from_row)
            .optional()?)
    }

    /// Stores the record and moves the manifest to `processed` in one
    /// transaction.
    pub fn complete_processing(&self, record: &FeatureRecord) -> Result<()> {
        let id = record.manifest.manifest_id;
        let json = record.to_json()?;
        self.write(|tx| {
            transition(tx, id, Status::Processed, None)?;
            tx.execute(
                "INSERT OR REPLACE INTO feature_records (manifest_id, kind, produced_at, record_json) VALUES (?1, ?2, ?3, ?4)",
                params![id, record.payload.kind().as_str(), timestamp(record.produced_at), json],
            )?;
            Ok(())
        })
    }

    pub fn mark_failed(&self, id: i64, reason: &str) -> Result<()> {
        self.write(|tx| transition(tx, id, Status::Failed, Some(reason)))
    }

    pub fn mark_synced(&self, id: i64) -> Result<()> {
        self.write(|tx| {
            transition(tx, id, Status::Synced, None)?;
            tx.execute("UPDATE manifests SET next_sync_at = NULL, last_sync_error = NULL WHERE id = ?1", [id])?;
            Ok(())
        })
    }

    /// Counts a failed sync attempt; returns the new attempt count.
    pub fn record_sync_failure(&self, id: i64, error: &str, next_at: DateTime<Utc>) -> Result<u32> {
        self.write(|tx| {
            tx.execute(
                "UPDATE manifests SET sync_attempts = sync_attempts + 1, next_sync_at = ?2, last_sync_error = ?3 WHERE id = ?1",
                params![id, timestamp(next_at), error],
            )?;
            Ok(tx.query_row("SELECT sync_attempts FROM manifests WHERE id = ?1", [id], |r| r.get(0))?)
        })
    }

    /// Makes every pending record eligible for sync again.
    pub fn reset_sync_attempts(&self) -> Result<usize> {
        self.write(|tx| {
            Ok(tx.execute(
                "UPDATE manifests SET sync_attempts = 0, next_sync_at = NULL WHERE status = 'processed' AND sync_attempts > 0",
                [],
            )?)
        })
    }

    /// Processed manifests due for a sync attempt, with their record JSON.
    pub fn sync_candidates(&self, now: DateTime<Utc>, max_attempts: u32) -> Result<Vec<(Manifest, String)>> {
        let conn = self.reader()?;
        let mut stmt = conn.prepare(&format!(
            "SELECT {}, f.record_json FROM manifests m JOIN feature_records f ON f.manifest_id = m.id
             WHERE m.status = 'processed' AND m.sync_attempts < ?1 AND (m.next_sync_at IS NULL OR m.next_sync_at <= ?2)
             ORDER BY m.id",
            MANIFEST_COLUMNS.split(", ").map(|c| format!("m.{c}")).collect::<Vec<_>>().join(", ")
        ))?;
        let rows = stmt.query_map(params![max_attempts, timestamp(now)], |r| Ok((manifest_from_row(r)?, r.get::<_, String>(13)?)))?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn record_json(&self, manifest_id: i64) -> Result<Option<String>> {
        let conn = self.reader()?;
        Ok(conn
            .query_row("SELECT record_json FROM feature_records WHERE manifest_id = ?1", [manifest_id], |r| r.get(0))
            .optional()?)
    }

    pub fn feature_record(&self, manifest_id: i64) -> Result<Option<FeatureRecord>> {
        self.record_json(manifest_id)?.map(|j| Ok(serde_json::from_str(&j)?)).transpose()
    }

    /// Records matching `filter`, restricted to `patients` when given,
    /// ordered by receipt time.
    pub fn query_records(&self, patients: Option<&[String]>, filter: &QueryFilter) -> Result<Vec<FeatureRecord>> {
        let conn = self.reader()?;
        let mut stmt = conn.prepare(
            "SELECT m.patient_id, m.task_id, m.kind_code, m.received_at, f.record_json
             FROM manifests m JOIN feature_records f ON f.manifest_id = m.id
             ORDER BY m.received_at, m.id",
        )?;
        let rows = stmt.query_map([], |r| {
            Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, u8>(2)?, parse_ts(&r.get::<_, String>(3)?)?, r.get::<_, String>(4)?))
        })?;
        let mut out = Vec::new();
        for row in rows {
            let (patient, task, kind_code, received, json) = row?;
            let day = received.date_naive();
            let keep = patients.is_none_or(|p| p.contains(&patient))
                && filter.patient_id.as_ref().is_none_or(|p| *p == patient)
                && filter.task_id.as_ref().is_none_or(|t| *t == task)
                && filter.kind.is_none_or(|k| k.code() == kind_code)
                && filter.from.is_none_or(|d| day >= d)
                && filter.to.is_none_or(|d| day <= d);
            if keep {
                out.push(serde_json::from_str(&json)?);
            }
        }
        Ok(out)
    }

    pub fn transitions(&self, manifest_id: Option<i64>) -> Result<Vec<Transition>> {
        let conn = self.reader()?;
        let mut stmt = conn.prepare(
            "SELECT manifest_id, from_status, to_status, at FROM transitions WHERE (?1 IS NULL OR manifest_id = ?1) ORDER BY id",
        )?;
        let rows = stmt.query_map([manifest_id], |r| {
            Ok(Transition {
                manifest_id: r.get(0)?,
                from: r.get::<_, Option<String>>(1)?.map(|s| s.parse().map_err(conversion)).transpose()?,
                to: r.get::<_, String>(2)?.parse().map_err(conversion)?,
                at: parse_ts(&r.get::<_, String>(3)?)?,
            })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn set_raw_removed(&self, id: i64) -> Result<()> {
        self.write(|tx| {
            tx.execute("UPDATE manifests SET raw_present = 0 WHERE id = ?1", [id])?;
            Ok(())
        })
    }

    pub fn add_user(&self, user: &UserRecord) -> Result<()> {
        self.write(|tx| {
            if user.role == Role::Patient {
                let approver = user.approved_by.as_deref().ok_or_else(|| NodeError::input("a patient needs an approving clinician"))?;
                let role: Option<String> =
                    tx.query_row("SELECT role FROM users WHERE user_id = ?1", [approver], |r| r.get(0)).optional()?;
                if role.as_deref() != Some(Role::Clinician.as_str()) {
                    return Err(NodeError::input(format!("approver {approver:?} is not a registered clinician")));
                }
            }
            tx.execute(
                "INSERT INTO users (user_id, role, approved_by, credential_hash) VALUES (?1, ?2, ?3, ?4)",
                params![user.user_id, user.role.as_str(), user.approved_by, user.credential_hash],
            )
            .map_err(|e| match e {
                rusqlite::Error::SqliteFailure(f, _) if f.code == rusqlite::ErrorCode::ConstraintViolation => {
                    NodeError::input(format!("user {:?} already exists", user.user_id))
                }
                e => e.into(),
            })?;
            Ok(())
        })
    }

    pub fn user(&self, user_id: &str) -> Result<Option<UserRecord>> {
        let conn = self.reader()?;
        Ok(conn
            .query_row("SELECT user_id, role, approved_by, credential_hash FROM users WHERE user_id = ?1", [user_id], |r| {
                Ok(UserRecord {
                    user_id: r.get(0)?,
                    role: r.get::<_, String>(1)?.parse().map_err(conversion)?,
                    approved_by: r.get(2)?,
                    credential_hash: r.get(3)?,
                })
            })
            .optional()?)
    }

    /// Patients whose approving clinician is `clinician`.
    pub fn patients_of(&self, clinician: &str) -> Result<Vec<String>> {
        let conn = self.reader()?;
        let mut stmt = conn.prepare("SELECT user_id FROM users WHERE role = 'patient' AND approved_by = ?1 ORDER BY user_id")?;
        let rows = stmt.query_map([clinician], |r| r.get(0))?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn audit(&self, actor: &str, action: &str, detail: &str) -> Result<()> {
        self.write(|tx| {
            tx.execute(
                "INSERT INTO audit (at, actor, action, detail) VALUES (?1, ?2, ?3, ?4)",
                params![timestamp(Utc::now()), actor, action, detail],
            )?;
            Ok(())
        })
    }

    pub fn audit_log(&self) -> Result<Vec<AuditEntry>> {
        let conn = self.reader()?;
        let mut stmt = conn.prepare("SELECT at, actor, action, detail FROM audit ORDER BY id")?;
        let rows = stmt.query_map([], |r| {
            Ok(AuditEntry { at: parse_ts(&r.get::<_, String>(0)?)?, actor: r.get(1)?, action: r.get(2)?, detail: r.get(3)? })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }
}

fn log_transition(tx: &rusqlite::Transaction<'_>, id: i64, from: Option<Status>, to: Status) -> Result<()> {
    tx.execute(
        "INSERT INTO transitions (manifest_id, from_status, to_status, at) VALUES (?1, ?2, ?3, ?4)",
        params![id, from.map(Status::as_str), to.as_str(), timestamp(Utc::now())],
    )?;
    Ok(())
}

/// Compare-and-set status change, logged in the same transaction.
fn transition(tx: &rusqlite::Transaction<'_>, id: i64, to: Status, reason: Option<&str>) -> Result<()> {
    let current: Option<String> = tx.query_row("SELECT status FROM manifests WHERE id = ?1", [id], |r| r.get(0)).optional()?;
    let current: Status = current.ok_or_else(|| NodeError::NotFound(format!("manifest {id}")))?.parse()?;
    if !Status::sources(to).contains(&current) {
        return Err(NodeError::Transition { id, from: current.to_string(), to: to.to_string() });
    }
    tx.execute(
        "UPDATE manifests SET status = ?2, reason = ?3 WHERE id = ?1",
        params![id, to.as_str(), reason],
    )?;
    log_transition(tx, id, Some(current), to)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{FeaturePayload, ManifestRef};
    use fog_core::pcg::HeartRateSeries;

    fn new_manifest(patient: &str, name: &str, at: DateTime<Utc>) -> NewManifest {
        NewManifest {
            patient_id: patient.into(),
            task_id: "pcg".into(),
            kind_code: DataKind::Pcg.code(),
            original_name: None,
            stored_name: name.into(),
            received_at: at,
            sha256: "ab".repeat(32),
            size_bytes: 10,
        }
    }

    fn record_for(m: &Manifest) -> FeatureRecord {
        FeatureRecord {
            manifest: ManifestRef {
                manifest_id: m.id,
                patient_id: m.patient_id.clone(),
                task_id: m.task_id.clone(),
                sha256: m.sha256.clone(),
                received_at: m.received_at,
            },
            produced_at: m.received_at,
            payload: FeaturePayload::Pcg(HeartRateSeries::default()),
        }
    }

    #[test]
    fn state_machine_table() {
        use Status::*;
        let all = [Received, Processed, Synced, Failed];
        let allowed: Vec<(Status, Status)> =
            all.iter().flat_map(|&a| all.iter().map(move |&b| (a, b))).filter(|(a, b)| a.can_transition(*b)).collect();
        assert_eq!(
            allowed,
            vec![(Received, Processed), (Received, Failed), (Processed, Synced), (Processed, Failed), (Failed, Processed)]
        );
    }

    #[test]
    fn lifecycle_is_logged_and_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(&dir.path().join("fog.db")).unwrap();
        let at = to_millis(Utc::now());
        let m = store.insert_manifest(&new_manifest("p1", "a.wav", at)).unwrap();
        assert_eq!((m.status, m.received_at), (Status::Received, at));
        assert!(matches!(store.mark_synced(m.id), Err(NodeError::Transition { .. })));
        store.complete_processing(&record_for(&m)).unwrap();
        assert_eq!(store.sync_candidates(Utc::now(), 5).unwrap().len(), 1);
        store.mark_synced(m.id).unwrap();
        assert!(store.mark_failed(m.id, "late").is_err());
        let history = store.transitions(Some(m.id)).unwrap();
        assert_eq!(history.iter().map(|t| t.to).collect::<Vec<_>>(), vec![Status::Received, Status::Processed, Status::Synced]);
        assert!(history_is_forward(&history));
        assert_eq!(store.feature_record(m.id).unwrap().unwrap(), record_for(&m));
    }

    #[test]
    fn failed_manifest_can_be_redispatched() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(&dir.path().join("fog.db")).unwrap();
        let m = store.insert_manifest(&new_manifest("p1", "a.wav", Utc::now())).unwrap();
        store.mark_failed(m.id, "corrupt").unwrap();
        assert_eq!(store.manifest(m.id).unwrap().unwrap().reason.as_deref(), Some("corrupt"));
        store.complete_processing(&record_for(&m)).unwrap();
        assert!(history_is_forward(&store.transitions(Some(m.id)).unwrap()));
    }

    #[test]
    fn sync_backoff_bookkeeping() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(&dir.path().join("fog.db")).unwrap();
        let now = Utc::now();
        let m = store.insert_manifest(&new_manifest("p1", "a.wav", now)).unwrap();
        store.complete_processing(&record_for(&m)).unwrap();
        let later = now + chrono::Duration::seconds(5);
        assert_eq!(store.record_sync_failure(m.id, "down", later).unwrap(), 1);
        assert!(store.sync_candidates(now, 5).unwrap().is_empty());
        assert_eq!(store.sync_candidates(later, 5).unwrap().len(), 1);
        assert!(store.sync_candidates(later, 1).unwrap().is_empty());
        assert_eq!(store.reset_sync_attempts().unwrap(), 1);
        assert_eq!(store.sync_candidates(now, 1).unwrap().len(), 1);
    }

    #[test]
    fn query_filters() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(&dir.path().join("fog.db")).unwrap();
        let day1 = DateTime::parse_from_rfc3339("2026-03-02T10:00:00Z").unwrap().with_timezone(&Utc);
        let day2 = DateTime::parse_from_rfc3339("2026-03-09T10:00:00Z").unwrap().with_timezone(&Utc);
        for (i, (p, at)) in [("p1", day2), ("p1", day1), ("p2", day1)].iter().enumerate() {
            let m = store.insert_manifest(&new_manifest(p, &format!("{i}.wav"), *at)).unwrap();
            store.complete_processing(&record_for(&m)).unwrap();
        }
        let all = store.query_records(None, &QueryFilter::default()).unwrap();
        assert_eq!(all.iter().map(|r| r.manifest.received_at).collect::<Vec<_>>(), vec![day1, day1, day2]);
        let p1 = QueryFilter { patient_id: Some("p1".into()), ..Default::default() };
        assert_eq!(store.query_records(None, &p1).unwrap().len(), 2);
        let early = QueryFilter { to: Some(day1.date_naive()), ..Default::default() };
        assert_eq!(store.query_records(Some(&["p1".to_string()]), &early).unwrap().len(), 1);
    }
}
