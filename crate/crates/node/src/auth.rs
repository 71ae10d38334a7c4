//! Users, roles and the record-access rules: patients see their own
//! records, clinicians see the patients they approved, admins see all.

use std::fmt;
use std::str::FromStr;

use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::Argon2;
use serde::{Deserialize, Serialize};

use crate::error::{NodeError, Result};
use crate::records::FeatureRecord;
use crate::store::{QueryFilter, Store};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Patient,
    Clinician,
    Admin,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Patient => "patient",
            Role::Clinician => "clinician",
            Role::Admin => "admin",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = NodeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "patient" => Ok(Role::Patient),
            "clinician" => Ok(Role::Clinician),
            "admin" => Ok(Role::Admin),
            other => Err(NodeError::input(format!("unknown role {other:?} (patient, clinician, admin)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub role: Role,
    /// Approving clinician; required for patients.
    pub approved_by: Option<String>,
    /// Argon2id PHC string.
    pub credential_hash: String,
}

impl UserRecord {
    pub fn new(user_id: &str, role: Role, approved_by: Option<&str>, password: &str) -> Result<Self> {
        if !crate::protocol::valid_id(user_id) {
            return Err(NodeError::input(format!("user id {user_id:?} must match [A-Za-z0-9_-]{{1,64}}")));
        }
        Ok(UserRecord {
            user_id: user_id.to_owned(),
            role,
            approved_by: approved_by.map(str::to_owned),
            credential_hash: hash_credential(password)?,
        })
    }
}

pub fn hash_credential(password: &str) -> Result<String> {
    let mut bytes = [0u8; 16];
    getrandom::fill(&mut bytes).map_err(|e| NodeError::config(format!("no entropy for salt: {e}")))?;
    let salt = SaltString::encode_b64(&bytes).map_err(|e| NodeError::config(format!("salt: {e}")))?;
    Argon2::default()
        .hash_password(password.as_bytes(), &salt)
        .map(|h| h.to_string())
        .map_err(|e| NodeError::config(format!("credential hashing failed: {e}")))
}

pub fn verify_credential(hash: &str, password: &str) -> bool {
    PasswordHash::new(hash).is_ok_and(|h| Argon2::default().verify_password(password.as_bytes(), &h).is_ok())
}

/// A patient is active only while approved by an existing clinician.
pub fn is_active(store: &Store, user: &UserRecord) -> Result<bool> {
    match user.role {
        Role::Patient => {
            let Some(approver) = &user.approved_by else { return Ok(false) };
            Ok(store.user(approver)?.is_some_and(|c| c.role == Role::Clinician))
        }
        Role::Clinician | Role::Admin => Ok(true),
    }
}

/// Checks credentials; failures are audited and reported without saying
/// whether the user exists.
pub fn authenticate(store: &Store, user_id: &str, password: &str) -> Result<UserRecord> {
    match store.user(user_id)? {
        Some(u) if verify_credential(&u.credential_hash, password) && is_active(store, &u)? => Ok(u),
        _ => {
            store.audit(user_id, "auth_failed", "bad credentials or inactive account")?;
            Err(NodeError::Denied("authentication failed".into()))
        }
    }
}

fn deny(store: &Store, requester: &UserRecord, detail: String) -> NodeError {
    if let Err(e) = store.audit(&requester.user_id, "access_denied", &detail) {
        log::error!("audit write failed: {e}");
    }
    NodeError::Denied(detail)
}

/// Patients `requester` may read, or `None` for unrestricted access.
fn visible_patients(store: &Store, requester: &UserRecord, wanted: Option<&str>) -> Result<Option<Vec<String>>> {
    if !is_active(store, requester)? {
        return Err(deny(store, requester, format!("{} is not an active account", requester.user_id)));
    }
    let allowed = match requester.role {
        Role::Admin => return Ok(None),
        Role::Patient => vec![requester.user_id.clone()],
        Role::Clinician => store.patients_of(&requester.user_id)?,
    };
    if let Some(p) = wanted {
        if !allowed.iter().any(|a| a == p) {
            return Err(deny(store, requester, format!("{} may not read records of {p}", requester.user_id)));
        }
    }
    Ok(Some(allowed))
}

/// Feature records visible to `requester`, ordered by receipt time.
pub fn query_features(store: &Store, requester: &UserRecord, filter: &QueryFilter) -> Result<Vec<FeatureRecord>> {
    let patients = visible_patients(store, requester, filter.patient_id.as_deref())?;
    store.query_records(patients.as_deref(), filter)
}

/// Experimental: the raw bytes of an ingested file, for clinicians of
/// that patient and admins, while retention has not removed them.
pub fn download_raw(store: &Store, raw_dir: &std::path::Path, requester: &UserRecord, manifest_id: i64) -> Result<Vec<u8>> {
    if requester.role == Role::Patient {
        return Err(deny(store, requester, "raw downloads need a clinician or admin".into()));
    }
    let m = store.manifest(manifest_id)?.ok_or_else(|| NodeError::NotFound(format!("manifest {manifest_id}")))?;
    visible_patients(store, requester, Some(&m.patient_id))?;
    if !m.raw_present {
        return Err(NodeError::NotFound(format!("raw file of manifest {manifest_id} was pruned")));
    }
    store.audit(&requester.user_id, "raw_download", &m.stored_name)?;
    Ok(std::fs::read(raw_dir.join(&m.stored_name))?)
}
