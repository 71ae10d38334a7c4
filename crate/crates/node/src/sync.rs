//! Forwarding processed records to the cloud endpoint.
//!
//! Each record is POSTed as JSON with the raw upload's SHA-256 as
//! `X-Idempotency-Key`, so a retry after a lost acknowledgement is
//! recognised by the receiver instead of creating a duplicate. Failures
//! back off exponentially from `backoff_base`.

use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use rustls::pki_types::CertificateDer;
use ureq::tls::{Certificate, RootCerts, TlsConfig, TlsProvider};
use ureq::Agent;

use crate::config::SyncSettings;
use crate::error::{NodeError, Result};
use crate::faults::{CrashPoint, Faults};
use crate::store::{Manifest, Store};
use crate::tls;

pub const IDEMPOTENCY_HEADER: &str = "X-Idempotency-Key";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncOutcome {
    Synced,
    /// Will be retried after the backoff delay.
    Retry,
    /// Gave up until the attempt counter is reset.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncReceipt {
    pub manifest_id: i64,
    pub outcome: SyncOutcome,
    pub status: Option<u16>,
}

/// Delay before the attempt that follows `attempts` failures.
pub fn backoff(base: Duration, attempts: u32) -> Duration {
    base.saturating_mul(1u32 << attempts.saturating_sub(1).min(16))
}

pub struct Syncer {
    agent: Agent,
    settings: SyncSettings,
    faults: Faults,
}

impl Syncer {
    pub fn new(settings: SyncSettings, faults: Faults) -> Result<Self> {
        let mut tls = TlsConfig::builder().provider(TlsProvider::Rustls).unversioned_rustls_crypto_provider(tls::provider());
        if let Some(ca) = &settings.ca {
            let roots: Vec<Certificate<'static>> =
                tls::load_certs(ca)?.iter().map(|c: &CertificateDer<'_>| Certificate::from_der(c.as_ref()).to_owned()).collect();
            tls = tls.root_certs(RootCerts::Specific(Arc::new(roots)));
        }
        let agent = Agent::config_builder()
            .tls_config(tls.build())
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .new_agent();
        Ok(Syncer { agent, settings, faults })
    }

    pub fn settings(&self) -> &SyncSettings {
        &self.settings
    }

    fn post(&self, manifest: &Manifest, body: &str) -> std::result::Result<u16, String> {
        let resp = self
            .agent
            .post(&self.settings.url)
            .header(IDEMPOTENCY_HEADER, &manifest.sha256)
            .content_type("application/json")
            .send(body)
            .map_err(|e| e.to_string())?;
        Ok(resp.status().as_u16())
    }

    /// Attempts one record; the store is updated either way.
    pub fn sync_one(&self, store: &Store, manifest: &Manifest, body: &str, now: DateTime<Utc>) -> Result<SyncReceipt> {
        let (status, error) = match self.post(manifest, body) {
            Ok(code) if (200..300).contains(&code) => (Some(code), None),
            Ok(code) => (Some(code), Some(format!("endpoint answered {code}"))),
            Err(e) => (None, Some(e)),
        };
        let outcome = match error {
            None => {
                self.faults.hit(CrashPoint::AfterSyncPost);
                store.mark_synced(manifest.id)?;
                SyncOutcome::Synced
            }
            Some(err) => {
                let attempts = manifest.sync_attempts + 1;
                let delay = chrono::Duration::from_std(backoff(self.settings.backoff_base, attempts))
                    .map_err(|e| NodeError::Sync(e.to_string()))?;
                let attempts = store.record_sync_failure(manifest.id, &err, now + delay)?;
                log::warn!("sync of manifest {} failed (attempt {attempts}): {err}", manifest.id);
                if attempts >= self.settings.max_attempts { SyncOutcome::Exhausted } else { SyncOutcome::Retry }
            }
        };
        Ok(SyncReceipt { manifest_id: manifest.id, outcome, status })
    }

    /// Attempts every record that is due.
    pub fn sync_due(&self, store: &Store, now: DateTime<Utc>) -> Result<Vec<SyncReceipt>> {
        store
            .sync_candidates(now, self.settings.max_attempts)?
            .iter()
            .map(|(m, body)| self.sync_one(store, m, body, now))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles() {
        let base = Duration::from_secs(5);
        let delays: Vec<u64> = (1..=5).map(|a| backoff(base, a).as_secs()).collect();
        assert_eq!(delays, vec![5, 10, 20, 40, 80]);
        assert_eq!(backoff(base, 0).as_secs(), 5);
        assert!(backoff(base, 1000) >= backoff(base, 17));
    }
}
