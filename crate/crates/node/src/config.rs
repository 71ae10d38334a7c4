//! Node configuration: one TOML key-value file, every key overridable by
//! an environment variable `FOG_<KEY>` (upper case).

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use crate::error::{NodeError, Result};

pub const ENV_PREFIX: &str = "FOG_";
pub const DEFAULT_RETENTION_DAYS: u32 = 14;

/// File layout; every key is optional so that environment variables can
/// supply it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    listen_addr: Option<String>,
    data_dir: Option<PathBuf>,
    server_cert: Option<PathBuf>,
    server_key: Option<PathBuf>,
    client_ca: Option<PathBuf>,
    retention_days: Option<u32>,
    sync_url: Option<String>,
    sync_ca: Option<PathBuf>,
    sync_interval_s: Option<u64>,
    sync_backoff_s: Option<u64>,
    sync_max_attempts: Option<u32>,
    workers: Option<usize>,
    /// Whether fog-node accepts a plain-HTTP sync URL.
    allow_insecure_sync: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfig {
    pub listen_addr: SocketAddr,
    pub data_dir: PathBuf,
    pub server_cert: PathBuf,
    pub server_key: PathBuf,
    /// CA that client certificates must chain to.
    pub client_ca: PathBuf,
    /// Days raw files are kept after processing.
    pub retention_days: u32,
    pub sync: Option<SyncSettings>,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncSettings {
    pub url: String,
    /// Extra trust root for the sync endpoint (PEM).
    pub ca: Option<PathBuf>,
    pub interval: Duration,
    /// First retry delay; doubles per failed attempt.
    pub backoff_base: Duration,
    pub max_attempts: u32,
}

impl SyncSettings {
    pub fn new(url: &str) -> Self {
        SyncSettings {
            url: url.to_owned(),
            ca: None,
            interval: Duration::from_secs(30),
            backoff_base: Duration::from_secs(5),
            max_attempts: 5,
        }
    }
}

fn env_value<T: std::str::FromStr>(env: &[(String, String)], key: &str) -> Result<Option<T>> {
    let name = format!("{ENV_PREFIX}{}", key.to_ascii_uppercase());
    match env.iter().rev().find(|(k, _)| *k == name) {
        None => Ok(None),
        Some((_, v)) => v.parse().map(Some).map_err(|_| NodeError::config(format!("{name}={v:?} is not valid"))),
    }
}

impl NodeConfig {
    /// Reads `path` (when given) and applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| NodeError::config(format!("cannot read {}: {e}", p.display())))?),
            None => None,
        };
        let env: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        Self::from_sources(text.as_deref(), &env)
    }

    pub fn from_sources(file: Option<&str>, env: &[(String, String)]) -> Result<Self> {
        let mut raw: RawConfig = match file {
            Some(t) => toml::from_str(t).map_err(|e| NodeError::config(format!("config file: {e}")))?,
            None => RawConfig::default(),
        };
        macro_rules! overlay {
            ($($field:ident),*) => {
                $(if let Some(v) = env_value(env, stringify!($field))? { raw.$field = Some(v); })*
            };
        }
        overlay!(
            listen_addr, data_dir, server_cert, server_key, client_ca, retention_days, sync_url, sync_ca, sync_interval_s,
            sync_backoff_s, sync_max_attempts, workers, allow_insecure_sync
        );

        let listen = raw.listen_addr.unwrap_or_else(|| "0.0.0.0:7443".into());
        let listen_addr = listen.parse().map_err(|_| NodeError::config(format!("listen_addr {listen:?} is not host:port")))?;
        let data_dir = raw.data_dir.ok_or_else(|| NodeError::config("data_dir is required"))?;
        let need = |v: Option<PathBuf>, key: &str| v.ok_or_else(|| NodeError::config(format!("{key} is required")));
        let workers = raw.workers.unwrap_or(2);
        if workers == 0 {
            return Err(NodeError::config("workers must be at least 1"));
        }
        let sync = match raw.sync_url {
            None => None,
            Some(url) => {
                let insecure = raw.allow_insecure_sync.unwrap_or(false);
                if !(url.starts_with("https://") || (insecure && url.starts_with("http://"))) {
                    return Err(NodeError::config(format!("sync_url {url:?} must be https:// (or set allow_insecure_sync)")));
                }
                let mut s = SyncSettings::new(&url);
                s.ca = raw.sync_ca;
                if let Some(v) = raw.sync_interval_s {
                    s.interval = Duration::from_secs(v.max(1));
                }
                if let Some(v) = raw.sync_backoff_s {
                    s.backoff_base = Duration::from_secs(v);
                }
                if let Some(v) = raw.sync_max_attempts {
                    s.max_attempts = v.max(1);
                }
                Some(s)
            }
        };
        Ok(NodeConfig {
            listen_addr,
            server_cert: need(raw.server_cert, "server_cert")?,
            server_key: need(raw.server_key, "server_key")?,
            client_ca: need(raw.client_ca, "client_ca")?,
            data_dir,
            retention_days: raw.retention_days.unwrap_or(DEFAULT_RETENTION_DAYS),
            sync,
            workers,
        })
    }

    pub fn db_path(&self) -> PathBuf {
        self.data_dir.join("fog.db")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FILE: &str = r#"
listen_addr = "127.0.0.1:9000"
data_dir = "/tmp/fog"
server_cert = "server.pem"
server_key = "server.key"
client_ca = "ca.pem"
sync_url = "https://cloud.example/features"
"#;

    #[test]
    fn file_with_defaults() {
        let c = NodeConfig::from_sources(Some(FILE), &[]).unwrap();
        assert_eq!(c.listen_addr, "127.0.0.1:9000".parse().unwrap());
        assert_eq!((c.retention_days, c.workers), (14, 2));
        let s = c.sync.unwrap();
        assert_eq!((s.backoff_base, s.max_attempts), (Duration::from_secs(5), 5));
    }

    #[test]
    fn environment_overrides_file() {
        let env = vec![
            ("FOG_RETENTION_DAYS".to_string(), "0".to_string()),
            ("FOG_WORKERS".to_string(), "4".to_string()),
            ("FOG_DATA_DIR".to_string(), "/srv/fog".to_string()),
        ];
        let c = NodeConfig::from_sources(Some(FILE), &env).unwrap();
        assert_eq!((c.retention_days, c.workers), (0, 4));
        assert_eq!(c.data_dir, PathBuf::from("/srv/fog"));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(NodeConfig::from_sources(Some("listen_addr = 5"), &[]).is_err());
        assert!(NodeConfig::from_sources(Some("colour = \"blue\""), &[]).is_err());
        assert!(NodeConfig::from_sources(Some(FILE), &[("FOG_WORKERS".into(), "many".into())]).is_err());
        let plain = FILE.replace("https://", "http://");
        assert!(NodeConfig::from_sources(Some(&plain), &[]).is_err());
        let ok = NodeConfig::from_sources(Some(&plain), &[("FOG_ALLOW_INSECURE_SYNC".into(), "true".into())]);
        assert!(ok.is_ok());
        assert!(NodeConfig::from_sources(None, &[]).is_err());
    }
}
