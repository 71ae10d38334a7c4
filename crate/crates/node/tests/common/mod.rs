//! Shared fixtures: a throwaway PKI and node configurations.
#![allow(dead_code)]

pub mod chaos;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use fog_node::config::{NodeConfig, SyncSettings};
use fog_node::tls;
use rcgen::{BasicConstraints, CertificateParams, DnType, ExtendedKeyUsagePurpose, IsCa, KeyPair, KeyUsagePurpose};

pub struct Pki {
    pub dir: PathBuf,
    pub ca: PathBuf,
    pub server_cert: PathBuf,
    pub server_key: PathBuf,
    pub client_cert: PathBuf,
    pub client_key: PathBuf,
    /// A client certificate from a CA the node does not trust.
    pub rogue_cert: PathBuf,
    pub rogue_key: PathBuf,
}

struct Authority {
    cert: rcgen::Certificate,
    key: KeyPair,
}

fn authority(name: &str) -> Authority {
    let key = KeyPair::generate().unwrap();
    let mut p = CertificateParams::new(Vec::<String>::new()).unwrap();
    p.is_ca = IsCa::Ca(BasicConstraints::Unconstrained);
    p.distinguished_name.push(DnType::CommonName, name);
    p.key_usages = vec![KeyUsagePurpose::KeyCertSign, KeyUsagePurpose::CrlSign, KeyUsagePurpose::DigitalSignature];
    Authority { cert: p.self_signed(&key).unwrap(), key }
}

fn leaf(ca: &Authority, name: &str, sans: Vec<String>, usage: ExtendedKeyUsagePurpose) -> (String, String) {
    let key = KeyPair::generate().unwrap();
    let mut p = CertificateParams::new(sans).unwrap();
    p.distinguished_name.push(DnType::CommonName, name);
    p.extended_key_usages = vec![usage];
    let cert = p.signed_by(&key, &ca.cert, &ca.key).unwrap();
    (cert.pem(), key.serialize_pem())
}

impl Pki {
    pub fn create(dir: &Path) -> Pki {
        std::fs::create_dir_all(dir).unwrap();
        let ca = authority("fog test CA");
        let rogue = authority("someone else");
        let (server_pem, server_key) = leaf(&ca, "fog node", vec!["localhost".into()], ExtendedKeyUsagePurpose::ServerAuth);
        let (client_pem, client_key) = leaf(&ca, "phone-1", vec![], ExtendedKeyUsagePurpose::ClientAuth);
        let (rogue_pem, rogue_key) = leaf(&rogue, "phone-x", vec![], ExtendedKeyUsagePurpose::ClientAuth);
        let write = |name: &str, text: &str| {
            let p = dir.join(name);
            std::fs::write(&p, text).unwrap();
            p
        };
        Pki {
            dir: dir.to_owned(),
            ca: write("ca.pem", &ca.cert.pem()),
            server_cert: write("server.pem", &server_pem),
            server_key: write("server.key", &server_key),
            client_cert: write("client.pem", &client_pem),
            client_key: write("client.key", &client_key),
            rogue_cert: write("rogue.pem", &rogue_pem),
            rogue_key: write("rogue.key", &rogue_key),
        }
    }

    pub fn client(&self) -> Arc<rustls::ClientConfig> {
        tls::client_config(tls::load_certs(&self.client_cert).unwrap(), tls::load_key(&self.client_key).unwrap(), tls::load_certs(&self.ca).unwrap())
            .unwrap()
    }

    pub fn rogue_client(&self) -> Arc<rustls::ClientConfig> {
        tls::client_config(tls::load_certs(&self.rogue_cert).unwrap(), tls::load_key(&self.rogue_key).unwrap(), tls::load_certs(&self.ca).unwrap())
            .unwrap()
    }
}

/// Config listening on an ephemeral loopback port with data under `data`.
pub fn node_config(pki: &Pki, data: &Path, sync_url: Option<&str>) -> NodeConfig {
    NodeConfig {
        listen_addr: "127.0.0.1:0".parse().unwrap(),
        data_dir: data.to_owned(),
        server_cert: pki.server_cert.clone(),
        server_key: pki.server_key.clone(),
        client_ca: pki.ca.clone(),
        retention_days: 14,
        sync: sync_url.map(|u| {
            let mut s = SyncSettings::new(u);
            s.interval = Duration::from_millis(200);
            s.backoff_base = Duration::from_millis(0);
            s
        }),
        workers: 2,
    }
}

/// Polls `cond` until it holds or `timeout` passes.
pub fn wait_for(timeout: Duration, mut cond: impl FnMut() -> bool) -> bool {
    let start = Instant::now();
    while start.elapsed() < timeout {
        if cond() {
            return true;
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    cond()
}
