//! The running service: TLS listener, processing workers and the
//! maintenance loop for sync and retention.
//!
//! Tasks share nothing but the store. A connection thread persists an
//! upload and hands the manifest id to the worker pool; workers move
//! manifests from `received` to `processed`; the maintenance loop syncs
//! `processed` records and prunes raw files.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use rustls::pki_types::ServerName;
use rustls::{ClientConfig, ClientConnection, ServerConfig, ServerConnection, StreamOwned};

use crate::config::NodeConfig;
use crate::error::{NodeError, Result};
use crate::faults::{CrashPoint, Faults};
use crate::ingest::{DataDirs, Ingestor, RecoveryReport};
use crate::pool::WorkerPool;
use crate::protocol::{write_upload, Reply, Upload};
use crate::records::{extract, FeatureRecord, ManifestRef};
use crate::retention::{prune_retention, PruneReport};
use crate::store::{to_millis, Manifest, Status, Store};
use crate::sync::{SyncReceipt, Syncer};
use crate::tls;

const IO_TIMEOUT: Duration = Duration::from_secs(30);

struct Inner {
    config: NodeConfig,
    store: Arc<Store>,
    ingestor: Ingestor,
    syncer: Option<Syncer>,
    tls: Arc<ServerConfig>,
    faults: Faults,
    recovery: RecoveryReport,
}

/// Handle to an open node; cheap to clone.
#[derive(Clone)]
pub struct Node {
    inner: Arc<Inner>,
}

impl Node {
    pub fn open(config: NodeConfig) -> Result<Node> {
        Self::open_with_faults(config, Faults::none())
    }

    /// Opens the store and certificates, then cleans up after any unclean
    /// stop. Missing or unreadable certificates refuse startup.
    pub fn open_with_faults(config: NodeConfig, faults: Faults) -> Result<Node> {
        let tls = tls::server_config_from_files(&config.server_cert, &config.server_key, &config.client_ca)?;
        let dirs = DataDirs::create(&config.data_dir)?;
        let store = Arc::new(Store::open(&config.db_path())?);
        let ingestor = Ingestor::new(store.clone(), dirs, faults.clone());
        let recovery = ingestor.recover()?;
        store.reset_sync_attempts()?;
        let syncer = config.sync.clone().map(|s| Syncer::new(s, faults.clone())).transpose()?;
        Ok(Node { inner: Arc::new(Inner { config, store, ingestor, syncer, tls, faults, recovery }) })
    }

    pub fn config(&self) -> &NodeConfig {
        &self.inner.config
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.inner.store
    }

    pub fn dirs(&self) -> &DataDirs {
        self.inner.ingestor.dirs()
    }

    pub fn ingestor(&self) -> &Ingestor {
        &self.inner.ingestor
    }

    /// What start-up recovery cleaned up.
    pub fn recovery(&self) -> &RecoveryReport {
        &self.inner.recovery
    }

    /// Runs the pipeline for a `received` manifest (or re-runs a `failed`
    /// one). Pipeline errors mark the manifest failed and keep the raw
    /// file, so the upload can be dispatched again later.
    pub fn dispatch(&self, id: i64) -> Result<Manifest> {
        let store = &self.inner.store;
        let m = store.manifest(id)?.ok_or_else(|| NodeError::NotFound(format!("manifest {id}")))?;
        if !matches!(m.status, Status::Received | Status::Failed) {
            return Err(NodeError::Transition { id, from: m.status.to_string(), to: Status::Processed.to_string() });
        }
        match self.features(&m) {
            Ok(record) => {
                self.inner.faults.hit(CrashPoint::BeforeRecordStore);
                store.complete_processing(&record)?;
                self.inner.faults.hit(CrashPoint::AfterRecordStore);
                log::info!("processed manifest {id} ({})", m.stored_name);
                if self.inner.config.retention_days == 0 {
                    self.prune(Utc::now())?;
                }
            }
            Err(e) => {
                log::warn!("manifest {id} failed: {e}");
                if m.status == Status::Received {
                    store.mark_failed(id, &e.to_string())?;
                }
            }
        }
        store.manifest(id)?.ok_or_else(|| NodeError::NotFound(format!("manifest {id}")))
    }

    fn features(&self, m: &Manifest) -> Result<FeatureRecord> {
        let kind = m.kind().ok_or_else(|| NodeError::input(format!("unknown data kind code {}", m.kind_code)))?;
        let bytes = std::fs::read(self.dirs().raw_path(m))?;
        let payload = extract(kind, &m.task_id, &bytes)?;
        Ok(FeatureRecord {
            manifest: ManifestRef {
                manifest_id: m.id,
                patient_id: m.patient_id.clone(),
                task_id: m.task_id.clone(),
                sha256: m.sha256.clone(),
                received_at: m.received_at,
            },
            produced_at: to_millis(Utc::now()),
            payload,
        })
    }

    /// Dispatches every `received` manifest in order.
    pub fn process_pending(&self) -> Result<Vec<Manifest>> {
        self.inner.store.manifests(Some(Status::Received))?.iter().map(|m| self.dispatch(m.id)).collect()
    }

    /// One sync pass; a node without a sync URL does nothing.
    pub fn sync_once(&self, now: DateTime<Utc>) -> Result<Vec<SyncReceipt>> {
        match &self.inner.syncer {
            Some(s) => s.sync_due(&self.inner.store, now),
            None => Ok(Vec::new()),
        }
    }

    pub fn prune(&self, now: DateTime<Utc>) -> Result<PruneReport> {
        prune_retention(&self.inner.store, self.dirs(), now, self.inner.config.retention_days)
    }

    /// Completes the TLS handshake and receives one upload. Handshake
    /// failures are audited and reported as errors.
    pub fn handle_connection(&self, tcp: TcpStream, peer: &str) -> Result<Option<Manifest>> {
        tcp.set_read_timeout(Some(IO_TIMEOUT))?;
        tcp.set_write_timeout(Some(IO_TIMEOUT))?;
        let conn = ServerConnection::new(self.inner.tls.clone())?;
        let mut tls = StreamOwned::new(conn, tcp);
        while tls.conn.is_handshaking() {
            if let Err(e) = tls.conn.complete_io(&mut tls.sock) {
                self.inner.store.audit(peer, "tls_rejected", &e.to_string())?;
                log::warn!("TLS handshake with {peer} failed: {e}");
                return Err(NodeError::Tls(e.to_string()));
            }
        }
        let result = self.inner.ingestor.receive(&mut tls, peer);
        tls.conn.send_close_notify();
        let _ = tls.flush();
        result
    }

    /// Accepts connections until `shutdown` is set. Uploads already being
    /// received when the flag is raised are completed; queued processing
    /// jobs finish before returning.
    pub fn serve(&self, listener: TcpListener, shutdown: Arc<AtomicBool>) -> Result<()> {
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let pool = Arc::new(WorkerPool::new(self.inner.config.workers, 64));
        for m in self.inner.store.manifests(Some(Status::Received))? {
            let node = self.clone();
            pool.execute(move || node.dispatch_logged(m.id));
        }
        let maintenance = self.spawn_maintenance(shutdown.clone());
        log::info!("fog node ready on {addr}");

        let mut connections: Vec<JoinHandle<()>> = Vec::new();
        while !shutdown.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((tcp, peer)) => {
                    tcp.set_nonblocking(false)?;
                    let (node, pool) = (self.clone(), pool.clone());
                    connections.push(std::thread::spawn(move || {
                        let peer = peer.to_string();
                        match node.handle_connection(tcp, &peer) {
                            Ok(Some(m)) => pool.execute(move || node.dispatch_logged(m.id)),
                            Ok(None) => {}
                            Err(e) => log::warn!("connection from {peer}: {e}"),
                        }
                    }));
                    connections.retain(|h| !h.is_finished());
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(20)),
                Err(e) => return Err(e.into()),
            }
        }
        for h in connections {
            let _ = h.join();
        }
        let _ = maintenance.join();
        if let Ok(pool) = Arc::try_unwrap(pool) {
            pool.join();
        }
        log::info!("fog node stopped");
        Ok(())
    }

    fn dispatch_logged(&self, id: i64) {
        if let Err(e) = self.dispatch(id) {
            log::error!("dispatch of manifest {id}: {e}");
        }
    }

    fn spawn_maintenance(&self, shutdown: Arc<AtomicBool>) -> JoinHandle<()> {
        let node = self.clone();
        let interval = node.inner.config.sync.as_ref().map_or(Duration::from_secs(60), |s| s.interval);
        std::thread::spawn(move || {
            let mut last: Option<Instant> = None;
            while !shutdown.load(Ordering::SeqCst) {
                if last.is_none_or(|t| t.elapsed() >= interval) {
                    last = Some(Instant::now());
                    let now = Utc::now();
                    if let Err(e) = node.sync_once(now) {
                        log::error!("sync pass: {e}");
                    }
                    if let Err(e) = node.prune(now) {
                        log::error!("retention pass: {e}");
                    }
                }
                std::thread::sleep(Duration::from_millis(50));
            }
        })
    }
}

/// A node serving on a background thread, for tests and embedding.
pub struct RunningNode {
    pub node: Node,
    pub addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    thread: Option<JoinHandle<Result<()>>>,
}

impl RunningNode {
    pub fn start(node: Node) -> Result<RunningNode> {
        let listener = TcpListener::bind(node.config().listen_addr)?;
        let addr = listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let thread = {
            let (node, shutdown) = (node.clone(), shutdown.clone());
            std::thread::spawn(move || node.serve(listener, shutdown))
        };
        Ok(RunningNode { node, addr, shutdown, thread: Some(thread) })
    }

    pub fn stop(mut self) -> Result<()> {
        self.halt()
    }

    fn halt(&mut self) -> Result<()> {
        self.shutdown.store(true, Ordering::SeqCst);
        match self.thread.take() {
            Some(t) => t.join().map_err(|_| NodeError::Sync("server thread panicked".into()))?,
            None => Ok(()),
        }
    }
}

impl Drop for RunningNode {
    fn drop(&mut self) {
        let _ = self.halt();
    }
}

/// Sends one upload over mutual TLS and returns the node's reply.
pub fn upload(addr: impl ToSocketAddrs, server_name: &str, config: Arc<ClientConfig>, upload: &Upload) -> Result<Reply> {
    let name = ServerName::try_from(server_name.to_owned()).map_err(|e| NodeError::input(format!("server name: {e}")))?;
    let tcp = TcpStream::connect(addr)?;
    tcp.set_read_timeout(Some(IO_TIMEOUT))?;
    tcp.set_write_timeout(Some(IO_TIMEOUT))?;
    let conn = ClientConnection::new(config, name)?;
    let mut tls = StreamOwned::new(conn, tcp);
    write_upload(&mut tls, upload)?;
    tls.flush()?;
    let mut reply = [0u8; 1];
    tls.read_exact(&mut reply)?;
    Reply::from_byte(reply[0]).ok_or_else(|| NodeError::Sync(format!("unexpected reply byte {}", reply[0])))
}
