mod common;

use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::Duration;

use chrono::{Duration as Days, Utc};
use common::{node_config, wait_for, Pki};
use fog_node::auth::{authenticate, download_raw, query_features, Role, UserRecord};
use fog_node::corpus;
use fog_node::mock_cloud::MockCloud;
use fog_node::node::{upload, Node, RunningNode};
use fog_node::protocol::{encode_upload, DataKind, Reply, Upload};
use fog_node::records::FeaturePayload;
use fog_node::store::{history_is_forward, QueryFilter, Status};
use fog_node::sync::SyncOutcome;
use fog_node::NodeError;
use sha2::{Digest, Sha256};

fn speech_bytes() -> Vec<u8> {
    corpus::speech_file(0, 5.0, 7).unwrap().bytes
}

#[test]
fn upload_process_and_sync_over_mutual_tls() {
    let dir = tempfile::tempdir().unwrap();
    let pki = Pki::create(&dir.path().join("pki"));
    let cloud = MockCloud::start().unwrap();
    let node = Node::open(node_config(&pki, &dir.path().join("data"), Some(&cloud.url()))).unwrap();
    let running = RunningNode::start(node.clone()).unwrap();

    let bytes = speech_bytes();
    let up = Upload::new(DataKind::Speech, "p001", "t1", bytes.clone());
    assert_eq!(upload(running.addr, "localhost", pki.client(), &up).unwrap(), Reply::Ok);

    let store = node.store().clone();
    assert!(wait_for(Duration::from_secs(20), || store.manifests(Some(Status::Synced)).unwrap().len() == 1));
    let m = &store.manifests(None).unwrap()[0];
    assert_eq!(m.sha256, hex::encode(Sha256::digest(&bytes)));
    assert_eq!(m.size_bytes, bytes.len() as u64);
    let stamp = m.received_at.format("%Y%m%dT%H%M%S%.3fZ").to_string();
    assert_eq!(m.stored_name, format!("p001_t1_{stamp}.wav"));
    assert_eq!(std::fs::read(node.dirs().raw_path(m)).unwrap(), bytes);

    let posts = cloud.posts();
    assert_eq!(posts.len(), 1);
    assert_eq!(posts[0].key.as_deref(), Some(m.sha256.as_str()));
    assert_eq!(posts[0].content_type.as_deref(), Some("application/json"));
    assert_eq!(posts[0].body, store.record_json(m.id).unwrap().unwrap());
    assert!(matches!(store.feature_record(m.id).unwrap().unwrap().payload, FeaturePayload::Speech(_)));
    assert!(history_is_forward(&store.transitions(Some(m.id)).unwrap()));
    running.stop().unwrap();
}

#[test]
fn tampered_plaintext_and_untrusted_uploads_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let pki = Pki::create(&dir.path().join("pki"));
    let node = Node::open(node_config(&pki, &dir.path().join("data"), None)).unwrap();
    let running = RunningNode::start(node.clone()).unwrap();

    let mut up = Upload::new(DataKind::Pcg, "p001", "pcg", corpus::pcg_file(0.8, 1).unwrap().bytes);
    up.payload[100] ^= 0x01;
    assert_eq!(upload(running.addr, "localhost", pki.client(), &up).unwrap(), Reply::ChecksumFail);

    // Speaking the upload protocol without TLS gets nothing accepted.
    let mut plain = TcpStream::connect(running.addr).unwrap();
    plain.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    let frame = encode_upload(&Upload::new(DataKind::Pcg, "p001", "pcg", vec![1, 2, 3])).unwrap();
    let _ = plain.write_all(&frame);
    let mut buf = [0u8; 16];
    let n = plain.read(&mut buf).unwrap_or(0);
    assert!(n == 0 || buf[0] == 0x15, "plaintext peer got {:?}", &buf[..n]);

    let rogue = upload(running.addr, "localhost", pki.rogue_client(), &Upload::new(DataKind::Pcg, "p001", "pcg", vec![1]));
    assert!(rogue.is_err());

    let store = node.store().clone();
    assert!(wait_for(Duration::from_secs(5), || {
        store.audit_log().unwrap().iter().filter(|a| a.action == "tls_rejected").count() >= 2
    }));
    assert!(store.audit_log().unwrap().iter().any(|a| a.action == "upload_rejected"));
    assert!(store.manifests(None).unwrap().is_empty());
    running.stop().unwrap();
}

#[test]
fn missing_certificate_refuses_startup() {
    let dir = tempfile::tempdir().unwrap();
    let pki = Pki::create(&dir.path().join("pki"));
    let mut cfg = node_config(&pki, &dir.path().join("data"), None);
    cfg.server_cert = dir.path().join("absent.pem");
    assert!(matches!(Node::open(cfg), Err(NodeError::Config(_))));
}

#[test]
fn dispatch_routes_by_kind_and_keeps_failures() {
    let dir = tempfile::tempdir().unwrap();
    let pki = Pki::create(&dir.path().join("pki"));
    let node = Node::open(node_config(&pki, &dir.path().join("data"), None)).unwrap();
    let ing = node.ingestor();
    let pcg = ing.persist(&Upload::new(DataKind::Pcg, "p1", "pcg", corpus::pcg_file(0.8, 2).unwrap().bytes), None).unwrap();
    let ecg = ing.persist(&Upload::new(DataKind::Ecg, "p1", "ecg", corpus::ecg_file(10.0, 2).bytes), None).unwrap();
    let corrupt = ing.persist(&Upload::new(DataKind::Speech, "p1", "t2", b"RIFF\x10\0\0\0WAVEfmt oops".to_vec()), None).unwrap();
    let mut odd = Upload::new(DataKind::Pcg, "p1", "x", vec![9; 64]);
    odd.kind_code = 42;
    let unknown = ing.persist(&odd, None).unwrap();

    let out = node.process_pending().unwrap();
    assert_eq!(out.len(), 4);
    let store = node.store();
    match store.feature_record(pcg.id).unwrap().unwrap().payload {
        FeaturePayload::Pcg(hr) => assert!((hr.median_bpm().unwrap() - 75.0).abs() <= 2.0),
        other => panic!("{other:?}"),
    }
    assert!(matches!(store.feature_record(ecg.id).unwrap().unwrap().payload, FeaturePayload::Ecg(_)));
    for id in [corrupt.id, unknown.id] {
        let m = store.manifest(id).unwrap().unwrap();
        assert_eq!(m.status, Status::Failed);
        assert!(m.reason.is_some());
        assert!(node.dirs().raw_path(&m).exists(), "raw kept for re-dispatch");
        assert!(store.feature_record(id).unwrap().is_none());
    }
    // Re-dispatching a failed upload runs the pipeline again.
    assert_eq!(node.dispatch(corrupt.id).unwrap().status, Status::Failed);
    assert!(node.dispatch(pcg.id).is_err(), "processed manifests are not dispatched twice");
}

#[test]
fn sync_survives_outage_without_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let pki = Pki::create(&dir.path().join("pki"));
    let cloud = MockCloud::start().unwrap();
    let mut cfg = node_config(&pki, &dir.path().join("data"), Some(&cloud.url()));
    if let Some(s) = cfg.sync.as_mut() {
        s.backoff_base = Duration::from_secs(5);
    }
    let node = Node::open(cfg).unwrap();
    let m = node.ingestor().persist(&Upload::new(DataKind::Pcg, "p1", "pcg", corpus::pcg_file(0.6, 3).unwrap().bytes), None).unwrap();
    node.process_pending().unwrap();

    cloud.set_down(true);
    let t0 = Utc::now();
    let r = node.sync_once(t0).unwrap();
    assert_eq!(r[0].outcome, SyncOutcome::Retry);
    assert_eq!(r[0].status, Some(503));
    // Not due again until the backoff passes: 5 s, then 10 s.
    assert!(node.sync_once(t0 + Days::seconds(4)).unwrap().is_empty());
    assert_eq!(node.sync_once(t0 + Days::seconds(6)).unwrap()[0].outcome, SyncOutcome::Retry);
    assert!(node.sync_once(t0 + Days::seconds(15)).unwrap().is_empty());
    assert_eq!(node.store().manifest(m.id).unwrap().unwrap().status, Status::Processed);

    cloud.set_down(false);
    let r = node.sync_once(t0 + Days::seconds(17)).unwrap();
    assert_eq!((r[0].outcome, r[0].status), (SyncOutcome::Synced, Some(201)));
    assert!(node.sync_once(t0 + Days::days(1)).unwrap().is_empty());
    assert_eq!(cloud.stored().len(), 1);
    assert_eq!(cloud.posts().iter().filter(|p| p.status == 201).count(), 1);
}

#[test]
fn retries_stop_after_max_attempts_until_restart() {
    let dir = tempfile::tempdir().unwrap();
    let pki = Pki::create(&dir.path().join("pki"));
    let cloud = MockCloud::start().unwrap();
    let cfg = node_config(&pki, &dir.path().join("data"), Some(&cloud.url()));
    let node = Node::open(cfg.clone()).unwrap();
    node.ingestor().persist(&Upload::new(DataKind::Ecg, "p1", "ecg", corpus::ecg_file(10.0, 4).bytes), None).unwrap();
    node.process_pending().unwrap();
    cloud.set_down(true);
    let now = Utc::now();
    let outcomes: Vec<SyncOutcome> = (0..5).map(|_| node.sync_once(now).unwrap()[0].outcome).collect();
    assert_eq!(outcomes.last(), Some(&SyncOutcome::Exhausted));
    assert!(node.sync_once(now).unwrap().is_empty(), "left pending after five attempts");
    cloud.set_down(false);
    drop(node);
    let node = Node::open(cfg).unwrap();
    assert_eq!(node.sync_once(Utc::now()).unwrap()[0].outcome, SyncOutcome::Synced);
}

#[test]
fn duplicate_submissions_are_stored_once() {
    let cloud = MockCloud::start().unwrap();
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().new_agent();
    let codes: Vec<u16> = (0..3)
        .map(|_| agent.post(&cloud.url()).header("X-Idempotency-Key", "abc").send("{}").unwrap().status().as_u16())
        .collect();
    assert_eq!(codes, vec![201, 200, 200]);
    assert_eq!(cloud.stored().len(), 1);
}

#[test]
fn retention_prunes_only_processed_raw_files() {
    let dir = tempfile::tempdir().unwrap();
    let pki = Pki::create(&dir.path().join("pki"));
    let node = Node::open(node_config(&pki, &dir.path().join("data"), None)).unwrap();
    let store = node.store();
    let done = node.ingestor().persist(&Upload::new(DataKind::Pcg, "p1", "pcg", corpus::pcg_file(0.8, 5).unwrap().bytes), None).unwrap();
    node.process_pending().unwrap();
    let waiting = node.ingestor().persist(&Upload::new(DataKind::Pcg, "p1", "pcg", corpus::pcg_file(0.8, 6).unwrap().bytes), None).unwrap();

    let later = Utc::now() + Days::days(15);
    assert_eq!(node.prune(Utc::now() + Days::days(13)).unwrap().removed, 0);
    let report = node.prune(later).unwrap();
    assert_eq!(report.removed, 1);
    let done = store.manifest(done.id).unwrap().unwrap();
    assert!(!done.raw_present && !node.dirs().raw_path(&done).exists());
    assert!(store.feature_record(done.id).unwrap().is_some(), "record outlives its raw file");
    assert!(node.dirs().raw_path(&waiting).exists(), "unprocessed raw is never pruned");
    assert_eq!(node.prune(later).unwrap().removed, 0);
}

#[test]
fn zero_day_retention_prunes_right_after_processing() {
    let dir = tempfile::tempdir().unwrap();
    let pki = Pki::create(&dir.path().join("pki"));
    let mut cfg = node_config(&pki, &dir.path().join("data"), None);
    cfg.retention_days = 0;
    let node = Node::open(cfg).unwrap();
    let m = node.ingestor().persist(&Upload::new(DataKind::Ecg, "p1", "ecg", corpus::ecg_file(10.0, 5).bytes), None).unwrap();
    node.process_pending().unwrap();
    assert!(!node.dirs().raw_path(&m).exists());
    assert!(node.store().feature_record(m.id).unwrap().is_some());
}

#[test]
fn role_rules_for_queries_and_raw_download() {
    let dir = tempfile::tempdir().unwrap();
    let pki = Pki::create(&dir.path().join("pki"));
    let node = Node::open(node_config(&pki, &dir.path().join("data"), None)).unwrap();
    let store = node.store();
    store.add_user(&UserRecord::new("dr_a", Role::Clinician, None, "pw-a").unwrap()).unwrap();
    store.add_user(&UserRecord::new("dr_b", Role::Clinician, None, "pw-b").unwrap()).unwrap();
    store.add_user(&UserRecord::new("admin", Role::Admin, None, "pw-admin").unwrap()).unwrap();
    store.add_user(&UserRecord::new("p1", Role::Patient, Some("dr_a"), "pw-1").unwrap()).unwrap();
    store.add_user(&UserRecord::new("p2", Role::Patient, Some("dr_b"), "pw-2").unwrap()).unwrap();
    assert!(store.add_user(&UserRecord::new("p3", Role::Patient, Some("nobody"), "pw").unwrap()).is_err());

    let mut ids = Vec::new();
    for (p, seed) in [("p1", 1), ("p1", 2), ("p2", 3)] {
        let bytes = corpus::speech_file(0, 2.0, seed).unwrap().bytes;
        ids.push(node.ingestor().persist(&Upload::new(DataKind::Speech, p, "t1", bytes), None).unwrap().id);
    }
    node.process_pending().unwrap();

    assert!(authenticate(store, "p1", "wrong").is_err());
    let p1 = authenticate(store, "p1", "pw-1").unwrap();
    let dr_a = authenticate(store, "dr_a", "pw-a").unwrap();
    let dr_b = authenticate(store, "dr_b", "pw-b").unwrap();
    let admin = authenticate(store, "admin", "pw-admin").unwrap();
    let all = QueryFilter::default();
    let only = |p: &str| QueryFilter { patient_id: Some(p.into()), ..Default::default() };

    assert_eq!(query_features(store, &p1, &all).unwrap().len(), 2);
    assert_eq!(query_features(store, &p1, &only("p1")).unwrap().len(), 2);
    assert!(matches!(query_features(store, &p1, &only("p2")), Err(NodeError::Denied(_))));
    assert_eq!(query_features(store, &dr_a, &all).unwrap().len(), 2);
    assert!(matches!(query_features(store, &dr_a, &only("p2")), Err(NodeError::Denied(_))));
    assert_eq!(query_features(store, &dr_b, &only("p2")).unwrap().len(), 1);
    assert_eq!(query_features(store, &admin, &all).unwrap().len(), 3);
    let today = Utc::now().date_naive();
    let tomorrow = QueryFilter { from: Some(today + Days::days(1)), ..Default::default() };
    assert!(query_features(store, &admin, &tomorrow).unwrap().is_empty());
    let dated = QueryFilter { from: Some(today), to: Some(today), task_id: Some("t1".into()), ..Default::default() };
    assert_eq!(query_features(store, &admin, &dated).unwrap().len(), 3);

    // Every record is visible to its patient and to one clinician.
    for id in &ids {
        let rec = store.feature_record(*id).unwrap().unwrap();
        let owner = authenticate(store, &rec.manifest.patient_id, if rec.manifest.patient_id == "p1" { "pw-1" } else { "pw-2" }).unwrap();
        assert!(query_features(store, &owner, &all).unwrap().contains(&rec));
        assert!([&dr_a, &dr_b].iter().any(|c| query_features(store, c, &all).unwrap().contains(&rec)));
    }

    assert!(matches!(download_raw(store, &node.dirs().raw, &p1, ids[0]), Err(NodeError::Denied(_))));
    assert!(matches!(download_raw(store, &node.dirs().raw, &dr_a, ids[2]), Err(NodeError::Denied(_))));
    assert!(!download_raw(store, &node.dirs().raw, &dr_a, ids[0]).unwrap().is_empty());
    let denials = store.audit_log().unwrap().into_iter().filter(|a| a.action.contains("denied")).count();
    assert!(denials >= 4, "{denials}");
}
