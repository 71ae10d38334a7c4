//! Crash-injection harness: seeded schedules of ingest, process and sync
//! steps with a panic injected at a chosen crash point, followed by a
//! restart and a check of what survived.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex, Once};

use chrono::Utc;
use fog_node::config::NodeConfig;
use fog_node::corpus;
use fog_node::faults::{CrashPoint, Faults};
use fog_node::mock_cloud::MockCloud;
use fog_node::node::Node;
use fog_node::protocol::{DataKind, Upload};
use fog_node::store::{history_is_forward, Status, Store};

use super::{node_config, Pki};

const CRASH: &str = "injected crash";

pub fn quiet_injected_panics() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| {
        let default = std::panic::take_hook();
        std::panic::set_hook(Box::new(move |info| {
            if info.payload().downcast_ref::<&str>() != Some(&CRASH) {
                default(info);
            }
        }));
    });
}

/// SplitMix64, enough to drive the schedules.
struct Rng(u64);

impl Rng {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }
}

type Armed = Arc<Mutex<Option<(CrashPoint, usize)>>>;

fn hook(armed: &Armed) -> Faults {
    let armed = armed.clone();
    Faults::with(Arc::new(move |point| {
        let mut a = armed.lock().unwrap_or_else(|p| p.into_inner());
        if let Some((target, left)) = a.as_mut() {
            if *target == point {
                if *left == 0 {
                    *a = None;
                    drop(a);
                    std::panic::panic_any(CRASH);
                }
                *left -= 1;
            }
        }
    }))
}

pub fn payload(trial: u64, k: u64) -> Upload {
    let seed = trial * 1000 + k;
    if k % 3 == 2 {
        Upload::new(DataKind::Ecg, "p1", "ecg", corpus::ecg_file(10.0, seed).bytes)
    } else {
        Upload::new(DataKind::Pcg, &format!("p{}", k % 2 + 1), "pcg", corpus::pcg_file(0.8, seed).unwrap().bytes)
    }
}

/// Everything a restart must guarantee, checked on the final state.
pub fn check_invariants(store: &Store, cfg: &NodeConfig, acknowledged: &BTreeSet<String>, cloud: &MockCloud) {
    let manifests = store.manifests(None).unwrap();
    let shas: BTreeSet<String> = manifests.iter().map(|m| m.sha256.clone()).collect();
    assert_eq!(shas.len(), manifests.len(), "one manifest per upload");
    for sha in acknowledged {
        assert!(shas.contains(sha), "acknowledged upload {sha} lost");
    }
    for m in &manifests {
        assert_eq!(m.status, Status::Synced, "manifest {} stuck in {}", m.id, m.status);
        assert!(store.feature_record(m.id).unwrap().is_some());
        assert!(history_is_forward(&store.transitions(Some(m.id)).unwrap()));
    }
    let mut created: BTreeMap<String, usize> = BTreeMap::new();
    for p in cloud.posts().iter().filter(|p| p.status == 201) {
        *created.entry(p.key.clone().unwrap()).or_default() += 1;
    }
    assert!(created.values().all(|&n| n == 1), "duplicate synced record");
    assert_eq!(created.keys().cloned().collect::<BTreeSet<_>>(), shas);
    assert_eq!(std::fs::read_dir(cfg.data_dir.join("tmp")).unwrap().count(), 0);
    for entry in std::fs::read_dir(cfg.data_dir.join("raw")).unwrap() {
        let name = entry.unwrap().file_name().to_string_lossy().into_owned();
        assert!(store.manifest_by_stored_name(&name).unwrap().is_some(), "orphan raw file {name}");
    }
}

/// Returns the crash points that fired.
pub fn run_trial(trial: u64, pki: &Pki, root: &std::path::Path) -> Vec<CrashPoint> {
    let mut rng = Rng(trial.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ 0xfeed);
    let cloud = MockCloud::start().unwrap();
    let cfg = node_config(pki, &root.join(format!("trial{trial}")), Some(&cloud.url()));
    let armed: Armed = Arc::new(Mutex::new(None));
    let mut node = Node::open_with_faults(cfg.clone(), hook(&armed)).unwrap();
    let mut acknowledged = BTreeSet::new();
    let mut crashes = 0;
    let mut fired = Vec::new();
    let mut next_upload = 0;
    *armed.lock().unwrap() = Some((CrashPoint::ALL[rng.below(CrashPoint::ALL.len())], rng.below(2)));

    for _ in 0..(6 + rng.below(6)) {
        let target = armed.lock().unwrap().map(|(p, _)| p);
        if rng.below(4) == 0 {
            cloud.fail_next(1);
        }
        let step = rng.below(3);
        let result = catch_unwind(AssertUnwindSafe(|| match step {
            0 => {
                let up = payload(trial, next_upload);
                next_upload += 1;
                if node.ingestor().persist(&up, None).is_ok() {
                    acknowledged.insert(up.sha256_hex());
                }
            }
            1 => {
                let received = node.store().manifests(Some(Status::Received)).unwrap();
                if !received.is_empty() {
                    let _ = node.dispatch(received[rng.below(received.len())].id);
                }
            }
            _ => {
                let _ = node.sync_once(Utc::now());
            }
        }));
        if result.is_err() {
            crashes += 1;
            fired.extend(target);
            drop(node);
            node = Node::open_with_faults(cfg.clone(), hook(&armed)).unwrap();
            if crashes < 2 && rng.below(2) == 0 {
                *armed.lock().unwrap() = Some((CrashPoint::ALL[rng.below(CrashPoint::ALL.len())], rng.below(2)));
            }
        }
    }

    *armed.lock().unwrap() = None;
    drop(node);
    let node = Node::open(cfg.clone()).unwrap();
    node.process_pending().unwrap();
    for _ in 0..5 {
        node.sync_once(Utc::now()).unwrap();
    }
    check_invariants(node.store(), &cfg, &acknowledged, &cloud);
    fired
}
