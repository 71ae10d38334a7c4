//! Fixed-size worker pool fed through a bounded queue.

use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

type Job = Box<dyn FnOnce() + Send>;

pub struct WorkerPool {
    tx: Option<SyncSender<Job>>,
    workers: Vec<JoinHandle<()>>,
}

impl WorkerPool {
    /// `threads` workers sharing a queue of at most `queue` pending jobs;
    /// [`execute`](Self::execute) blocks while the queue is full.
    pub fn new(threads: usize, queue: usize) -> Self {
        let (tx, rx) = sync_channel::<Job>(queue.max(1));
        let rx = Arc::new(Mutex::new(rx));
        let workers = (0..threads.max(1))
            .map(|i| {
                let rx: Arc<Mutex<Receiver<Job>>> = rx.clone();
                std::thread::Builder::new()
                    .name(format!("fog-worker-{i}"))
                    .spawn(move || loop {
                        let job = rx.lock().unwrap_or_else(|p| p.into_inner()).recv();
                        match job {
                            Ok(job) => {
                                if std::panic::catch_unwind(std::panic::AssertUnwindSafe(job)).is_err() {
                                    log::error!("worker job panicked");
                                }
                            }
                            Err(_) => break,
                        }
                    })
                    .expect("spawn worker thread")
            })
            .collect();
        WorkerPool { tx: Some(tx), workers }
    }

    pub fn execute(&self, job: impl FnOnce() + Send + 'static) {
        if let Some(tx) = &self.tx {
            let _ = tx.send(Box::new(job));
        }
    }

    /// Finishes queued jobs and stops the workers.
    pub fn join(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.tx.take();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for WorkerPool {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Applies `f` to every item on `threads` workers, preserving order.
pub fn map_ordered<T, R, F>(items: Vec<T>, threads: usize, f: F) -> Vec<R>
where
    T: Send + 'static,
    R: Send + 'static,
    F: Fn(T) -> R + Send + Sync + 'static,
{
    let n = items.len();
    let f = Arc::new(f);
    let (tx, rx) = std::sync::mpsc::channel();
    let pool = WorkerPool::new(threads.min(n.max(1)), n.max(1));
    for (i, item) in items.into_iter().enumerate() {
        let (f, tx) = (f.clone(), tx.clone());
        pool.execute(move || {
            let _ = tx.send((i, f(item)));
        });
    }
    drop(tx);
    pool.join();
    let mut out: Vec<(usize, R)> = rx.into_iter().collect();
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, r)| r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn runs_every_job() {
        let count = Arc::new(AtomicUsize::new(0));
        let pool = WorkerPool::new(3, 2);
        for _ in 0..50 {
            let c = count.clone();
            pool.execute(move || {
                c.fetch_add(1, Ordering::SeqCst);
            });
        }
        pool.join();
        assert_eq!(count.load(Ordering::SeqCst), 50);
    }

    #[test]
    fn survives_panicking_job() {
        let count = Arc::new(AtomicUsize::new(0));
        let pool = WorkerPool::new(1, 4);
        pool.execute(|| panic!("boom"));
        let c = count.clone();
        pool.execute(move || {
            c.fetch_add(1, Ordering::SeqCst);
        });
        pool.join();
        assert_eq!(count.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn ordered_map() {
        assert_eq!(map_ordered((0..20).collect(), 4, |x: i32| x * x), (0..20).map(|x| x * x).collect::<Vec<_>>());
        assert!(map_ordered(Vec::<i32>::new(), 4, |x| x).is_empty());
    }
}
