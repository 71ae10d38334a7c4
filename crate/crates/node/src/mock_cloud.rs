//! A small in-process HTTP receiver standing in for the cloud endpoint.
//!
//! It stores one body per idempotency key, answering 201 for a new key and
//! 200 for a repeat, and can be switched to answer 503.

use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::sync::IDEMPOTENCY_HEADER;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Post {
    pub key: Option<String>,
    pub content_type: Option<String>,
    pub body: String,
    pub status: u16,
}

#[derive(Default)]
struct State {
    posts: Vec<Post>,
    stored: BTreeMap<String, String>,
}

pub struct MockCloud {
    addr: SocketAddr,
    state: Arc<Mutex<State>>,
    down: Arc<AtomicBool>,
    fail_next: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl MockCloud {
    pub fn start() -> io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let state = Arc::new(Mutex::new(State::default()));
        let down = Arc::new(AtomicBool::new(false));
        let fail_next = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let thread = {
            let (state, down, fail_next, stop) = (state.clone(), down.clone(), fail_next.clone(), stop.clone());
            std::thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            let _ = serve(stream, &state, &down, &fail_next);
                        }
                        Err(e) if e.kind() == io::ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(5)),
                        Err(_) => break,
                    }
                }
            })
        };
        Ok(MockCloud { addr, state, down, fail_next, stop, thread: Some(thread) })
    }

    pub fn url(&self) -> String {
        format!("http://{}/records", self.addr)
    }

    /// While down, every request gets 503.
    pub fn set_down(&self, down: bool) {
        self.down.store(down, Ordering::SeqCst);
    }

    /// The next `n` requests get 503.
    pub fn fail_next(&self, n: usize) {
        self.fail_next.store(n, Ordering::SeqCst);
    }

    pub fn posts(&self) -> Vec<Post> {
        self.state.lock().unwrap().posts.clone()
    }

    /// Accepted bodies by idempotency key.
    pub fn stored(&self) -> BTreeMap<String, String> {
        self.state.lock().unwrap().stored.clone()
    }
}

impl Drop for MockCloud {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn serve(stream: TcpStream, state: &Mutex<State>, down: &AtomicBool, fail_next: &AtomicUsize) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut head = Vec::new();
    while !head.ends_with(b"\r\n\r\n") {
        let n = reader.read_until(b'\n', &mut head)?;
        if n == 0 || head.len() > 64 * 1024 {
            return Ok(());
        }
    }
    let mut headers = [httparse::EMPTY_HEADER; 32];
    let mut req = httparse::Request::new(&mut headers);
    if !matches!(req.parse(&head), Ok(httparse::Status::Complete(_))) {
        return respond(stream, 400);
    }
    let header = |name: &str| {
        req.headers
            .iter()
            .find(|h| h.name.eq_ignore_ascii_case(name))
            .map(|h| String::from_utf8_lossy(h.value).into_owned())
    };
    let key = header(IDEMPOTENCY_HEADER);
    let content_type = header("content-type");
    let len: usize = header("content-length").and_then(|v| v.trim().parse().ok()).unwrap_or(0);
    let is_post = req.method == Some("POST");
    let mut body = vec![0; len];
    reader.read_exact(&mut body)?;
    let body = String::from_utf8_lossy(&body).into_owned();

    let failing = down.load(Ordering::SeqCst)
        || fail_next.fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1)).is_ok();
    let status = {
        let mut st = state.lock().unwrap();
        let status = if failing {
            503
        } else if !is_post || key.is_none() {
            400
        } else {
            let k = key.clone().unwrap_or_default();
            if let std::collections::btree_map::Entry::Vacant(e) = st.stored.entry(k) {
                e.insert(body.clone());
                201
            } else {
                200
            }
        };
        st.posts.push(Post { key, content_type, body, status });
        status
    };
    respond(stream, status)
}

fn respond(mut stream: TcpStream, status: u16) -> io::Result<()> {
    let reason = match status {
        200 => "OK",
        201 => "Created",
        400 => "Bad Request",
        _ => "Service Unavailable",
    };
    write!(stream, "HTTP/1.1 {status} {reason}\r\nContent-Length: 0\r\nConnection: close\r\n\r\n")?;
    stream.flush()
}
