use std::collections::HashMap;
use std::fs;
use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::codec::{self, DEFAULT_MAX_FRAME};
use super::{ErrorCode, InputSharesMsg, ResultsMsg, SetupShares, WireError, WireMessage};
use crate::protocol::{compute_cells, tamper_all};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: String,
    /// Where sessions are persisted; `None` keeps them in memory only.
    pub state_dir: Option<PathBuf>,
    /// Largest accepted frame, which bounds the matrix size of a setup.
    pub max_frame: usize,
    /// Idle time after which a connection is dropped.
    pub idle_timeout: Duration,
    /// If set, every result the daemon returns is offset by a random
    /// nonzero vector (for testing clients against a cheating server).
    pub tamper_seed: Option<u64>,
}

impl ServerConfig {
    pub fn new(bind: impl Into<String>) -> Self {
        Self {
            bind: bind.into(),
            state_dir: None,
            max_frame: DEFAULT_MAX_FRAME,
            idle_timeout: Duration::from_secs(60),
            tamper_seed: None,
        }
    }
}

/// Per-session function shares. Write-once.
#[derive(Debug, Default)]
pub struct StateStore {
    dir: Option<PathBuf>,
    sessions: RwLock<HashMap<u64, Arc<SetupShares>>>,
}

fn session_file(dir: &Path, session_id: u64) -> PathBuf {
    dir.join(format!("session-{session_id:016x}.setup"))
}

fn wire_error(code: ErrorCode, detail: impl Into<String>) -> WireError {
    WireError {
        code,
        detail: detail.into(),
    }
}

impl StateStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a state directory and loads every session
    /// stored in it.
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("setup") {
                continue;
            }
            let bytes = fs::read(&path)?;
            let invalid = |e: String| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display()));
            match codec::decode_message(&bytes).map_err(|e| invalid(e.to_string()))? {
                WireMessage::SetupShares(setup) => {
                    check_setup(&setup).map_err(|e| invalid(e.detail))?;
                    sessions.insert(setup.session_id, Arc::new(setup));
                }
                _ => return Err(invalid("not a setup frame".into())),
            }
        }
        Ok(Self {
            dir: Some(dir),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn get(&self, session_id: u64) -> Option<Arc<SetupShares>> {
        self.sessions.read().unwrap().get(&session_id).cloned()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stores a session; `frame` is its encoding, written as-is to disk.
    fn insert(&self, setup: SetupShares, frame: &[u8]) -> Result<(), WireError> {
        check_setup(&setup)?;
        let mut sessions = self.sessions.write().unwrap();
        if sessions.contains_key(&setup.session_id) {
            return Err(wire_error(
                ErrorCode::DUP_SETUP,
                format!("session {:016x} already set up", setup.session_id),
            ));
        }
        if let Some(dir) = &self.dir {
            let path = session_file(dir, setup.session_id);
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, frame)
                .and_then(|_| fs::rename(&tmp, &path))
                .map_err(|e| wire_error(ErrorCode::INTERNAL, format!("persisting session: {e}")))?;
        }
        sessions.insert(setup.session_id, Arc::new(setup));
        Ok(())
    }
}

fn check_setup(setup: &SetupShares) -> Result<(), WireError> {
    let slice = &setup.slice;
    if setup.rho.server() != slice.server {
        return Err(wire_error(ErrorCode::MALFORMED, "share and slice name different servers"));
    }
    if !setup.rho.indices().eq(slice.a_set.iter().copied()) {
        return Err(wire_error(ErrorCode::BAD_DIMS, "function shares do not match A"));
    }
    for &(u, v) in &slice.c_set {
        if !slice.a_set.contains(&u) || !slice.b_set.contains(&v) {
            return Err(wire_error(ErrorCode::MALFORMED, format!("cell ({u}, {v}) outside A x B")));
        }
    }
    let mut dims = setup.rho.iter().map(|(_, f)| (f.rows(), f.cols(), f.modulus().clone()));
    if let Some((rows, cols, _)) = dims.next() {
        for (r, c, q) in dims.chain(std::iter::once((rows, cols, setup.modulus.clone()))) {
            if (r, c) != (rows, cols) || q != setup.modulus {
                return Err(wire_error(ErrorCode::BAD_DIMS, "function shares differ in shape"));
            }
        }
    }
    Ok(())
}

struct Shared {
    store: StateStore,
    tamper: Option<Mutex<ChaCha20Rng>>,
    config: ServerConfig,
}

impl Shared {
    fn handle_input(&self, msg: InputSharesMsg) -> Result<WireMessage, WireError> {
        let session = self.store.get(msg.session_id).ok_or_else(|| {
            wire_error(
                ErrorCode::UNKNOWN_SESSION,
                format!("session {:016x} is not set up", msg.session_id),
            )
        })?;
        let slice = &session.slice;
        if msg.modulus != session.modulus {
            return Err(wire_error(ErrorCode::BAD_DIMS, "input uses a different modulus"));
        }
        if msg.sigma.server() != slice.server {
            return Err(wire_error(
                ErrorCode::MALFORMED,
                format!("this daemon is server {} for the session", slice.server),
            ));
        }
        if !msg.sigma.indices().eq(slice.b_set.iter().copied()) {
            return Err(wire_error(ErrorCode::BAD_DIMS, "input shares do not match B"));
        }
        let cols = session.rho.iter().next().map(|(_, f)| f.cols());
        if msg.sigma.iter().any(|(_, x)| Some(x.dim()) != cols) {
            return Err(wire_error(ErrorCode::BAD_DIMS, "input dimension differs from the matrix"));
        }
        let mut output = compute_cells(slice.server, &slice.c_set, &session.rho, &msg.sigma)
            .map_err(|e| wire_error(ErrorCode::INTERNAL, e.to_string()))?;
        if let Some(rng) = &self.tamper {
            tamper_all(&mut output, &session.modulus, &mut *rng.lock().unwrap());
        }
        Ok(WireMessage::Results(ResultsMsg {
            session_id: msg.session_id,
            request_id: msg.request_id,
            modulus: msg.modulus,
            output,
        }))
    }

    fn handle(&self, frame: &[u8]) -> WireMessage {
        let reply = match codec::decode_message(frame) {
            Err(e) => Err(wire_error(ErrorCode::MALFORMED, e.to_string())),
            Ok(WireMessage::SetupShares(setup)) => {
                let (session_id, server) = (setup.session_id, setup.slice.server);
                self.store
                    .insert(setup, frame)
                    .map(|()| WireMessage::SetupAck { session_id, server })
            }
            Ok(WireMessage::InputShares(msg)) => self.handle_input(msg),
            Ok(_) => Err(wire_error(ErrorCode::MALFORMED, "unexpected message type")),
        };
        reply.unwrap_or_else(WireMessage::Error)
    }

    fn connection(&self, stream: TcpStream) -> io::Result<()> {
        stream.set_read_timeout(Some(self.config.idle_timeout))?;
        stream.set_nodelay(true)?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        while let Some(frame) = codec::read_frame(&mut reader, self.config.max_frame)? {
            let reply = self.handle(&frame);
            codec::write_frame(&mut writer, &codec::encode_message(&reply))?;
        }
        Ok(())
    }
}

/// A daemon running on a background thread. Stops when dropped.
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        if let Some(thread) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            // Wake the accept loop.
            let _ = TcpStream::connect_timeout(&self.addr, Duration::from_secs(1));
            let _ = thread.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}

fn open_store(config: &ServerConfig) -> io::Result<StateStore> {
    match &config.state_dir {
        Some(dir) => StateStore::open(dir),
        None => Ok(StateStore::in_memory()),
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, stop: Arc<AtomicBool>) {
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let shared = Arc::clone(&shared);
        thread::spawn(move || {
            let _ = shared.connection(stream);
        });
    }
}

fn start(config: ServerConfig) -> io::Result<(TcpListener, Arc<Shared>)> {
    let listener = TcpListener::bind(&config.bind)?;
    let shared = Arc::new(Shared {
        store: open_store(&config)?,
        tamper: config.tamper_seed.map(|s| Mutex::new(ChaCha20Rng::seed_from_u64(s))),
        config,
    });
    Ok((listener, shared))
}

/// Binds and serves on a background thread.
pub fn spawn_server(config: ServerConfig) -> io::Result<ServerHandle> {
    let (listener, shared) = start(config)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    let thread = thread::spawn(move || accept_loop(listener, shared, flag));
    Ok(ServerHandle {
        addr,
        stop,
        thread: Some(thread),
    })
}

/// Binds and serves on the calling thread until the process exits.
/// `on_ready` receives the bound address.
pub fn serve(config: ServerConfig, on_ready: impl FnOnce(SocketAddr)) -> io::Result<()> {
    let (listener, shared) = start(config)?;
    on_ready(listener.local_addr()?);
    accept_loop(listener, shared, Arc::new(AtomicBool::new(false)));
    Ok(())
}
