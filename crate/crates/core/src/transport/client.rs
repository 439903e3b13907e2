use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::thread;
use std::time::Duration;

use rand::RngCore;

use super::codec::{self, DEFAULT_MAX_FRAME};
use super::{ErrorCode, InputSharesMsg, SetupShares, TransportError, WireMessage};
use crate::covering::CoveringScheme;
use crate::field::{FieldModulus, FieldVector};
use crate::protocol::{Client, FunctionKeyMaterial, InputShare, ServerOutput, Servers, VerifyOutcome};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

fn connect(endpoint: &str, timeout: Duration) -> Result<TcpStream, TransportError> {
    let addrs = endpoint
        .to_socket_addrs()
        .map_err(|e| TransportError::from_io(endpoint, e))?;
    let mut last = None;
    for addr in addrs {
        match TcpStream::connect_timeout(&addr, timeout) {
            Ok(stream) => return Ok(stream),
            Err(e) => last = Some(e),
        }
    }
    Err(TransportError::from_io(
        endpoint,
        last.unwrap_or_else(|| std::io::Error::new(std::io::ErrorKind::NotFound, "no address")),
    ))
}

/// Sends one frame and reads one reply.
fn exchange(endpoint: &str, frame: &[u8], timeout: Duration, max_frame: usize) -> Result<WireMessage, TransportError> {
    let stream = connect(endpoint, timeout)?;
    let io = |e| TransportError::from_io(endpoint, e);
    stream.set_read_timeout(Some(timeout)).map_err(io)?;
    stream.set_write_timeout(Some(timeout)).map_err(io)?;
    stream.set_nodelay(true).map_err(io)?;
    let mut writer = BufWriter::new(stream.try_clone().map_err(io)?);
    codec::write_frame(&mut writer, frame).map_err(io)?;
    let reply = codec::read_frame(&mut BufReader::new(stream), max_frame)
        .map_err(io)?
        .ok_or_else(|| TransportError::Protocol {
            endpoint: endpoint.to_string(),
            detail: "connection closed without a reply".into(),
        })?;
    let msg = codec::decode_message(&reply).map_err(|source| TransportError::Codec {
        endpoint: endpoint.to_string(),
        source,
    })?;
    match msg {
        WireMessage::Error(e) => Err(TransportError::Remote {
            endpoint: endpoint.to_string(),
            code: e.code,
            detail: e.detail,
        }),
        other => Ok(other),
    }
}

/// The setup message for every server of `scheme`.
pub fn setup_messages(keys: &FunctionKeyMaterial, scheme: &CoveringScheme, session_id: u64) -> Vec<SetupShares> {
    let digest = scheme.digest();
    keys.rho
        .iter()
        .map(|rho| SetupShares {
            session_id,
            digest,
            modulus: keys.modulus().clone(),
            slice: scheme.slice(rho.server()).expect("key generation follows the scheme"),
            rho: rho.clone(),
        })
        .collect()
}

/// Daemons reached over TCP; endpoint `l - 1` is server `l`.
#[derive(Debug, Clone)]
pub struct RemoteServers {
    endpoints: Vec<String>,
    session_id: u64,
    modulus: FieldModulus,
    timeout: Duration,
    max_frame: usize,
    next_request: u64,
}

impl RemoteServers {
    pub fn new(endpoints: Vec<String>, session_id: u64, modulus: FieldModulus) -> Self {
        Self {
            endpoints,
            session_id,
            modulus,
            timeout: DEFAULT_TIMEOUT,
            max_frame: DEFAULT_MAX_FRAME,
            next_request: 1,
        }
    }

    /// Connect, read and write timeout for each exchange.
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn endpoints(&self) -> &[String] {
        &self.endpoints
    }

    pub fn session_id(&self) -> u64 {
        self.session_id
    }

    fn check_count(&self, expected: usize) -> Result<(), TransportError> {
        if self.endpoints.len() != expected {
            return Err(TransportError::EndpointCount {
                expected,
                found: self.endpoints.len(),
            });
        }
        Ok(())
    }

    /// Sends every server its setup. A server that already holds the
    /// session counts as provisioned.
    pub fn provision(&self, setups: &[SetupShares]) -> Result<(), TransportError> {
        self.check_count(setups.len())?;
        let frames: Vec<Vec<u8>> = setups.iter().map(|s| codec::encode_message(&WireMessage::SetupShares(s.clone()))).collect();
        thread::scope(|scope| {
            let handles: Vec<_> = self
                .endpoints
                .iter()
                .zip(&frames)
                .map(|(endpoint, frame)| scope.spawn(move || exchange(endpoint, frame, self.timeout, self.max_frame)))
                .collect();
            for (handle, endpoint) in handles.into_iter().zip(&self.endpoints) {
                match handle.join().expect("exchange thread panicked") {
                    Ok(WireMessage::SetupAck { .. }) => {}
                    Err(TransportError::Remote {
                        code: ErrorCode::DUP_SETUP,
                        ..
                    }) => {}
                    Ok(other) => {
                        return Err(TransportError::Protocol {
                            endpoint: endpoint.clone(),
                            detail: format!("unexpected reply to setup: {other:?}"),
                        })
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(())
        })
    }
}

impl Servers for RemoteServers {
    type Error = TransportError;

    fn compute_all(&mut self, sigma: &[InputShare]) -> Result<Vec<ServerOutput>, TransportError> {
        self.check_count(sigma.len())?;
        let request_id = self.next_request;
        self.next_request += 1;
        let frames: Vec<Vec<u8>> = sigma
            .iter()
            .map(|s| {
                codec::encode_message(&WireMessage::InputShares(InputSharesMsg {
                    session_id: self.session_id,
                    request_id,
                    modulus: self.modulus.clone(),
                    sigma: s.clone(),
                }))
            })
            .collect();
        let this = &*self;
        thread::scope(|scope| {
            let handles: Vec<_> = this
                .endpoints
                .iter()
                .zip(&frames)
                .map(|(endpoint, frame)| scope.spawn(move || exchange(endpoint, frame, this.timeout, this.max_frame)))
                .collect();
            let mut outputs = Vec::with_capacity(handles.len());
            for ((handle, endpoint), s) in handles.into_iter().zip(&this.endpoints).zip(sigma) {
                let reply = handle.join().expect("exchange thread panicked")?;
                let protocol = |detail: String| TransportError::Protocol {
                    endpoint: endpoint.clone(),
                    detail,
                };
                match reply {
                    WireMessage::Results(r)
                        if r.session_id == this.session_id
                            && r.request_id == request_id
                            && r.output.server() == s.server()
                            && r.modulus == this.modulus =>
                    {
                        outputs.push(r.output)
                    }
                    WireMessage::Results(_) => return Err(protocol("results for a different request".into())),
                    other => return Err(protocol(format!("unexpected reply: {other:?}"))),
                }
            }
            Ok(outputs)
        })
    }
}

/// Delegates `F x` to daemons that already hold session `session_id`.
pub fn delegate_remote<R: RngCore + ?Sized>(
    endpoints: &[String],
    session_id: u64,
    keys: FunctionKeyMaterial,
    x: &FieldVector,
    scheme: &CoveringScheme,
    timeout: Duration,
    rng: &mut R,
) -> Result<VerifyOutcome, TransportError> {
    let servers = RemoteServers::new(endpoints.to_vec(), session_id, keys.modulus().clone()).with_timeout(timeout);
    Client::new(scheme.clone(), keys, servers).delegate(x, rng)
}
