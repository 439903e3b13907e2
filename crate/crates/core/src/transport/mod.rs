//! Running the servers as network daemons.
//!
//! Each daemon holds the function shares of one server for any number of
//! sessions. A session is set up once with [`SetupShares`] (persisted if the
//! daemon has a state directory) and then answers [`InputSharesMsg`]
//! requests with [`ResultsMsg`]. The client side is [`RemoteServers`], which
//! plugs into [`crate::protocol::Client`].
//!
//! Connections are plain TCP. Servers learn nothing from their shares, so
//! the channel needs no encryption for privacy against the servers; channel
//! security against outsiders is left to the deployment.

mod client;
pub mod codec;
mod server;

use std::fmt;
use std::io;

use thiserror::Error;

pub use client::{delegate_remote, setup_messages, RemoteServers, DEFAULT_TIMEOUT};
pub use codec::{decode_message, decode_stored_key, encode_message, encode_stored_key, CodecError};
pub use server::{serve, spawn_server, ServerConfig, ServerHandle, StateStore};

use crate::covering::ServerSlice;
use crate::field::{FieldModulus, FieldVector};
use crate::protocol::{FunctionShare, FunctionVerificationKey, InputShare, ServerOutput};

/// Environment variable that overrides a daemon's state directory.
pub const STATE_DIR_ENV: &str = "MSVC_STATE_DIR";

/// Stable error codes carried by [`WireError`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ErrorCode(pub u16);

impl ErrorCode {
    pub const UNKNOWN_SESSION: Self = Self(1);
    pub const BAD_DIMS: Self = Self(2);
    pub const DUP_SETUP: Self = Self(3);
    pub const MALFORMED: Self = Self(4);
    pub const INTERNAL: Self = Self(5);

    pub fn name(self) -> Option<&'static str> {
        Some(match self {
            Self::UNKNOWN_SESSION => "UNKNOWN_SESSION",
            Self::BAD_DIMS => "BAD_DIMS",
            Self::DUP_SETUP => "DUP_SETUP",
            Self::MALFORMED => "MALFORMED",
            Self::INTERNAL => "INTERNAL",
            _ => return None,
        })
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            Some(name) => f.write_str(name),
            None => write!(f, "error {}", self.0),
        }
    }
}

/// Preprocessing: server `slice.server`'s function shares for one session.
/// `rho.server()` equals `slice.server`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetupShares {
    pub session_id: u64,
    /// Digest of the full covering scheme, for the operator's benefit.
    pub digest: [u8; 32],
    pub modulus: FieldModulus,
    pub slice: ServerSlice,
    pub rho: FunctionShare,
}

/// One request: server `sigma.server()`'s input shares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputSharesMsg {
    pub session_id: u64,
    pub request_id: u64,
    pub modulus: FieldModulus,
    pub sigma: InputShare,
}

/// The answer to an [`InputSharesMsg`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultsMsg {
    pub session_id: u64,
    pub request_id: u64,
    pub modulus: FieldModulus,
    pub output: ServerOutput,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireError {
    pub code: ErrorCode,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireMessage {
    SetupShares(SetupShares),
    InputShares(InputSharesMsg),
    Results(ResultsMsg),
    Error(WireError),
    /// Reply to a successful [`SetupShares`].
    SetupAck { session_id: u64, server: usize },
}

/// The client's verification key as stored on disk, with what is needed to
/// reuse it: the session, the scheme and the use count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredKey {
    pub session_id: u64,
    pub digest: [u8; 32],
    pub modulus: FieldModulus,
    pub max_uses: u64,
    pub uses: u64,
    pub scheme_json: String,
    pub r: FieldVector,
    pub s: Vec<FieldVector>,
}

impl StoredKey {
    pub fn verification_key(&self) -> crate::Result<FunctionVerificationKey> {
        FunctionVerificationKey::restore(self.r.clone(), self.s.clone(), self.uses, self.max_uses)
    }
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("{endpoint}: {source}")]
    Io {
        endpoint: String,
        #[source]
        source: io::Error,
    },
    #[error("{endpoint}: timed out")]
    Timeout { endpoint: String },
    #[error("{endpoint}: {source}")]
    Codec {
        endpoint: String,
        #[source]
        source: CodecError,
    },
    #[error("{endpoint} replied {code}: {detail}")]
    Remote {
        endpoint: String,
        code: ErrorCode,
        detail: String,
    },
    #[error("{endpoint}: {detail}")]
    Protocol { endpoint: String, detail: String },
    #[error("expected {expected} endpoints, got {found}")]
    EndpointCount { expected: usize, found: usize },
    #[error(transparent)]
    Core(#[from] crate::Error),
}

impl TransportError {
    fn from_io(endpoint: &str, source: io::Error) -> Self {
        match source.kind() {
            io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => Self::Timeout {
                endpoint: endpoint.to_string(),
            },
            _ => Self::Io {
                endpoint: endpoint.to_string(),
                source,
            },
        }
    }
}
