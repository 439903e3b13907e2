//! Binary framing.
//!
//! A frame is a 4-byte big-endian length `n`, then `n` bytes: a 1-byte tag
//! and the payload. Integers are big-endian. A field element is 32
//! big-endian bytes and must be below the modulus carried in the same
//! message. Sets and maps are a `u32` count followed by entries in strictly
//! increasing key order; anything else is rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Read, Write};
use std::sync::Arc;

use thiserror::Error;

use super::{ErrorCode, InputSharesMsg, ResultsMsg, SetupShares, StoredKey, WireError, WireMessage};
use crate::covering::{Cell, ServerSlice};
use crate::field::limbs::{self, Limbs};
use crate::field::{FieldMatrix, FieldModulus, FieldVector};
use crate::protocol::{FunctionShare, InputShare, ServerOutput};

pub const TAG_SETUP: u8 = 1;
pub const TAG_INPUT: u8 = 2;
pub const TAG_RESULTS: u8 = 3;
pub const TAG_ERROR: u8 = 4;
pub const TAG_SETUP_ACK: u8 = 5;
/// Verification key files; never sent over the network.
pub const TAG_STORED_KEY: u8 = 16;

/// Default cap on a frame's length field.
pub const DEFAULT_MAX_FRAME: usize = 1 << 30;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("frame truncated")]
    Truncated,
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("unknown message tag {0}")]
    UnknownTag(u8),
    #[error("field element is not below the modulus")]
    NonCanonical,
    #[error("bad modulus: {0}")]
    BadModulus(String),
    #[error("keys are not strictly increasing")]
    Unsorted,
    #[error("frame of {len} bytes exceeds the limit of {max}")]
    TooLarge { len: usize, max: usize },
    #[error("invalid message: {0}")]
    Invalid(String),
}

type CResult<T> = std::result::Result<T, CodecError>;

fn usize_to_u32(n: usize) -> u32 {
    u32::try_from(n).expect("count fits in u32")
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(tag: u8) -> Self {
        let mut buf = Vec::with_capacity(64);
        buf.extend_from_slice(&[0; 4]);
        buf.push(tag);
        Self { buf }
    }

    fn finish(mut self) -> Vec<u8> {
        let len = usize_to_u32(self.buf.len() - 4);
        self.buf[..4].copy_from_slice(&len.to_be_bytes());
        self.buf
    }

    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    fn index(&mut self, v: usize) {
        self.u32(usize_to_u32(v));
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    fn bytes32(&mut self, v: &[u8; 32]) {
        self.buf.extend_from_slice(v);
    }

    fn string(&mut self, s: &str) {
        self.index(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn modulus(&mut self, q: &FieldModulus) {
        self.bytes32(&q.to_be_bytes());
    }

    fn raw(&mut self, values: &[Limbs]) {
        self.buf.reserve(values.len() * 32);
        for v in values {
            self.buf.extend_from_slice(&limbs::to_be_bytes(v));
        }
    }

    fn vector(&mut self, v: &FieldVector) {
        self.index(v.dim());
        self.raw(v.raw());
    }

    fn matrix(&mut self, m: &FieldMatrix) {
        self.index(m.rows());
        self.index(m.cols());
        self.raw(m.raw());
    }

    fn set(&mut self, s: &BTreeSet<usize>) {
        self.index(s.len());
        s.iter().for_each(|&i| self.index(i));
    }

    fn cells(&mut self, s: &BTreeSet<Cell>) {
        self.index(s.len());
        for &(u, v) in s {
            self.index(u);
            self.index(v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> CResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(CodecError::Truncated)?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn u8(&mut self) -> CResult<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> CResult<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> CResult<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn index(&mut self) -> CResult<usize> {
        Ok(self.u32()? as usize)
    }

    fn u64(&mut self) -> CResult<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes32(&mut self) -> CResult<[u8; 32]> {
        Ok(self.take(32)?.try_into().unwrap())
    }

    fn string(&mut self) -> CResult<String> {
        let n = self.index()?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| CodecError::Invalid("string is not UTF-8".into()))
    }

    fn modulus(&mut self) -> CResult<FieldModulus> {
        FieldModulus::from_be_bytes(&self.bytes32()?).map_err(|e| CodecError::BadModulus(e.to_string()))
    }

    /// Checks that `count` items of `each` bytes can still be read before
    /// allocating for them.
    fn reserve(&self, count: usize, each: usize) -> CResult<()> {
        match count.checked_mul(each) {
            Some(n) if n <= self.remaining() => Ok(()),
            _ => Err(CodecError::Truncated),
        }
    }

    fn raw(&mut self, q: &FieldModulus, count: usize) -> CResult<Vec<Limbs>> {
        self.reserve(count, 32)?;
        let bytes = self.take(count * 32)?;
        bytes
            .chunks_exact(32)
            .map(|c| {
                let v = limbs::from_be_bytes(c.try_into().unwrap());
                if limbs::geq(&v, q.raw_q()) {
                    Err(CodecError::NonCanonical)
                } else {
                    Ok(v)
                }
            })
            .collect()
    }

    fn vector(&mut self, q: &FieldModulus) -> CResult<FieldVector> {
        let dim = self.index()?;
        if dim == 0 {
            return Err(CodecError::Invalid("empty vector".into()));
        }
        Ok(FieldVector::from_raw(q, self.raw(q, dim)?))
    }

    fn matrix(&mut self, q: &FieldModulus) -> CResult<FieldMatrix> {
        let rows = self.index()?;
        let cols = self.index()?;
        if rows == 0 || cols == 0 {
            return Err(CodecError::Invalid("empty matrix".into()));
        }
        let count = rows.checked_mul(cols).ok_or(CodecError::Truncated)?;
        Ok(FieldMatrix::from_raw(q, rows, cols, self.raw(q, count)?))
    }

    fn sorted<K: Ord + Copy, V>(
        &mut self,
        each_min: usize,
        mut item: impl FnMut(&mut Self) -> CResult<(K, V)>,
    ) -> CResult<BTreeMap<K, V>> {
        let n = self.index()?;
        self.reserve(n, each_min)?;
        let mut out = BTreeMap::new();
        let mut last: Option<K> = None;
        for _ in 0..n {
            let (k, v) = item(self)?;
            if last.is_some_and(|l| l >= k) {
                return Err(CodecError::Unsorted);
            }
            last = Some(k);
            out.insert(k, v);
        }
        Ok(out)
    }

    fn set(&mut self) -> CResult<BTreeSet<usize>> {
        Ok(self.sorted(4, |r| Ok((r.index()?, ())))?.into_keys().collect())
    }

    fn cells(&mut self) -> CResult<BTreeSet<Cell>> {
        Ok(self.sorted(8, |r| Ok(((r.index()?, r.index()?), ())))?.into_keys().collect())
    }

    fn server(&mut self) -> CResult<usize> {
        match self.index()? {
            0 => Err(CodecError::Invalid("server index 0".into())),
            l => Ok(l),
        }
    }
}

fn encode_setup(w: &mut Writer, s: &SetupShares) {
    w.u64(s.session_id);
    w.index(s.slice.server);
    w.bytes32(&s.digest);
    w.modulus(&s.modulus);
    w.set(&s.slice.a_set);
    w.set(&s.slice.b_set);
    w.cells(&s.slice.c_set);
    w.index(s.rho.indices().count());
    for (u, fu) in s.rho.iter() {
        w.index(u);
        w.matrix(fu);
    }
}

fn decode_setup(r: &mut Reader<'_>) -> CResult<SetupShares> {
    let session_id = r.u64()?;
    let server = r.server()?;
    let digest = r.bytes32()?;
    let modulus = r.modulus()?;
    let slice = ServerSlice {
        server,
        a_set: r.set()?,
        b_set: r.set()?,
        c_set: r.cells()?,
    };
    let shares = r.sorted(12, |r| Ok((r.index()?, Arc::new(r.matrix(&modulus)?))))?;
    Ok(SetupShares {
        session_id,
        digest,
        modulus,
        slice,
        rho: FunctionShare::new(server, shares),
    })
}

/// Serializes one message into a complete frame.
pub fn encode_message(msg: &WireMessage) -> Vec<u8> {
    match msg {
        WireMessage::SetupShares(s) => {
            let mut w = Writer::new(TAG_SETUP);
            encode_setup(&mut w, s);
            w.finish()
        }
        WireMessage::InputShares(m) => {
            let mut w = Writer::new(TAG_INPUT);
            w.u64(m.session_id);
            w.u64(m.request_id);
            w.index(m.sigma.server());
            w.modulus(&m.modulus);
            w.index(m.sigma.indices().count());
            for (v, xv) in m.sigma.iter() {
                w.index(v);
                w.vector(xv);
            }
            w.finish()
        }
        WireMessage::Results(m) => {
            let mut w = Writer::new(TAG_RESULTS);
            w.u64(m.session_id);
            w.u64(m.request_id);
            w.index(m.output.server());
            w.modulus(&m.modulus);
            w.index(m.output.results().len());
            for (&(u, v), y) in m.output.results() {
                w.index(u);
                w.index(v);
                w.vector(y);
            }
            w.finish()
        }
        WireMessage::Error(e) => {
            let mut w = Writer::new(TAG_ERROR);
            w.u16(e.code.0);
            w.string(&e.detail);
            w.finish()
        }
        WireMessage::SetupAck { session_id, server } => {
            let mut w = Writer::new(TAG_SETUP_ACK);
            w.u64(*session_id);
            w.index(*server);
            w.finish()
        }
    }
}

fn open_frame(frame: &[u8]) -> CResult<(u8, Reader<'_>)> {
    let mut r = Reader { buf: frame, pos: 0 };
    let len = r.u32()? as usize;
    if len == 0 {
        return Err(CodecError::Truncated);
    }
    match frame.len() - 4 {
        n if n < len => return Err(CodecError::Truncated),
        n if n > len => return Err(CodecError::TrailingBytes(n - len)),
        _ => {}
    }
    let tag = r.u8()?;
    Ok((tag, r))
}

fn close_frame(r: &Reader<'_>) -> CResult<()> {
    match r.remaining() {
        0 => Ok(()),
        n => Err(CodecError::TrailingBytes(n)),
    }
}

/// Parses one complete frame.
pub fn decode_message(frame: &[u8]) -> CResult<WireMessage> {
    let (tag, mut r) = open_frame(frame)?;
    let msg = match tag {
        TAG_SETUP => WireMessage::SetupShares(decode_setup(&mut r)?),
        TAG_INPUT => {
            let session_id = r.u64()?;
            let request_id = r.u64()?;
            let server = r.server()?;
            let modulus = r.modulus()?;
            let shares = r.sorted(8, |r| Ok((r.index()?, r.vector(&modulus)?)))?;
            WireMessage::InputShares(InputSharesMsg {
                session_id,
                request_id,
                modulus,
                sigma: InputShare::new(server, shares),
            })
        }
        TAG_RESULTS => {
            let session_id = r.u64()?;
            let request_id = r.u64()?;
            let server = r.server()?;
            let modulus = r.modulus()?;
            let results = r.sorted(12, |r| Ok(((r.index()?, r.index()?), r.vector(&modulus)?)))?;
            WireMessage::Results(ResultsMsg {
                session_id,
                request_id,
                modulus,
                output: ServerOutput::new(server, results),
            })
        }
        TAG_ERROR => WireMessage::Error(WireError {
            code: ErrorCode(r.u16()?),
            detail: r.string()?,
        }),
        TAG_SETUP_ACK => WireMessage::SetupAck {
            session_id: r.u64()?,
            server: r.server()?,
        },
        other => return Err(CodecError::UnknownTag(other)),
    };
    close_frame(&r)?;
    Ok(msg)
}

pub fn encode_stored_key(key: &StoredKey) -> Vec<u8> {
    let mut w = Writer::new(TAG_STORED_KEY);
    w.u64(key.session_id);
    w.bytes32(&key.digest);
    w.modulus(&key.modulus);
    w.u64(key.max_uses);
    w.u64(key.uses);
    w.string(&key.scheme_json);
    w.vector(&key.r);
    w.index(key.s.len());
    key.s.iter().for_each(|s| w.vector(s));
    w.finish()
}

pub fn decode_stored_key(frame: &[u8]) -> CResult<StoredKey> {
    let (tag, mut r) = open_frame(frame)?;
    if tag != TAG_STORED_KEY {
        return Err(CodecError::UnknownTag(tag));
    }
    let session_id = r.u64()?;
    let digest = r.bytes32()?;
    let modulus = r.modulus()?;
    let max_uses = r.u64()?;
    let uses = r.u64()?;
    let scheme_json = r.string()?;
    let rvec = r.vector(&modulus)?;
    let n = r.index()?;
    r.reserve(n, 4)?;
    let s = (0..n).map(|_| r.vector(&modulus)).collect::<CResult<Vec<_>>>()?;
    close_frame(&r)?;
    Ok(StoredKey {
        session_id,
        digest,
        modulus,
        max_uses,
        uses,
        scheme_json,
        r: rvec,
        s,
    })
}

/// Reads one frame from a stream. Returns `Ok(None)` on a clean end of
/// stream before the length field.
pub fn read_frame<R: Read>(reader: &mut R, max: usize) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match reader.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let n = u32::from_be_bytes(len) as usize;
    if n > max {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            CodecError::TooLarge { len: n, max },
        ));
    }
    let mut frame = vec![0u8; 4 + n];
    frame[..4].copy_from_slice(&len);
    reader.read_exact(&mut frame[4..])?;
    Ok(Some(frame))
}

pub fn write_frame<W: Write>(writer: &mut W, frame: &[u8]) -> io::Result<()> {
    writer.write_all(frame)?;
    writer.flush()
}
