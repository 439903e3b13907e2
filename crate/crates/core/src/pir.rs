//! Verifiable private information retrieval on top of the delegation
//! protocol.
//!
//! The `N` entries are laid out row-major in a `d x d` matrix with
//! `d = ceil(sqrt N)`, zero-padded. Entry `i` (1-based) sits at row `r`,
//! column `c` with `i = (r - 1) d + c`. The client delegates `F e_c`, which
//! is column `c`, and keeps entry `r`. Each server sees only shares of
//! `e_c`, so it learns nothing about `i`.

use rand::RngCore;

use crate::covering::CoveringScheme;
use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldMatrix, FieldModulus, FieldVector};
use crate::protocol::{key_gen, Client, FunctionKeyMaterial, LocalServers, Servers, Verified};

/// Bytes packed into one field element by [`chunk_bytes`].
pub const CHUNK_BYTES: usize = 31;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PirDatabase {
    len: usize,
    side: usize,
    f: FieldMatrix,
}

fn side_for(n: usize) -> usize {
    let mut d = (n as f64).sqrt() as usize;
    while d * d < n {
        d += 1;
    }
    while d > 1 && (d - 1) * (d - 1) >= n {
        d -= 1;
    }
    d
}

/// Lays `entries` out as a square matrix.
pub fn build_database(entries: &[FieldElement]) -> Result<PirDatabase> {
    let first = entries.first().ok_or(Error::EmptyDatabase)?;
    let modulus = first.modulus().clone();
    let n = entries.len();
    let d = side_for(n);
    let mut padded = entries.to_vec();
    padded.resize(d * d, modulus.zero());
    Ok(PirDatabase {
        len: n,
        side: d,
        f: FieldMatrix::new(&modulus, d, d, padded)?,
    })
}

impl PirDatabase {
    /// Number of real entries `N`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `d = ceil(sqrt N)`.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn matrix(&self) -> &FieldMatrix {
        &self.f
    }

    pub fn modulus(&self) -> &FieldModulus {
        self.f.modulus()
    }

    /// Entry `i`, 1-based, read directly.
    pub fn entry(&self, i: usize) -> Result<FieldElement> {
        let q = PirQuery::locate(i, self.len)?;
        Ok(self.f.get(q.0 - 1, q.1 - 1).expect("inside the matrix"))
    }
}

/// The selection vector for entry `index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PirQuery {
    pub index: usize,
    pub row: usize,
    pub col: usize,
    pub x: FieldVector,
}

impl PirQuery {
    /// `(r, c)` for 1-based `i` in a database of `n` entries.
    pub fn locate(i: usize, n: usize) -> Result<(usize, usize)> {
        if i == 0 || i > n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        let d = side_for(n);
        Ok(((i - 1) / d + 1, (i - 1) % d + 1))
    }
}

pub fn make_query(i: usize, n: usize, modulus: &FieldModulus) -> Result<PirQuery> {
    let (row, col) = PirQuery::locate(i, n)?;
    Ok(PirQuery {
        index: i,
        row,
        col,
        x: FieldVector::unit(modulus, side_for(n), col - 1)?,
    })
}

/// A PIR client: the database has been shared with the servers once and
/// the client keeps only the verification key and `N`.
#[derive(Debug)]
pub struct PirClient<S> {
    len: usize,
    client: Client<S>,
}

impl PirClient<LocalServers> {
    /// Shares `db` and simulates the servers in-process.
    pub fn local<R: RngCore + ?Sized>(db: &PirDatabase, scheme: &CoveringScheme, rng: &mut R) -> Result<Self> {
        let keys = key_gen(db.matrix(), scheme, rng)?;
        let servers = LocalServers::new(scheme, &keys);
        Ok(Self::new(db.len(), scheme.clone(), keys, servers))
    }
}

impl<S: Servers> PirClient<S> {
    /// `keys` must come from key generation on the matrix of a database of
    /// `len` entries.
    pub fn new(len: usize, scheme: CoveringScheme, keys: FunctionKeyMaterial, servers: S) -> Self {
        Self {
            len,
            client: Client::new(scheme, keys, servers),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn client_mut(&mut self) -> &mut Client<S> {
        &mut self.client
    }

    /// Retrieves entry `i`, or the rejection marker.
    pub fn retrieve<R: RngCore + ?Sized>(&mut self, i: usize, rng: &mut R) -> std::result::Result<Verified<FieldElement>, S::Error> {
        let query = make_query(i, self.len, self.client.keys().modulus())?;
        let column = self.client.delegate(&query.x, rng)?;
        Ok(column.map(|col| col.get(query.row - 1).expect("row inside the column")))
    }
}

/// One-shot retrieval against honest in-process servers.
pub fn pir_retrieve<R: RngCore + ?Sized>(
    db: &PirDatabase,
    i: usize,
    scheme: &CoveringScheme,
    rng: &mut R,
) -> Result<Verified<FieldElement>> {
    PirClient::local(db, scheme, rng)?.retrieve(i, rng)
}

/// Packs bytes into field elements, 31 big-endian bytes each, zero-padding
/// the last chunk. Needs `q > 2^248`.
pub fn chunk_bytes(bytes: &[u8], modulus: &FieldModulus) -> Result<Vec<FieldElement>> {
    if modulus.bits() <= (CHUNK_BYTES * 8) as u32 {
        return Err(Error::Malformed(format!(
            "a {}-bit modulus cannot hold {CHUNK_BYTES}-byte chunks",
            modulus.bits()
        )));
    }
    if bytes.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    bytes
        .chunks(CHUNK_BYTES)
        .map(|chunk| {
            let mut buf = [0u8; 32];
            buf[1..1 + chunk.len()].copy_from_slice(chunk);
            modulus.element_from_be_bytes(&buf)
        })
        .collect()
}

/// The 31 bytes of one chunk.
pub fn unchunk(element: &FieldElement) -> [u8; CHUNK_BYTES] {
    let be = element.to_be_bytes();
    let mut out = [0u8; CHUNK_BYTES];
    out.copy_from_slice(&be[1..]);
    out
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::covering::{pi_s, pi_w};
    use crate::protocol::{prob_gen, PublicKey};
    use crate::testing::TapeRng;

    fn q101() -> FieldModulus {
        FieldModulus::from_u64(101).unwrap()
    }

    fn els(modulus: &FieldModulus, v: &[u64]) -> Vec<FieldElement> {
        v.iter().map(|&x| modulus.element(x)).collect()
    }

    #[test]
    fn layout_examples() {
        let q = q101();
        let db = build_database(&els(&q, &[10, 20, 30, 40])).unwrap();
        assert_eq!(db.side(), 2);
        assert_eq!(db.matrix().to_u64_rows().unwrap(), vec![vec![10, 20], vec![30, 40]]);
        let one = build_database(&els(&q, &[5])).unwrap();
        assert_eq!((one.side(), one.matrix().rows()), (1, 1));
        let three = build_database(&els(&q, &[1, 2, 3])).unwrap();
        assert_eq!(three.side(), 2);
        assert!(three.matrix().get(1, 1).unwrap().is_zero());
        assert_eq!(build_database(&[]), Err(Error::EmptyDatabase));
    }

    #[test]
    fn side_is_ceil_sqrt() {
        for n in 1..2000usize {
            let d = side_for(n);
            assert!(d * d >= n && (d - 1) * (d - 1) < n, "{n}");
        }
    }

    #[test]
    fn query_examples() {
        let q = q101();
        let query = make_query(3, 4, &q).unwrap();
        assert_eq!((query.row, query.col), (2, 1));
        assert_eq!(query.x.to_u64s().unwrap(), vec![1, 0]);
        let query = make_query(1, 9, &q).unwrap();
        assert_eq!((query.row, query.col), (1, 1));
        let query = make_query(9, 9, &q).unwrap();
        assert_eq!((query.row, query.col), (3, 3));
        assert_eq!(query.x.to_u64s().unwrap(), vec![0, 0, 1]);
        assert!(make_query(0, 4, &q).is_err());
        assert_eq!(make_query(5, 4, &q).unwrap_err(), Error::IndexOutOfRange { index: 5, len: 4 });
    }

    #[test]
    fn layout_and_query_agree() {
        let q = q101();
        for n in 1..60u64 {
            let entries: Vec<u64> = (1..=n).collect();
            let db = build_database(&els(&q, &entries)).unwrap();
            for i in 1..=n as usize {
                let query = make_query(i, n as usize, &q).unwrap();
                assert_eq!((query.row - 1) * db.side() + query.col, i);
                assert_eq!(db.entry(i).unwrap().as_u64(), Some(i as u64));
            }
        }
    }

    #[test]
    fn retrieve_example_and_all_entries() {
        let q = q101();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let db = build_database(&els(&q, &[10, 20, 30, 40])).unwrap();
        let got = pir_retrieve(&db, 3, &pi_s(), &mut rng).unwrap();
        assert_eq!(got.accepted().and_then(|e| e.as_u64()), Some(30));

        let entries: Vec<FieldElement> = (0..100).map(|_| q.random_element(&mut rng)).collect();
        let db = build_database(&entries).unwrap();
        for scheme in [pi_s(), pi_w()] {
            let mut client = PirClient::local(&db, &scheme, &mut rng).unwrap();
            for (i, want) in entries.iter().enumerate() {
                assert_eq!(client.retrieve(i + 1, &mut rng).unwrap(), Verified::Accepted(want.clone()));
            }
        }
    }

    #[test]
    fn tampering_is_detected() {
        let q = q101();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let entries: Vec<FieldElement> = (0..16).map(|_| q.random_element(&mut rng)).collect();
        let db = build_database(&entries).unwrap();
        let keys = key_gen(db.matrix(), &pi_s(), &mut rng).unwrap();
        let servers = LocalServers::new(&pi_s(), &keys).with_cheater(3, 4);
        let mut client = PirClient::new(16, pi_s(), keys, servers);
        let rejected = (1..=200)
            .filter(|&t| !client.retrieve(t % 16 + 1, &mut rng).unwrap().is_accepted())
            .count();
        assert!(rejected >= 190, "{rejected}");
    }

    #[test]
    fn query_shares_do_not_depend_on_index() {
        // q = 2, N = 4 (d = 2), three input shares: each server's view of
        // sigma under every randomness tape has the same distribution for
        // all four indices.
        let q = FieldModulus::from_u64(2).unwrap();
        let scheme = pi_s();
        let mut views: Vec<Vec<Vec<Vec<u64>>>> = Vec::new();
        for i in 1..=4 {
            let query = make_query(i, 4, &q).unwrap();
            let mut per_server = vec![Vec::new(); 3];
            for mut tape in TapeRng::enumerate(2, 4) {
                let input = prob_gen(&PublicKey, &query.x, &scheme, &mut tape).unwrap();
                for (l, sigma) in input.sigma.iter().enumerate() {
                    let view: Vec<u64> = sigma.iter().flat_map(|(_, x)| x.to_u64s().unwrap()).collect();
                    per_server[l].push(view);
                }
            }
            for v in &mut per_server {
                v.sort();
            }
            views.push(per_server);
        }
        for i in 1..4 {
            assert_eq!(views[i], views[0]);
        }
    }

    #[test]
    fn chunking_round_trip() {
        let q = FieldModulus::default_256();
        let bytes: Vec<u8> = (0..100u8).collect();
        let chunks = chunk_bytes(&bytes, &q).unwrap();
        assert_eq!(chunks.len(), 4);
        let mut back: Vec<u8> = chunks.iter().flat_map(unchunk).collect();
        assert_eq!(back.len(), 124);
        assert!(back[100..].iter().all(|&b| b == 0));
        back.truncate(100);
        assert_eq!(back, bytes);
        assert_eq!(unchunk(&chunks[0])[..3], [0, 1, 2]);
        assert!(chunk_bytes(&bytes, &q101()).is_err());
        assert_eq!(chunk_bytes(&[], &q), Err(Error::EmptyDatabase));
    }
}
