//! On-disk formats.
//!
//! Server shares are `SetupShares` frames, exactly what a daemon receives.
//! The client key is a stored-key frame readable only by its owner. Vectors,
//! matrices and transcripts are JSON with elements as decimal strings
//! (integers are accepted on input).

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use msvc_core::protocol::{InputVerificationKey, ServerOutput};
use msvc_core::transport::{
    decode_message, decode_stored_key, encode_message, encode_stored_key, SetupShares, StoredKey, WireMessage,
};
use msvc_core::{CoveringScheme, FieldElement, FieldMatrix, FieldModulus, FieldVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{read_file, read_json};
use crate::error::{CliError, CliResult};

pub const KEY_FILE: &str = "client.key";
pub const FUNCTION_FILE: &str = "function.json";

pub fn setup_file(dir: &Path, server: usize) -> PathBuf {
    dir.join(format!("server-{server}.setup"))
}

/// Writes through a temporary file so a crash never leaves a torn file.
fn write_atomic(path: &Path, bytes: &[u8], private: bool) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    let mut options = OpenOptions::new();
    options.write(true).create(true).truncate(true);
    #[cfg(unix)]
    if private {
        use std::os::unix::fs::OpenOptionsExt;
        options.mode(0o600);
    }
    #[cfg(not(unix))]
    let _ = private;
    let mut file = options.open(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    file.write_all(bytes)
        .and_then(|()| file.sync_all())
        .map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_setup(path: &Path, setup: &SetupShares) -> CliResult<()> {
    write_atomic(path, &encode_message(&WireMessage::SetupShares(setup.clone())), false)
}

pub fn read_setup(path: &Path) -> CliResult<SetupShares> {
    match decode_message(&read_file(path)?) {
        Ok(WireMessage::SetupShares(s)) => Ok(s),
        Ok(_) => Err(CliError::Config(format!("{}: not a server share file", path.display()))),
        Err(source) => Err(CliError::Decode {
            path: path.to_path_buf(),
            source,
        }),
    }
}

pub fn write_key(path: &Path, key: &StoredKey) -> CliResult<()> {
    write_atomic(path, &encode_stored_key(key), true)
}

/// Reads a key file and the scheme recorded in it.
pub fn read_key(path: &Path) -> CliResult<(StoredKey, CoveringScheme)> {
    let key = decode_stored_key(&read_file(path)?).map_err(|source| CliError::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    let scheme = CoveringScheme::from_json(&key.scheme_json)?;
    if scheme.digest() != key.digest || scheme.validate().is_err() {
        return Err(CliError::Config(format!("{}: scheme does not match its digest", path.display())));
    }
    Ok((key, scheme))
}

fn element(q: &FieldModulus, v: &Value) -> CliResult<FieldElement> {
    match v {
        Value::Number(n) => n
            .as_u64()
            .filter(|&n| q.as_u64().is_none_or(|qv| n < qv))
            .map(|n| q.element(n))
            .ok_or_else(|| CliError::Config(format!("{n} is not an element of Z_{q}"))),
        Value::String(s) => Ok(q.parse_element(s)?),
        other => Err(CliError::Config(format!("expected a field element, got {other}"))),
    }
}

pub fn parse_elements(q: &FieldModulus, v: &Value) -> CliResult<Vec<FieldElement>> {
    v.as_array()
        .ok_or_else(|| CliError::Config("expected an array of field elements".into()))?
        .iter()
        .map(|e| element(q, e))
        .collect()
}

pub fn read_vector(path: &Path, q: &FieldModulus) -> CliResult<FieldVector> {
    Ok(FieldVector::new(q, parse_elements(q, &read_json(path)?)?)?)
}

/// A matrix as an array of equal-length rows.
pub fn read_matrix(path: &Path, q: &FieldModulus) -> CliResult<FieldMatrix> {
    let v: Value = read_json(path)?;
    let rows = v
        .as_array()
        .ok_or_else(|| CliError::Config(format!("{}: expected an array of rows", path.display())))?;
    let rows: Vec<Vec<FieldElement>> = rows.iter().map(|r| parse_elements(q, r)).collect::<CliResult<_>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Config(format!("{}: rows differ in length", path.display())));
    }
    Ok(FieldMatrix::new(q, rows.len(), cols, rows.into_iter().flatten().collect())?)
}

pub fn strings(items: impl IntoIterator<Item = FieldElement>) -> Vec<String> {
    items.into_iter().map(|e| e.to_string()).collect()
}

pub fn vector_json(v: &FieldVector) -> String {
    serde_json::to_string(&strings(v.iter())).expect("strings serialize")
}

pub fn write_matrix(path: &Path, f: &FieldMatrix) -> CliResult<()> {
    let rows: Vec<Vec<String>> = (0..f.rows()).map(|i| strings(f.row(i).expect("row in range").iter())).collect();
    let json = serde_json::to_vec_pretty(&rows).expect("strings serialize");
    write_atomic(path, &json, false)
}

/// One delegation: the input verification key and every server's results,
/// enough to re-run verification offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: u64,
    pub input_key: Vec<Vec<String>>,
    pub results: Vec<ServerResults>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerResults {
    pub server: usize,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub u: usize,
    pub v: usize,
    pub y: Vec<String>,
}

impl Transcript {
    pub fn new(session_id: u64, input_key: &InputVerificationKey, outputs: &[ServerOutput]) -> Self {
        Self {
            session_id,
            input_key: input_key.shares().iter().map(|s| strings(s.iter())).collect(),
            results: outputs
                .iter()
                .map(|out| ServerResults {
                    server: out.server(),
                    cells: out
                        .results()
                        .iter()
                        .map(|(&(u, v), y)| CellResult { u, v, y: strings(y.iter()) })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, &serde_json::to_vec_pretty(self).expect("transcript serializes"), false)
    }

    pub fn input_key(&self, q: &FieldModulus) -> CliResult<InputVerificationKey> {
        let shares = self.input_key.iter().map(|s| decimal_vector(q, s)).collect::<CliResult<_>>()?;
        Ok(InputVerificationKey::new(shares))
    }

    pub fn outputs(&self, q: &FieldModulus) -> CliResult<Vec<ServerOutput>> {
        self.results
            .iter()
            .map(|r| {
                let mut cells = BTreeMap::new();
                for c in &r.cells {
                    if cells.insert((c.u, c.v), decimal_vector(q, &c.y)?).is_some() {
                        return Err(CliError::Config(format!("server {}: cell ({}, {}) repeated", r.server, c.u, c.v)));
                    }
                }
                Ok(ServerOutput::new(r.server, cells))
            })
            .collect()
    }
}

fn decimal_vector(q: &FieldModulus, items: &[String]) -> CliResult<FieldVector> {
    let elems = items.iter().map(|s| q.parse_element(s)).collect::<Result<_, _>>()?;
    Ok(FieldVector::new(q, elems)?)
}

#[cfg(test)]
mod tests {
    use msvc_core::{key_gen, pi_s, prob_gen};
    use msvc_core::protocol::{compute_all, PublicKey};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn matrix_and_vector_json() {
        let dir = tempfile::tempdir().unwrap();
        let q = FieldModulus::from_u64(101).unwrap();
        let path = dir.path().join("f.json");
        fs::write(&path, r#"[[1, "2", 3], [4, 5, "100"]]"#).unwrap();
        let f = read_matrix(&path, &q).unwrap();
        assert_eq!(f.to_u64_rows().unwrap(), vec![vec![1, 2, 3], vec![4, 5, 100]]);
        write_matrix(&path, &f).unwrap();
        assert_eq!(read_matrix(&path, &q).unwrap(), f);

        fs::write(&path, "[[1, 2], [3]]").unwrap();
        assert!(matches!(read_matrix(&path, &q), Err(CliError::Config(_))));
        fs::write(&path, "[1, 101]").unwrap();
        assert!(read_vector(&path, &q).is_err());
        fs::write(&path, r#"[1, "101"]"#).unwrap();
        assert!(matches!(read_vector(&path, &q), Err(CliError::Core(_))));
    }

    #[test]
    #[cfg(unix)]
    fn key_file_is_private() {
        use std::os::unix::fs::PermissionsExt;

        let dir = tempfile::tempdir().unwrap();
        let q = FieldModulus::from_u64(1009).unwrap();
        let scheme = pi_s();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = msvc_core::field::random_matrix(2, 3, &q, &mut rng).unwrap();
        let keys = key_gen(&f, &scheme, &mut rng).unwrap();
        let stored = StoredKey {
            session_id: 7,
            digest: scheme.digest(),
            modulus: q,
            max_uses: 10,
            uses: 2,
            scheme_json: scheme.to_json(),
            r: keys.vk.r().clone(),
            s: keys.vk.s_all().to_vec(),
        };
        let path = dir.path().join(KEY_FILE);
        write_key(&path, &stored).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().permissions().mode() & 0o777, 0o600);
        let (back, back_scheme) = read_key(&path).unwrap();
        assert_eq!((back, back_scheme), (stored, scheme));
    }

    #[test]
    fn transcript_round_trip() {
        let q = FieldModulus::from_u64(1009).unwrap();
        let scheme = pi_s();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = msvc_core::field::random_matrix(3, 2, &q, &mut rng).unwrap();
        let x = msvc_core::field::random_vector(2, &q, &mut rng).unwrap();
        let keys = key_gen(&f, &scheme, &mut rng).unwrap();
        let input = prob_gen(&PublicKey, &x, &scheme, &mut rng).unwrap();
        let outs = compute_all(&keys.rho, &input.sigma, &scheme).unwrap();
        let t = Transcript::new(5, &input.vk, &outs);
        let json = serde_json::to_string(&t).unwrap();
        let back: Transcript = serde_json::from_str(&json).unwrap();
        assert_eq!(back.outputs(&q).unwrap(), outs);
        assert_eq!(back.input_key(&q).unwrap().shares(), input.vk.shares());
    }
}
