use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::ValueEnum;
use msvc_core::field::{random_matrix, random_vector};
use msvc_core::perf::{measure_point, BenchRecord, MIN_RUNS};
use msvc_core::pir::{build_database, chunk_bytes, unchunk, PirClient, PirDatabase};
use msvc_core::polydelegate::{PolyDelegator, PolynomialSpec};
use msvc_core::protocol::{
    default_max_uses, run_security_experiment, Adversary, HonestAdversary, PublicKey,
    RandomTamperAdversary, Servers, ZeroOffsetAdversary,
};
use msvc_core::transport::{serve as serve_forever, setup_messages, RemoteServers, ServerConfig, StoredKey};
use msvc_core::{key_gen, prob_gen, verify, CoveringScheme, FieldElement, FieldMatrix, FieldModulus, FunctionKeyMaterial, Verified};
use num_traits::ToPrimitive;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::config::{read_file, read_json, Settings};
use crate::error::{CliError, CliResult};
use crate::files::{self, Transcript, FUNCTION_FILE, KEY_FILE};

/// Writes `text` plus a newline to `--out` if given, else to stdout.
fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, format!("{text}\n")).map_err(|e| CliError::io(path, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn accepted<T>(outcome: Verified<T>) -> CliResult<T> {
    match outcome {
        Verified::Accepted(v) => Ok(v),
        Verified::Rejected(r) => Err(CliError::Rejected(r.to_string())),
    }
}

pub fn keygen(settings: &Settings, matrix: Option<&Path>, session: Option<u64>, max_uses: Option<u64>) -> CliResult<()> {
    let dir = settings.require_out()?;
    let (q, scheme) = (&settings.q, &settings.scheme);
    let mut rng = settings.rng();
    let f = match matrix {
        Some(path) => {
            let f = files::read_matrix(path, q)?;
            for (flag, want, got) in [("m", settings.m, f.rows()), ("d", settings.d, f.cols())] {
                if want.is_some_and(|w| w != got) {
                    return Err(CliError::Config(format!("--{flag} disagrees with the matrix, which has {flag} = {got}")));
                }
            }
            f
        }
        None => random_matrix(settings.require_m()?, settings.require_d()?, q, &mut rng)?,
    };
    let keys = key_gen(&f, scheme, &mut rng)?;
    let session_id = session.unwrap_or_else(|| rng.next_u64());

    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for setup in setup_messages(&keys, scheme, session_id) {
        files::write_setup(&files::setup_file(dir, setup.slice.server), &setup)?;
    }
    let key = StoredKey {
        session_id,
        digest: scheme.digest(),
        modulus: q.clone(),
        max_uses: max_uses.unwrap_or_else(|| default_max_uses(q, scheme.total_cells()).max(1)),
        uses: 0,
        scheme_json: scheme.to_json(),
        r: keys.vk.r().clone(),
        s: keys.vk.s_all().to_vec(),
    };
    files::write_key(&dir.join(KEY_FILE), &key)?;
    if matrix.is_none() {
        files::write_matrix(&dir.join(FUNCTION_FILE), &f)?;
    }
    println!("session {session_id}");
    println!("{} x {} matrix shared across {} servers in {}", f.rows(), f.cols(), scheme.k, dir.display());
    Ok(())
}

pub fn serve(bind: String, state_dir: Option<PathBuf>, tamper_seed: Option<u64>) -> CliResult<()> {
    let mut config = ServerConfig::new(bind.clone());
    config.state_dir = state_dir;
    config.tamper_seed = tamper_seed;
    serve_forever(config, |addr| {
        println!("listening on {addr}");
        let _ = io::stdout().flush();
    })
    .map_err(|e| CliError::io(bind, e))
}

pub struct DelegateArgs<'a> {
    pub key: &'a Path,
    pub input: Option<&'a Path>,
    pub provision: Option<&'a Path>,
    pub transcript: Option<&'a Path>,
    pub timeout: Duration,
}

pub fn delegate(settings: &Settings, args: DelegateArgs<'_>) -> CliResult<()> {
    let (mut stored, scheme) = files::read_key(args.key)?;
    let q = stored.modulus.clone();
    let vk = stored.verification_key()?;
    if vk.needs_refresh() {
        return Err(CliError::Config(format!(
            "{}: key used {} times, run keygen again",
            args.key.display(),
            vk.uses()
        )));
    }
    let d = vk.s_all().first().map_or(0, |s| s.dim());
    let mut rng = settings.rng();
    let x = match args.input {
        Some(path) => files::read_vector(path, &q)?,
        None => random_vector(d, &q, &mut rng)?,
    };
    if x.dim() != d {
        return Err(CliError::Config(format!("input has {} entries, the function takes {d}", x.dim())));
    }

    let endpoints = Settings {
        scheme: scheme.clone(),
        ..settings.clone()
    }
    .require_endpoints()?;
    let mut remote = RemoteServers::new(endpoints, stored.session_id, q.clone()).with_timeout(args.timeout);
    if let Some(dir) = args.provision {
        let setups = (1..=scheme.k)
            .map(|l| files::read_setup(&files::setup_file(dir, l)))
            .collect::<CliResult<Vec<_>>>()?;
        if setups.iter().any(|s| s.session_id != stored.session_id || s.digest != stored.digest) {
            return Err(CliError::Config(format!("{}: shares belong to a different key", dir.display())));
        }
        remote.provision(&setups)?;
    }

    let input = prob_gen(&PublicKey, &x, &scheme, &mut rng)?;
    let outputs = remote.compute_all(&input.sigma)?;
    let outcome = verify(&vk, &input.vk, &outputs, &scheme)?;
    stored.uses = vk.uses();
    files::write_key(args.key, &stored)?;
    if let Some(path) = args.transcript {
        Transcript::new(stored.session_id, &input.vk, &outputs).write(path)?;
    }
    emit(settings.out.as_deref(), &files::vector_json(&accepted(outcome)?))
}

pub fn verify_transcript(settings: &Settings, key: &Path, transcript: &Path) -> CliResult<()> {
    let (stored, scheme) = files::read_key(key)?;
    let t: Transcript = read_json(transcript)?;
    if t.session_id != stored.session_id {
        return Err(CliError::Config(format!(
            "transcript is for session {}, key is for session {}",
            t.session_id, stored.session_id
        )));
    }
    let q = &stored.modulus;
    let outcome = verify(&stored.verification_key()?, &t.input_key(q)?, &t.outputs(q)?, &scheme)?;
    emit(settings.out.as_deref(), &files::vector_json(&accepted(outcome)?))
}

/// One CSV row per size, `m = d`, unless `--m` and `--d` pick a single point.
pub fn bench(settings: &Settings, sizes: &[usize], runs: usize) -> CliResult<()> {
    if runs < MIN_RUNS {
        return Err(CliError::Config(format!("--runs must be at least {MIN_RUNS}")));
    }
    let points: Vec<(usize, usize)> = match (settings.m, settings.d) {
        (Some(m), Some(d)) => vec![(m, d)],
        (None, None) => sizes.iter().map(|&n| (n, n)).collect(),
        _ => return Err(CliError::Config("give both --m and --d, or neither".into())),
    };
    if points.iter().any(|&(m, d)| m == 0 || d == 0) {
        return Err(CliError::Config("sizes must be at least 1".into()));
    }
    let mut rng = settings.rng();
    let records = points
        .into_iter()
        .map(|(m, d)| measure_point(m, d, &settings.scheme_label, &settings.scheme, &settings.q, runs, &mut rng))
        .collect::<Result<Vec<BenchRecord>, _>>()?;
    let sink: Box<dyn Write> = match &settings.out {
        Some(path) => Box::new(fs::File::create(path).map_err(|e| CliError::io(path, e))?),
        None => Box::new(io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for record in &records {
        w.serialize(record)?;
    }
    w.flush().map_err(|e| CliError::io(settings.out.clone().unwrap_or_else(|| "stdout".into()), e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryKind {
    Honest,
    RandomTamper,
    ZeroOffset,
}

#[derive(Debug, Serialize)]
struct AttackReport {
    adversary: AdversaryKind,
    scheme: String,
    q: String,
    m: usize,
    d: usize,
    p: usize,
    trials: u64,
    wins: u64,
    rate: f64,
    bound: f64,
}

/// `p ab / (q - p ab)`, or infinity when `q <= p ab`.
fn soundness_bound(q: &FieldModulus, p: usize, cells: usize) -> f64 {
    let pab = (p * cells) as f64;
    let q = q.value().to_f64().unwrap_or(f64::INFINITY);
    if q <= pab {
        f64::INFINITY
    } else {
        pab / (q - pab)
    }
}

pub fn attack_sim(settings: &Settings, adversary: AdversaryKind, trials: u64, p: usize) -> CliResult<()> {
    if p == 0 || trials == 0 {
        return Err(CliError::Config("--p and --trials must be at least 1".into()));
    }
    let m = settings.m.unwrap_or(4);
    let d = settings.d.unwrap_or(m);
    let mut rng = settings.rng();
    let f = random_matrix(m, d, &settings.q, &mut rng)?;
    let adv_rng = ChaCha20Rng::seed_from_u64(rng.next_u64());
    let mut adv: Box<dyn Adversary> = match adversary {
        AdversaryKind::Honest => Box::new(HonestAdversary::new(adv_rng)),
        AdversaryKind::RandomTamper => Box::new(RandomTamperAdversary::new(adv_rng)),
        AdversaryKind::ZeroOffset => Box::new(ZeroOffsetAdversary::new(adv_rng)),
    };
    let mut wins = 0;
    for _ in 0..trials {
        if run_security_experiment(&f, p, adv.as_mut(), &settings.scheme, &mut rng)? {
            wins += 1;
        }
    }
    let report = AttackReport {
        adversary,
        scheme: settings.scheme_label.clone(),
        q: settings.q.to_string(),
        m,
        d,
        p,
        trials,
        wins,
        rate: wins as f64 / trials as f64,
        bound: soundness_bound(&settings.q, p, settings.scheme.total_cells()),
    };
    emit(settings.out.as_deref(), &serde_json::to_string_pretty(&report).expect("report serializes"))
}

/// Shares `f` with the daemons under a fresh session.
fn remote_servers<R: RngCore>(
    settings: &Settings,
    f: &FieldMatrix,
    rng: &mut R,
) -> CliResult<(FunctionKeyMaterial, RemoteServers)> {
    let endpoints = settings.require_endpoints()?;
    let keys = key_gen(f, &settings.scheme, rng)?;
    let session_id = rng.next_u64();
    let remote = RemoteServers::new(endpoints, session_id, settings.q.clone());
    remote.provision(&setup_messages(&keys, &settings.scheme, session_id))?;
    Ok((keys, remote))
}

fn retrieve<S: Servers, R: RngCore>(mut client: PirClient<S>, index: usize, rng: &mut R) -> CliResult<FieldElement>
where
    CliError: From<S::Error>,
{
    accepted(client.retrieve(index, rng)?)
}

pub const DEMO_DATABASE: [u64; 4] = [10, 20, 30, 40];

pub fn pir(settings: &Settings, db: Option<&Path>, raw: bool, index: usize) -> CliResult<()> {
    let q = &settings.q;
    let entries: Vec<FieldElement> = match (db, raw) {
        (Some(path), true) => chunk_bytes(&read_file(path)?, q)?,
        (Some(path), false) => files::parse_elements(q, &read_json(path)?)?,
        (None, true) => return Err(CliError::Config("--raw needs --db".into())),
        (None, false) => DEMO_DATABASE.iter().map(|&v| q.element(v)).collect(),
    };
    let database: PirDatabase = build_database(&entries)?;
    if index == 0 || index > database.len() {
        return Err(CliError::Config(format!("--index must be in 1..={}", database.len())));
    }
    let mut rng = settings.rng();
    let entry = if settings.endpoints.is_empty() {
        retrieve(PirClient::local(&database, &settings.scheme, &mut rng)?, index, &mut rng)?
    } else {
        let (keys, remote) = remote_servers(settings, database.matrix(), &mut rng)?;
        retrieve(PirClient::new(database.len(), settings.scheme.clone(), keys, remote), index, &mut rng)?
    };
    if !raw {
        return emit(settings.out.as_deref(), &entry.to_string());
    }
    let bytes = unchunk(&entry);
    match &settings.out {
        Some(path) => fs::write(path, bytes).map_err(|e| CliError::io(path, e)),
        None => {
            println!("{}", bytes.iter().map(|b| format!("{b:02x}")).collect::<String>());
            Ok(())
        }
    }
}

fn evaluate<S: Servers, R: RngCore>(mut delegator: PolyDelegator<S>, point: &[FieldElement], rng: &mut R) -> CliResult<FieldElement>
where
    CliError: From<S::Error>,
{
    accepted(delegator.evaluate(point, rng)?)
}

pub fn poly(settings: &Settings, spec: &Path, point: &[String]) -> CliResult<()> {
    let q = &settings.q;
    let spec: PolynomialSpec = read_json(spec)?;
    let decomposition = spec.decompose(q)?;
    let point = point.iter().map(|s| q.parse_element(s)).collect::<Result<Vec<_>, _>>()?;
    if point.len() != decomposition.arity() {
        return Err(CliError::Config(format!(
            "the polynomial takes {} variables, got {}",
            decomposition.arity(),
            point.len()
        )));
    }
    let mut rng = settings.rng();
    let value = if settings.endpoints.is_empty() {
        evaluate(PolyDelegator::local(decomposition, &settings.scheme, &mut rng)?, &point, &mut rng)?
    } else {
        let (keys, remote) = remote_servers(settings, decomposition.matrix(), &mut rng)?;
        let scheme: CoveringScheme = settings.scheme.clone();
        evaluate(PolyDelegator::new(decomposition, scheme, keys, remote), &point, &mut rng)?
    };
    emit(settings.out.as_deref(), &value.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_matches_the_formula() {
        let q = FieldModulus::from_u64(1009).unwrap();
        assert!((soundness_bound(&q, 1, 9) - 0.009).abs() < 1e-12);
        assert!((soundness_bound(&q, 1, 4) - 4.0 / 1005.0).abs() < 1e-12);
        assert_eq!(soundness_bound(&FieldModulus::from_u64(7).unwrap(), 1, 9), f64::INFINITY);
        assert!(soundness_bound(&FieldModulus::default_256(), 1, 9) < 1e-70);
    }
}
