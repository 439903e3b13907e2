//! Timing and operation counts for one benchmark point.
//!
//! `T_n` is the naive product `F x`; `T_c` is the client's per-input work,
//! `ProbGen` plus `Verify`; `T_server` is the slowest server's `Compute`.
//! Each is the median over the runs, timed on the calling thread.

use std::time::{Duration, Instant};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::covering::CoveringScheme;
use crate::error::{Error, Result};
use crate::field::{count_muls, mat_vec_mul, random_matrix, random_vector, FieldModulus};
use crate::protocol::{compute, key_gen, prob_gen, verify, Verified};

/// Column order of [`BenchRecord`] in CSV output.
pub const CSV_HEADER: [&str; 11] = [
    "m",
    "d",
    "scheme",
    "t_n_ms",
    "t_c_ms",
    "t_server_ms",
    "keygen_muls",
    "probgen_muls",
    "compute_muls",
    "verify_muls",
    "runs",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub m: usize,
    pub d: usize,
    pub scheme: String,
    pub t_n_ms: f64,
    pub t_c_ms: f64,
    pub t_server_ms: f64,
    pub keygen_muls: u64,
    pub probgen_muls: u64,
    /// Summed over all servers.
    pub compute_muls: u64,
    pub verify_muls: u64,
    pub runs: usize,
}

impl BenchRecord {
    /// `T_n / T_c`.
    pub fn speedup(&self) -> f64 {
        self.t_n_ms / self.t_c_ms
    }
}

/// Smallest accepted number of runs per point.
pub const MIN_RUNS: usize = 5;

fn median(mut samples: Vec<Duration>) -> f64 {
    samples.sort();
    let n = samples.len();
    let mid = if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2
    };
    mid.as_secs_f64() * 1e3
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

/// Measures one `(m, d)` point with a fresh random `F` and a fresh `x` per
/// run. Every run must verify; a rejection is reported as an error.
pub fn measure_point<R: RngCore + ?Sized>(
    m: usize,
    d: usize,
    label: &str,
    scheme: &CoveringScheme,
    modulus: &FieldModulus,
    runs: usize,
    rng: &mut R,
) -> Result<BenchRecord> {
    if runs < MIN_RUNS {
        return Err(Error::Malformed(format!("need at least {MIN_RUNS} runs, got {runs}")));
    }
    let f = random_matrix(m, d, modulus, rng)?;
    let (keys, keygen_muls) = count_muls(|| key_gen(&f, scheme, rng));
    let keys = keys?;

    let (mut t_n, mut t_c, mut t_server) = (Vec::new(), Vec::new(), Vec::new());
    let (mut probgen_muls, mut compute_muls, mut verify_muls) = (0, 0, 0);
    for _ in 0..runs {
        let x = random_vector(d, modulus, rng)?;
        let (naive, elapsed) = timed(|| mat_vec_mul(&f, &x));
        let naive = naive?;
        t_n.push(elapsed);

        let ((input, pg_muls), pg_time) = timed(|| count_muls(|| prob_gen(&keys.pk, &x, scheme, rng)));
        let input = input?;
        probgen_muls = pg_muls;

        let mut outputs = Vec::with_capacity(scheme.k);
        let mut slowest = Duration::ZERO;
        compute_muls = 0;
        for l in 1..=scheme.k {
            let ((out, muls), elapsed) = timed(|| count_muls(|| compute(l, &keys.rho[l - 1], &input.sigma[l - 1], scheme)));
            outputs.push(out?);
            compute_muls += muls;
            slowest = slowest.max(elapsed);
        }
        t_server.push(slowest);

        let ((outcome, v_muls), v_time) = timed(|| count_muls(|| verify(&keys.vk, &input.vk, &outputs, scheme)));
        verify_muls = v_muls;
        match outcome? {
            Verified::Accepted(y) if y == naive => {}
            Verified::Accepted(_) => return Err(Error::Malformed("verified result differs from F x".into())),
            Verified::Rejected(r) => return Err(Error::Malformed(format!("honest run rejected: {r}"))),
        }
        t_c.push(pg_time + v_time);
    }

    Ok(BenchRecord {
        m,
        d,
        scheme: label.to_string(),
        t_n_ms: median(t_n),
        t_c_ms: median(t_c),
        t_server_ms: median(t_server),
        keygen_muls,
        probgen_muls,
        compute_muls,
        verify_muls,
        runs,
    })
}
