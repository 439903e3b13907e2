//! Settings shared by every subcommand: command-line flags layered over an
//! optional JSON config file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use msvc_core::{pi_s, pi_w, CoveringScheme, FieldModulus};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// The config file. Every field is optional; flags win over the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `pi_s`, `pi_w` or the path of a scheme JSON file.
    pub scheme: Option<String>,
    /// Decimal prime.
    pub q: Option<String>,
    pub m: Option<usize>,
    pub d: Option<usize>,
    pub seed: Option<u64>,
    pub endpoints: Option<Vec<String>>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file with any of: scheme, q, m, d, seed, endpoints, out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// pi_s, pi_w, or a covering scheme JSON file.
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Prime modulus in decimal [default: the built-in 256-bit prime].
    #[arg(long, global = true)]
    pub q: Option<String>,
    #[arg(long, global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub d: Option<usize>,
    /// Seed for all randomness; fresh OS randomness when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Server addresses in server order, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub endpoints: Vec<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub scheme: CoveringScheme,
    pub scheme_label: String,
    pub q: FieldModulus,
    pub m: Option<usize>,
    pub d: Option<usize>,
    pub seed: Option<u64>,
    pub endpoints: Vec<String>,
    pub out: Option<PathBuf>,
}

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_slice(&read_file(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// `pi_s`, `pi_w`, or a JSON file holding a valid scheme.
pub fn resolve_scheme(name: &str) -> CliResult<CoveringScheme> {
    let scheme = match name {
        "pi_s" => return Ok(pi_s()),
        "pi_w" => return Ok(pi_w()),
        path => read_json::<CoveringScheme>(Path::new(path))?,
    };
    scheme
        .validate()
        .map_err(|v| CliError::Config(format!("{name}: not a valid covering scheme: {v}")))?;
    Ok(scheme)
}

fn positive(name: &str, v: Option<usize>) -> CliResult<Option<usize>> {
    match v {
        Some(0) => Err(CliError::Config(format!("--{name} must be at least 1"))),
        v => Ok(v),
    }
}

impl CommonArgs {
    pub fn resolve(&self) -> CliResult<Settings> {
        let file = match &self.config {
            Some(path) => read_json::<RunConfig>(path)?,
            None => RunConfig::default(),
        };
        let scheme_label = self.scheme.clone().or(file.scheme).unwrap_or_else(|| "pi_s".into());
        let scheme = resolve_scheme(&scheme_label)?;
        let q = match self.q.as_deref().or(file.q.as_deref()) {
            Some(s) => s
                .parse::<FieldModulus>()
                .map_err(|e| CliError::Config(format!("--q: {e}")))?,
            None => FieldModulus::default_256(),
        };
        let endpoints = if self.endpoints.is_empty() {
            file.endpoints.unwrap_or_default()
        } else {
            self.endpoints.clone()
        };
        Ok(Settings {
            scheme,
            scheme_label,
            q,
            m: positive("m", self.m.or(file.m))?,
            d: positive("d", self.d.or(file.d))?,
            seed: self.seed.or(file.seed),
            endpoints,
            out: self.out.clone().or(file.out),
        })
    }
}

impl Settings {
    pub fn rng(&self) -> ChaCha20Rng {
        match self.seed {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed),
            None => ChaCha20Rng::from_os_rng(),
        }
    }

    pub fn require_m(&self) -> CliResult<usize> {
        self.m.ok_or_else(|| CliError::Config("--m is required".into()))
    }

    pub fn require_d(&self) -> CliResult<usize> {
        self.d.ok_or_else(|| CliError::Config("--d is required".into()))
    }

    pub fn require_out(&self) -> CliResult<&Path> {
        self.out.as_deref().ok_or_else(|| CliError::Config("--out is required".into()))
    }

    /// Endpoints, checked against the scheme's server count.
    pub fn require_endpoints(&self) -> CliResult<Vec<String>> {
        if self.endpoints.len() != self.scheme.k {
            return Err(CliError::Config(format!(
                "the scheme has {} servers but {} endpoints were given",
                self.scheme.k,
                self.endpoints.len()
            )));
        }
        Ok(self.endpoints.clone())
    }
}
